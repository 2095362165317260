//! Involutive BMW presentations.
//!
//! A presentation of degree `(m, n)` has generators `x_1..x_m`, `a_1..a_n`,
//! all involutions, and one square relation `x_i a_j x_i' a_j'` through every
//! corner `(i, j)`. A relation claims the four corners `(i,j)`, `(i',j')`,
//! `(i,j')`, `(i',j)`, so a presentation is the same thing as a partition of
//! the grid `[m] × [n]` into rectangles `{i,i'} × {j,j'}` (sides may collapse).
//!
//! Indices are 0-based in memory and 1-based in JSON.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complexes::for_each_permutation;
use crate::perm::{equals_alternating, orbit_of, PermError, Permutation};

/// Tag recording that non-residual-finiteness is asserted outside the toolkit.
pub const NRF_EXTERNAL: &str = "nrf: external";

/// Default cap on `m·n` for exhaustive search.
pub const DEFAULT_SEARCH_CORNERS: usize = 24;

#[derive(Debug, Error)]
pub enum BmwError {
    #[error("degree ({0}, {1}) must be positive")]
    Degree(usize, usize),
    #[error("index out of range in relation {0:?}")]
    OutOfRange([usize; 4]),
    #[error("corner ({}, {}) is claimed by two different relations", .0 + 1, .1 + 1)]
    Conflict(usize, usize),
    #[error("corner ({}, {}) lies on no relation", .0 + 1, .1 + 1)]
    Missing(usize, usize),
    #[error("corner ({}, {}) reads a different relation than its opposite corner", .0 + 1, .1 + 1)]
    Inconsistent(usize, usize),
    #[error("m·n = {0} exceeds the search cap {1}")]
    TooLarge(usize, usize),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Perm(#[from] PermError),
}

/// A valid involutive BMW presentation, stored as its corner table.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BmwPresentation {
    m: usize,
    n: usize,
    /// `opposite[i*n + j] = (i', j')` for the relation `x_i a_j x_i' a_j'`.
    opposite: Vec<(u32, u32)>,
    tags: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct BmwJson {
    m: usize,
    n: usize,
    squares: Vec<[usize; 4]>,
    #[serde(default)]
    tags: Vec<String>,
}

/// The four corners claimed by the relation `x_i a_j x_i' a_j'`.
fn relation_corners(i: usize, j: usize, i2: usize, j2: usize) -> [((usize, usize), (usize, usize)); 4] {
    [((i, j), (i2, j2)), ((i2, j2), (i, j)), ((i, j2), (i2, j)), ((i2, j), (i, j2))]
}

impl BmwPresentation {
    /// Builds from a list of relations `[i, j, i', j']` (0-based). Each corner
    /// must be claimed by exactly one relation; listing the same relation
    /// twice, possibly in another reading, is allowed.
    pub fn from_relations(m: usize, n: usize, relations: &[[usize; 4]]) -> Result<Self, BmwError> {
        if m == 0 || n == 0 {
            return Err(BmwError::Degree(m, n));
        }
        let mut opposite: Vec<Option<(u32, u32)>> = vec![None; m * n];
        for &r in relations {
            let [i, j, i2, j2] = r;
            if i >= m || i2 >= m || j >= n || j2 >= n {
                return Err(BmwError::OutOfRange(r));
            }
            for ((a, b), (c, e)) in relation_corners(i, j, i2, j2) {
                let slot = &mut opposite[a * n + b];
                let value = (c as u32, e as u32);
                match slot {
                    Some(old) if *old != value => return Err(BmwError::Conflict(a, b)),
                    _ => *slot = Some(value),
                }
            }
        }
        let mut table = Vec::with_capacity(m * n);
        for (k, o) in opposite.into_iter().enumerate() {
            table.push(o.ok_or(BmwError::Missing(k / n, k % n))?);
        }
        Self::from_corner_table(m, n, table)
    }

    /// Builds from a full corner table (0-based), checking that reading the
    /// relation from any of its corners gives the same relation.
    pub fn from_corner_table(m: usize, n: usize, table: Vec<(u32, u32)>) -> Result<Self, BmwError> {
        if m == 0 || n == 0 {
            return Err(BmwError::Degree(m, n));
        }
        if table.len() != m * n {
            return Err(BmwError::Missing(table.len() / n, table.len() % n));
        }
        for i in 0..m {
            for j in 0..n {
                let (i2, j2) = table[i * n + j];
                let (i2, j2) = (i2 as usize, j2 as usize);
                if i2 >= m || j2 >= n {
                    return Err(BmwError::OutOfRange([i, j, i2, j2]));
                }
                for ((a, b), (c, e)) in relation_corners(i, j, i2, j2) {
                    if table[a * n + b] != (c as u32, e as u32) {
                        return Err(BmwError::Inconsistent(i, j));
                    }
                }
            }
        }
        Ok(BmwPresentation { m, n, opposite: table, tags: vec![NRF_EXTERNAL.to_string()] })
    }

    /// Builds from the local actions: `ξ'_i ∈ Sym_n` and `α_j ∈ Sym_m`.
    /// The relation through `(i, j)` is `x_i a_j x_{α_j(i)} a_{ξ'_i(j)}`.
    pub fn from_local_actions(xi: &[Permutation], alpha: &[Permutation]) -> Result<Self, BmwError> {
        let (m, n) = (xi.len(), alpha.len());
        if m == 0 || n == 0 {
            return Err(BmwError::Degree(m, n));
        }
        let mut table = Vec::with_capacity(m * n);
        for i in 0..m {
            for j in 0..n {
                table.push((alpha[j].apply(i) as u32, xi[i].apply(j) as u32));
            }
        }
        Self::from_corner_table(m, n, table)
    }

    /// Every relation `x_i a_j x_i a_j`: the direct product of two free
    /// products of involutions.
    pub fn direct_product(m: usize, n: usize) -> Result<Self, BmwError> {
        let table = (0..m).flat_map(|i| (0..n).map(move |j| (i as u32, j as u32))).collect();
        Self::from_corner_table(m, n, table)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn add_tag(&mut self, tag: &str) {
        if !self.tags.iter().any(|t| t == tag) {
            self.tags.push(tag.to_string());
        }
    }

    /// The opposite corner `(i', j')` of `(i, j)`.
    pub fn opposite(&self, i: usize, j: usize) -> (usize, usize) {
        let (a, b) = self.opposite[i * self.n + j];
        (a as usize, b as usize)
    }

    /// The corner table in row-major order.
    pub fn corner_table(&self) -> &[(u32, u32)] {
        &self.opposite
    }

    /// The relation through `(i, j)`, read from that corner.
    pub fn relation(&self, i: usize, j: usize) -> [usize; 4] {
        let (i2, j2) = self.opposite(i, j);
        [i, j, i2, j2]
    }

    /// One relation per orbit of corners, each in its least reading.
    pub fn relations(&self) -> Vec<[usize; 4]> {
        let mut out = BTreeSet::new();
        for i in 0..self.m {
            for j in 0..self.n {
                let (i2, j2) = self.opposite(i, j);
                let reading = [[i, j, i2, j2], [i2, j2, i, j], [i, j2, i2, j], [i2, j, i, j2]];
                out.insert(*reading.iter().min().expect("four readings"));
            }
        }
        out.into_iter().collect()
    }

    /// `(ξ'_i on [n] for each i, α_j on [m] for each j)`.
    pub fn local_actions(&self) -> (Vec<Permutation>, Vec<Permutation>) {
        let xi = (0..self.m)
            .map(|i| {
                let images = (0..self.n).map(|j| self.opposite(i, j).1 as u32).collect();
                Permutation::from_images_unchecked(images)
            })
            .collect();
        let alpha = (0..self.n)
            .map(|j| {
                let images = (0..self.m).map(|i| self.opposite(i, j).0 as u32).collect();
                Permutation::from_images_unchecked(images)
            })
            .collect();
        (xi, alpha)
    }

    /// Simultaneous relabelling of `x` by `sigma` and `a` by `tau`.
    pub fn relabel(&self, sigma: &Permutation, tau: &Permutation) -> BmwPresentation {
        let mut table = vec![(0u32, 0u32); self.m * self.n];
        for i in 0..self.m {
            for j in 0..self.n {
                let (i2, j2) = self.opposite(i, j);
                table[sigma.apply(i) * self.n + tau.apply(j)] = (sigma.apply(i2) as u32, tau.apply(j2) as u32);
            }
        }
        BmwPresentation { m: self.m, n: self.n, opposite: table, tags: self.tags.clone() }
    }

    /// True iff no relabelling gives a lexicographically smaller corner table.
    pub fn is_canonical(&self) -> bool {
        let mut canonical = true;
        let mut sigmas = Vec::new();
        for_each_permutation(self.m, |s| sigmas.push(s.clone()));
        for_each_permutation(self.n, |tau| {
            if !canonical {
                return;
            }
            for sigma in &sigmas {
                if self.relabel(sigma, tau).opposite < self.opposite {
                    canonical = false;
                    return;
                }
            }
        });
        canonical
    }

    pub fn validate(&self) -> BmwReport {
        validate(self)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let squares = self.relations().into_iter().map(|r| r.map(|x| x + 1)).collect();
        serde_json::to_value(BmwJson { m: self.m, n: self.n, squares, tags: self.tags.clone() })
            .expect("plain data serializes")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self, BmwError> {
        let raw: BmwJson = serde_json::from_value(value.clone())?;
        let mut relations = Vec::with_capacity(raw.squares.len());
        for r in raw.squares {
            if r.iter().any(|&x| x == 0) {
                return Err(BmwError::OutOfRange(r));
            }
            relations.push(r.map(|x| x - 1));
        }
        let mut p = Self::from_relations(raw.m, raw.n, &relations)?;
        for t in &raw.tags {
            p.add_tag(t);
        }
        Ok(p)
    }
}

/// Validation summary with the transitivity data of both local actions.
#[derive(Clone, Debug, Serialize)]
pub struct BmwReport {
    pub m: usize,
    pub n: usize,
    pub relations: usize,
    /// Relations `x_i a_j x_i a_j`.
    pub commuting: usize,
    /// Relations with exactly one of `i = i'`, `j = j'`.
    pub degenerate: usize,
    pub involutions: bool,
    pub corner_consistent: bool,
    /// Orbit sizes of `⟨α⟩` on the `x` side.
    pub x_orbits: Vec<usize>,
    /// Orbit sizes of `⟨ξ'⟩` on the `a` side.
    pub a_orbits: Vec<usize>,
    pub alternating_x: bool,
    pub alternating_a: bool,
    pub tags: Vec<String>,
}

impl BmwReport {
    pub fn valid(&self) -> bool {
        self.involutions && self.corner_consistent
    }
}

fn orbit_sizes(degree: usize, gens: &[Permutation]) -> Vec<usize> {
    let mut seen = vec![false; degree];
    let mut out = Vec::new();
    for p in 0..degree {
        if !seen[p] {
            let orbit = orbit_of(degree, gens, p);
            for &q in &orbit {
                seen[q] = true;
            }
            out.push(orbit.len());
        }
    }
    out
}

/// Rechecks the corner table from scratch and reports local-action data.
pub fn validate(p: &BmwPresentation) -> BmwReport {
    let (xi, alpha) = p.local_actions();
    let involutions = xi.iter().chain(&alpha).all(|g| g.is_involution());
    let corner_consistent = BmwPresentation::from_corner_table(p.m, p.n, p.opposite.clone()).is_ok();
    let relations = p.relations();
    let commuting = relations.iter().filter(|r| r[0] == r[2] && r[1] == r[3]).count();
    let degenerate = relations.iter().filter(|r| (r[0] == r[2]) != (r[1] == r[3])).count();
    BmwReport {
        m: p.m,
        n: p.n,
        relations: relations.len(),
        commuting,
        degenerate,
        involutions,
        corner_consistent,
        x_orbits: orbit_sizes(p.m, &alpha),
        a_orbits: orbit_sizes(p.n, &xi),
        alternating_x: equals_alternating(&alpha, p.m).unwrap_or(false),
        alternating_a: equals_alternating(&xi, p.n).unwrap_or(false),
        tags: p.tags.clone(),
    }
}

/// Filters for [`search_involutive`]. `x` refers to `⟨α⟩` on `[m]`, `a` to
/// `⟨ξ'⟩` on `[n]`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SearchFilters {
    pub transitive_x: bool,
    pub transitive_a: bool,
    pub alternating_x: bool,
    pub alternating_a: bool,
    /// Stop after this many emitted presentations.
    pub limit: Option<usize>,
    /// Emit every corner table instead of one per relabelling orbit.
    pub raw: bool,
    /// Cap on visited search nodes.
    pub node_budget: Option<u64>,
    /// Cap on `m·n`; defaults to [`DEFAULT_SEARCH_CORNERS`].
    pub max_corners: Option<usize>,
}

/// Search output. `resume` is the choice path of the next unexplored node
/// when the search stopped early; pass it back to continue.
#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub presentations: Vec<BmwPresentation>,
    pub nodes: u64,
    pub exhausted: bool,
    pub resume: Option<Vec<u32>>,
}

struct Grid {
    m: usize,
    n: usize,
    table: Vec<Option<(u32, u32)>>,
    /// Horizontal pairs per row and vertical pairs per column, for parity.
    row_pairs: Vec<u32>,
    col_pairs: Vec<u32>,
}

impl Grid {
    fn first_free(&self) -> Option<usize> {
        self.table.iter().position(|c| c.is_none())
    }

    /// Candidate opposite corners for the free corner `k`, ascending.
    fn choices(&self, k: usize) -> Vec<(usize, usize)> {
        let (i, j) = (k / self.n, k % self.n);
        let free = |a: usize, b: usize| self.table[a * self.n + b].is_none();
        let mut out = Vec::new();
        for i2 in i..self.m {
            for j2 in j..self.n {
                if free(i2, j2) && free(i, j2) && free(i2, j) {
                    out.push((i2, j2));
                }
            }
        }
        out
    }

    fn set(&mut self, i: usize, j: usize, i2: usize, j2: usize, on: bool) {
        for ((a, b), (c, e)) in relation_corners(i, j, i2, j2) {
            self.table[a * self.n + b] = on.then_some((c as u32, e as u32));
        }
        let delta: i32 = if on { 1 } else { -1 };
        if j2 != j {
            for r in [i, i2].iter().collect::<BTreeSet<_>>() {
                self.row_pairs[*r] = (self.row_pairs[*r] as i32 + delta) as u32;
            }
        }
        if i2 != i {
            for c in [j, j2].iter().collect::<BTreeSet<_>>() {
                self.col_pairs[*c] = (self.col_pairs[*c] as i32 + delta) as u32;
            }
        }
    }
}

fn passes(p: &BmwPresentation, f: &SearchFilters) -> bool {
    let (xi, alpha) = p.local_actions();
    if (f.transitive_x || f.alternating_x) && orbit_of(p.m, &alpha, 0).len() != p.m {
        return false;
    }
    if (f.transitive_a || f.alternating_a) && orbit_of(p.n, &xi, 0).len() != p.n {
        return false;
    }
    if f.alternating_x && !equals_alternating(&alpha, p.m).unwrap_or(false) {
        return false;
    }
    if f.alternating_a && !equals_alternating(&xi, p.n).unwrap_or(false) {
        return false;
    }
    f.raw || p.is_canonical()
}

/// Depth-first enumeration of corner tables in lexicographic order.
///
/// With alternating filters the parity of every row and column is pruned as
/// soon as it is complete: an even involution has an even number of
/// transpositions.
pub fn search_involutive(
    m: usize,
    n: usize,
    filters: &SearchFilters,
    resume: Option<&[u32]>,
) -> Result<SearchOutcome, BmwError> {
    if m == 0 || n == 0 {
        return Err(BmwError::Degree(m, n));
    }
    let cap = filters.max_corners.unwrap_or(DEFAULT_SEARCH_CORNERS);
    if m * n > cap {
        return Err(BmwError::TooLarge(m * n, cap));
    }
    let mut grid =
        Grid { m, n, table: vec![None; m * n], row_pairs: vec![0; m], col_pairs: vec![0; n] };
    // Each frame: (corner, choices, index of the choice currently applied).
    let mut stack: Vec<(usize, Vec<(usize, usize)>, usize)> = Vec::new();
    let mut out = Vec::new();
    let mut nodes = 0u64;
    let mut start: Vec<u32> = resume.map(|r| r.to_vec()).unwrap_or_default();
    start.reverse();

    // Descend from the current state, taking the forced resume path first.
    loop {
        // Push frames until the grid is full or a dead end is hit.
        let descend_ok = loop {
            let Some(k) = grid.first_free() else { break true };
            let (r, _) = (k / n, k % n);
            if filters.alternating_a && (0..r).any(|row| grid.row_pairs[row] % 2 == 1) {
                break false;
            }
            let choices = grid.choices(k);
            let idx = start.pop().map(|x| x as usize).unwrap_or(0);
            if idx >= choices.len() {
                break false;
            }
            let (i2, j2) = choices[idx];
            grid.set(k / n, k % n, i2, j2, true);
            stack.push((k, choices, idx));
            nodes += 1;
        };
        if descend_ok {
            let even_ok = !filters.alternating_a || grid.row_pairs.iter().all(|c| c % 2 == 0);
            let even_ok = even_ok && (!filters.alternating_x || grid.col_pairs.iter().all(|c| c % 2 == 0));
            if even_ok {
                let table = grid.table.iter().map(|c| c.expect("full grid")).collect();
                let p = BmwPresentation { m, n, opposite: table, tags: vec![NRF_EXTERNAL.to_string()] };
                if passes(&p, filters) {
                    out.push(p);
                }
            }
        }
        // Advance to the next sibling, popping exhausted frames.
        loop {
            let Some((k, choices, idx)) = stack.pop() else {
                return Ok(SearchOutcome { presentations: out, nodes, exhausted: true, resume: None });
            };
            let (i2, j2) = choices[idx];
            grid.set(k / n, k % n, i2, j2, false);
            if idx + 1 < choices.len() {
                let next = idx + 1;
                let stop = filters.limit.is_some_and(|l| out.len() >= l)
                    || filters.node_budget.is_some_and(|b| nodes >= b);
                if stop {
                    let mut token: Vec<u32> = stack.iter().map(|f| f.2 as u32).collect();
                    token.push(next as u32);
                    return Ok(SearchOutcome { presentations: out, nodes, exhausted: false, resume: Some(token) });
                }
                let (i2, j2) = choices[next];
                grid.set(k / n, k % n, i2, j2, true);
                stack.push((k, choices, next));
                nodes += 1;
                break;
            }
        }
    }
}

/// Counts valid corner tables by enumerating tuples of involutions
/// `(ξ'_1..ξ'_m, α_1..α_n)` and keeping the compatible ones. Independent of
/// the rectangle search; exponential, for small degrees only.
pub fn count_by_local_actions(m: usize, n: usize) -> usize {
    let involutions = |k: usize| {
        let mut v = Vec::new();
        for_each_permutation(k, |p| {
            if p.is_involution() {
                v.push(p.clone());
            }
        });
        v
    };
    let (inv_n, inv_m) = (involutions(n), involutions(m));
    let mut count = 0;
    let total = inv_n.len().pow(m as u32) * inv_m.len().pow(n as u32);
    let mut digits = vec![0usize; m + n];
    for _ in 0..total {
        let xi: Vec<Permutation> = (0..m).map(|i| inv_n[digits[i]].clone()).collect();
        let alpha: Vec<Permutation> = (0..n).map(|j| inv_m[digits[m + j]].clone()).collect();
        if BmwPresentation::from_local_actions(&xi, &alpha).is_ok() {
            count += 1;
        }
        for (pos, d) in digits.iter_mut().enumerate() {
            let base = if pos < m { inv_n.len() } else { inv_m.len() };
            *d += 1;
            if *d < base {
                break;
            }
            *d = 0;
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all(m: usize, n: usize) -> SearchOutcome {
        let f = SearchFilters { raw: true, ..Default::default() };
        search_involutive(m, n, &f, None).unwrap()
    }

    #[test]
    fn forced_one_by_one() {
        let out = all(1, 1);
        assert_eq!(out.presentations.len(), 1);
        assert_eq!(out.presentations[0].relations(), vec![[0, 0, 0, 0]]);
    }

    #[test]
    fn counts_agree_with_local_action_enumeration() {
        for (m, n) in [(1, 1), (2, 1), (1, 3), (2, 2), (3, 2), (2, 3), (3, 3), (4, 2)] {
            assert_eq!(all(m, n).presentations.len(), count_by_local_actions(m, n), "({m},{n})");
        }
    }

    #[test]
    fn direct_product_has_trivial_actions() {
        let p = BmwPresentation::direct_product(3, 4).unwrap();
        let (xi, alpha) = p.local_actions();
        assert!(xi.iter().chain(&alpha).all(|g| g.is_identity()));
        assert!(p.validate().valid());
        assert_eq!(p.validate().commuting, 12);
    }

    #[test]
    fn conflicting_corner_rejected() {
        let err = BmwPresentation::from_relations(2, 2, &[[0, 0, 1, 1], [0, 0, 0, 0]]).unwrap_err();
        assert!(matches!(err, BmwError::Conflict(0, 0)));
        let err = BmwPresentation::from_relations(2, 2, &[[0, 0, 0, 0]]).unwrap_err();
        assert!(matches!(err, BmwError::Missing(..)));
    }

    #[test]
    fn inconsistent_table_rejected() {
        // (0,0) -> (1,1) but (1,1) -> (1,1).
        let table = vec![(1, 1), (1, 0), (0, 1), (1, 1)];
        assert!(matches!(BmwPresentation::from_corner_table(2, 2, table), Err(BmwError::Inconsistent(..))));
    }

    #[test]
    fn json_round_trip_and_resume() {
        let out = all(3, 3);
        for p in &out.presentations {
            let q = BmwPresentation::from_json(&p.to_json()).unwrap();
            assert_eq!(&q, p);
        }
        // Stop early and resume: the concatenation equals the full stream.
        let f = SearchFilters { raw: true, node_budget: Some(20), ..Default::default() };
        let mut got = Vec::new();
        let mut token: Option<Vec<u32>> = None;
        loop {
            let part = search_involutive(3, 3, &f, token.as_deref()).unwrap();
            got.extend(part.presentations);
            if part.exhausted {
                break;
            }
            token = part.resume;
        }
        assert_eq!(got, out.presentations);
    }

    #[test]
    fn canonical_stream_is_a_transversal() {
        let raw = all(3, 2).presentations;
        let f = SearchFilters::default();
        let canon = search_involutive(3, 2, &f, None).unwrap().presentations;
        let mut orbits: BTreeSet<Vec<(u32, u32)>> = BTreeSet::new();
        for p in &raw {
            let mut best = p.opposite.clone();
            for_each_permutation(3, |s| {
                for_each_permutation(2, |t| {
                    let q = p.relabel(s, t).opposite;
                    if q < best {
                        best = q;
                    }
                })
            });
            orbits.insert(best);
        }
        assert_eq!(canon.len(), orbits.len());
    }
}
