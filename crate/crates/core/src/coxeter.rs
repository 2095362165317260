//! Right-angled Coxeter groups and finite balls of their Davis complexes.
//!
//! Generators are the vertices of a defining graph `L`, indexed `0..m`; the
//! index order is the ShortLex order. An element is kept as its ShortLex
//! normal form.
//!
//! ```
//! use oddlattice::complexes::build_odd;
//! use oddlattice::coxeter::{build_ball, RacgPresentation};
//!
//! let pres = RacgPresentation::from_complex(build_odd(3).unwrap().complex());
//! let ball = build_ball(&pres, 2).unwrap();
//! assert_eq!(ball.sphere_sizes(), vec![1, 10, 75]);
//! ```

use std::collections::{HashMap, VecDeque};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::complexes::FlagComplex;

#[derive(Debug, Error)]
pub enum CoxeterError {
    #[error("unknown generator {0}")]
    UnknownLetter(String),
    #[error("ball would hold about {estimate} vertices, above the cap {cap}")]
    TooLarge { estimate: u128, cap: usize },
    #[error("vertex {0} is not in the ball")]
    OutsideBall(String),
    #[error("cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub const DEFAULT_VERTEX_CAP: usize = 5_000_000;
const DENSE_LIMIT: usize = 4096;

/// `W_L`: involutions indexed by `V(L)`, commuting along edges of `L`.
#[derive(Clone, Debug)]
pub struct RacgPresentation {
    labels: Vec<String>,
    adj: Vec<Vec<u32>>,
    dense: Option<Vec<u64>>,
    row_words: usize,
}

impl RacgPresentation {
    pub fn from_complex(l: &FlagComplex) -> Self {
        let adj = (0..l.vertex_count()).map(|v| l.neighbours(v).to_vec()).collect();
        Self::from_adjacency(l.labels().to_vec(), adj)
    }

    /// The free product of `m` copies of `Z/2`; its Davis complex is the `m`-regular tree.
    pub fn free(m: usize) -> Self {
        Self::from_complex(&FlagComplex::discrete(m, "t"))
    }

    pub fn from_adjacency(labels: Vec<String>, mut adj: Vec<Vec<u32>>) -> Self {
        let m = labels.len();
        for a in adj.iter_mut() {
            a.sort_unstable();
            a.dedup();
        }
        let row_words = m.div_ceil(64);
        let dense = (m <= DENSE_LIMIT).then(|| {
            let mut bits = vec![0u64; m * row_words];
            for (a, nb) in adj.iter().enumerate() {
                for &b in nb {
                    bits[a * row_words + b as usize / 64] |= 1u64 << (b % 64);
                }
            }
            bits
        });
        RacgPresentation { labels, adj, dense, row_words }
    }

    pub fn rank(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, s: u32) -> &str {
        &self.labels[s as usize]
    }

    pub fn letter(&self, label: &str) -> Result<u32, CoxeterError> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| i as u32)
            .ok_or_else(|| CoxeterError::UnknownLetter(label.to_string()))
    }

    pub fn neighbours(&self, s: u32) -> &[u32] {
        &self.adj[s as usize]
    }

    /// True iff `a ≠ b` and `{a, b}` is an edge of `L`.
    #[inline]
    pub fn commutes(&self, a: u32, b: u32) -> bool {
        match &self.dense {
            Some(bits) => bits[a as usize * self.row_words + b as usize / 64] >> (b % 64) & 1 == 1,
            None => self.adj[a as usize].binary_search(&b).is_ok(),
        }
    }

    pub fn defining_graph(&self) -> FlagComplex {
        let edges: Vec<(usize, usize)> = self
            .adj
            .iter()
            .enumerate()
            .flat_map(|(a, nb)| nb.iter().filter(move |&&b| (b as usize) > a).map(move |&b| (a, b as usize)))
            .collect();
        FlagComplex::from_edges(self.labels.clone(), &edges)
    }

    /// A cheap fingerprint of the presentation, stored in ball caches.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |x: u64| {
            h ^= x;
            h = h.wrapping_mul(0x100_0000_01b3);
        };
        eat(self.rank() as u64);
        for (a, nb) in self.adj.iter().enumerate() {
            for &b in nb {
                eat(((a as u64) << 32) | b as u64);
            }
        }
        h
    }

    /// Parses a whitespace-separated word of generator labels.
    pub fn parse_word(&self, text: &str) -> Result<Vec<u32>, CoxeterError> {
        text.split_whitespace().map(|t| self.letter(t)).collect()
    }

    pub fn format_word(&self, word: &[u32]) -> String {
        if word.is_empty() {
            return "ε".to_string();
        }
        word.iter().map(|&s| self.label(s)).collect::<Vec<_>>().join(" ")
    }

    /// Appends `s` to a reduced word, cancelling the last `s` that can be
    /// shuffled to the end.
    pub fn push_reduced(&self, word: &mut Vec<u32>, s: u32) {
        for i in (0..word.len()).rev() {
            let t = word[i];
            if t == s {
                word.remove(i);
                return;
            }
            if !self.commutes(t, s) {
                break;
            }
        }
        word.push(s);
    }

    /// Lexicographically least word in the commutation class of a reduced word.
    pub fn shortlex(&self, reduced: &[u32]) -> Vec<u32> {
        let mut rest: Vec<u32> = reduced.to_vec();
        let mut out = Vec::with_capacity(rest.len());
        while !rest.is_empty() {
            let mut best: Option<usize> = None;
            for i in 0..rest.len() {
                let s = rest[i];
                if rest[..i].iter().all(|&t| t != s && self.commutes(t, s))
                    && best.map_or(true, |b| s < rest[b])
                {
                    best = Some(i);
                }
            }
            let b = best.expect("the first letter is always available");
            out.push(rest.remove(b));
        }
        out
    }

    pub fn normalize(&self, word: &[u32]) -> Result<CoxeterElement, CoxeterError> {
        if let Some(&bad) = word.iter().find(|&&s| s as usize >= self.rank()) {
            return Err(CoxeterError::UnknownLetter(bad.to_string()));
        }
        Ok(self.normalize_unchecked(word))
    }

    pub(crate) fn normalize_unchecked(&self, word: &[u32]) -> CoxeterElement {
        let mut reduced = Vec::with_capacity(word.len());
        for &s in word {
            self.push_reduced(&mut reduced, s);
        }
        CoxeterElement { word: self.shortlex(&reduced) }
    }

    /// Normal form of `u · s`.
    pub fn mul_gen(&self, u: &CoxeterElement, s: u32) -> CoxeterElement {
        let mut w = u.word.clone();
        self.push_reduced(&mut w, s);
        CoxeterElement { word: self.shortlex(&w) }
    }

    pub fn mul(&self, u: &CoxeterElement, v: &CoxeterElement) -> CoxeterElement {
        let mut w = u.word.clone();
        for &s in &v.word {
            self.push_reduced(&mut w, s);
        }
        CoxeterElement { word: self.shortlex(&w) }
    }

    pub fn inverse(&self, u: &CoxeterElement) -> CoxeterElement {
        let rev: Vec<u32> = u.word.iter().rev().copied().collect();
        CoxeterElement { word: self.shortlex(&rev) }
    }

    /// Generators `s` with `ℓ(us) < ℓ(u)`, ascending.
    pub fn right_descents(&self, u: &[u32]) -> Vec<u32> {
        let mut out: Vec<u32> = (0..u.len())
            .filter(|&i| u[i + 1..].iter().all(|&t| t != u[i] && self.commutes(t, u[i])))
            .map(|i| u[i])
            .collect();
        out.sort_unstable();
        out
    }

    /// Generators `s` with `ℓ(su) < ℓ(u)`, ascending.
    pub fn left_descents(&self, u: &[u32]) -> Vec<u32> {
        let mut out: Vec<u32> = (0..u.len())
            .filter(|&i| u[..i].iter().all(|&t| t != u[i] && self.commutes(t, u[i])))
            .map(|i| u[i])
            .collect();
        out.sort_unstable();
        out
    }

    /// Clique counts `f_0 = 1, f_1 = |V|, f_2 = |E|, ...` of the flag complex of `L`.
    pub fn clique_counts(&self) -> Vec<u128> {
        let mut counts = vec![1u128];
        let mut cur = Vec::new();
        fn rec(p: &RacgPresentation, cur: &mut Vec<u32>, counts: &mut Vec<u128>) {
            let k = cur.len();
            if counts.len() <= k {
                counts.push(0);
            }
            counts[k] += 1;
            let last = *cur.last().unwrap();
            for &w in p.neighbours(last) {
                if w > last && cur.iter().all(|&u| p.commutes(u, w)) {
                    cur.push(w);
                    rec(p, cur, counts);
                    cur.pop();
                }
            }
        }
        for v in 0..self.rank() as u32 {
            cur.push(v);
            rec(self, &mut cur, &mut counts);
            cur.pop();
        }
        counts
    }

    /// Sphere sizes `|S_0|, ..., |S_n|` from the rational growth series
    /// `1/W(t) = Σ_σ (-t/(1+t))^{|σ|}` over the cliques σ of `L`.
    pub fn growth_series(&self, n: usize) -> Vec<u128> {
        let f = self.clique_counts();
        let top = f.len() - 1;
        // P(t) = Σ_k f_k (-t)^k (1+t)^{top-k}; W(t) = (1+t)^top / P(t).
        let binom = |a: usize, b: usize| -> i128 {
            (0..b).fold(1i128, |acc, i| acc * (a - i) as i128 / (i + 1) as i128)
        };
        let mut p = vec![0i128; top + 1];
        for (k, &fk) in f.iter().enumerate() {
            let sign = if k % 2 == 0 { 1 } else { -1 };
            for j in 0..=top - k {
                p[k + j] += sign * fk as i128 * binom(top - k, j);
            }
        }
        let numer: Vec<i128> = (0..=top).map(|j| binom(top, j)).collect();
        let mut w = vec![0i128; n + 1];
        for i in 0..=n {
            let mut c = if i < numer.len() { numer[i] } else { 0 };
            for j in 1..=i.min(top) {
                c -= p[j] * w[i - j];
            }
            w[i] = c / p[0];
        }
        w.into_iter().map(|x| x as u128).collect()
    }
}

/// An element of `W_L` in ShortLex normal form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize)]
pub struct CoxeterElement {
    word: Vec<u32>,
}

impl CoxeterElement {
    pub fn identity() -> Self {
        CoxeterElement { word: Vec::new() }
    }

    pub fn word(&self) -> &[u32] {
        &self.word
    }

    pub fn len(&self) -> usize {
        self.word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word.is_empty()
    }
}

pub const NONE: u32 = u32::MAX;

/// Normal forms of a finite set of elements, with a neighbour table
/// `neighbour(u, s) = us` (or [`NONE`] outside the set).
#[derive(Clone, Debug)]
pub struct VertexTable {
    rank: usize,
    words: Vec<u32>,
    offsets: Vec<u32>,
    index: HashMap<Box<[u32]>, u32>,
    neighbours: Vec<u32>,
}

impl VertexTable {
    pub fn new(rank: usize) -> Self {
        VertexTable { rank, words: Vec::new(), offsets: vec![0], index: HashMap::new(), neighbours: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn word(&self, v: u32) -> &[u32] {
        &self.words[self.offsets[v as usize] as usize..self.offsets[v as usize + 1] as usize]
    }

    pub fn element(&self, v: u32) -> CoxeterElement {
        CoxeterElement { word: self.word(v).to_vec() }
    }

    pub fn lookup(&self, word: &[u32]) -> Option<u32> {
        self.index.get(word).copied()
    }

    /// Inserts a normal form, returning its id and whether it is new.
    pub fn insert(&mut self, word: &[u32]) -> (u32, bool) {
        if let Some(&v) = self.index.get(word) {
            return (v, false);
        }
        let id = self.len() as u32;
        self.words.extend_from_slice(word);
        self.offsets.push(self.words.len() as u32);
        self.index.insert(word.into(), id);
        self.neighbours.extend(std::iter::repeat(NONE).take(self.rank));
        (id, true)
    }

    #[inline]
    pub fn neighbour(&self, v: u32, s: u32) -> u32 {
        self.neighbours[v as usize * self.rank + s as usize]
    }

    pub fn set_neighbour(&mut self, v: u32, s: u32, w: u32) {
        self.neighbours[v as usize * self.rank + s as usize] = w;
    }

    /// Fills every neighbour entry by multiplying normal forms.
    pub fn fill_neighbours(&mut self, pres: &RacgPresentation) {
        for v in 0..self.len() as u32 {
            for s in 0..self.rank as u32 {
                if self.neighbour(v, s) != NONE {
                    continue;
                }
                let mut w = self.word(v).to_vec();
                pres.push_reduced(&mut w, s);
                let nf = pres.shortlex(&w);
                if let Some(u) = self.lookup(&nf) {
                    self.set_neighbour(v, s, u);
                    self.set_neighbour(u, s, v);
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Near,
    Far,
}

/// A hyperplane meeting the ball. Its key is the reflection `w s w⁻¹`
/// through any transverse edge `(w, ws)`.
#[derive(Clone, Debug)]
pub struct Wall {
    pub label: u32,
    pub reflection: CoxeterElement,
    pub rep_edge: (u32, u32),
}

/// A square, corners in cyclic order starting at the least vertex id, with
/// the two labels ascending.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Square {
    pub corners: [u32; 4],
    pub labels: (u32, u32),
}

/// The ball of radius `n` about the identity in the graph metric of `X_L`.
#[derive(Clone, Debug)]
pub struct DavisBall {
    pub pres: RacgPresentation,
    pub radius: usize,
    pub table: VertexTable,
    pub dist: Vec<u8>,
    pub squares: Vec<Square>,
    pub walls: Vec<Wall>,
    /// Wall id per `(vertex, generator)` entry of the neighbour table.
    edge_wall: Vec<u32>,
}

pub fn build_ball(pres: &RacgPresentation, n: usize) -> Result<DavisBall, CoxeterError> {
    build_ball_capped(pres, n, DEFAULT_VERTEX_CAP)
}

pub fn build_ball_capped(pres: &RacgPresentation, n: usize, cap: usize) -> Result<DavisBall, CoxeterError> {
    let estimate: u128 = pres.growth_series(n).iter().sum();
    if estimate > cap as u128 {
        return Err(CoxeterError::TooLarge { estimate, cap });
    }
    let rank = pres.rank();
    let mut table = VertexTable::new(rank);
    let mut dist = vec![0u8];
    table.insert(&[]);
    let mut frontier = vec![0u32];
    for k in 1..=n {
        let mut next = Vec::new();
        for &u in &frontier {
            for s in 0..rank as u32 {
                if table.neighbour(u, s) != NONE {
                    continue;
                }
                let mut w = table.word(u).to_vec();
                pres.push_reduced(&mut w, s);
                if w.len() < k {
                    continue;
                }
                let nf = pres.shortlex(&w);
                let (v, fresh) = table.insert(&nf);
                if fresh {
                    dist.push(k as u8);
                    next.push(v);
                }
                table.set_neighbour(u, s, v);
                table.set_neighbour(v, s, u);
            }
        }
        frontier = next;
    }
    table.fill_neighbours(pres);
    let squares = collect_squares(pres, &table);
    let (walls, edge_wall) = collect_walls(pres, &table);
    Ok(DavisBall { pres: pres.clone(), radius: n, table, dist, squares, walls, edge_wall })
}

/// Squares `{u, ua, uab, ub}` with all corners present, each found once.
pub fn collect_squares(pres: &RacgPresentation, table: &VertexTable) -> Vec<Square> {
    let mut out = Vec::new();
    for u in 0..table.len() as u32 {
        for a in 0..pres.rank() as u32 {
            let ua = table.neighbour(u, a);
            if ua == NONE {
                continue;
            }
            for &b in pres.neighbours(a) {
                if b < a {
                    continue;
                }
                let ub = table.neighbour(u, b);
                if ub == NONE {
                    continue;
                }
                let uab = table.neighbour(ua, b);
                if uab == NONE {
                    continue;
                }
                let cyc = [u, ua, uab, ub];
                if cyc.iter().min() != Some(&u) {
                    continue;
                }
                let corners = if ua < ub { cyc } else { [u, ub, uab, ua] };
                out.push(Square { corners, labels: (a, b) });
            }
        }
    }
    out.sort();
    out
}

fn collect_walls(pres: &RacgPresentation, table: &VertexTable) -> (Vec<Wall>, Vec<u32>) {
    let rank = pres.rank();
    let mut walls: Vec<Wall> = Vec::new();
    let mut by_key: HashMap<Vec<u32>, u32> = HashMap::new();
    let mut edge_wall = vec![NONE; table.len() * rank];
    for u in 0..table.len() as u32 {
        for s in 0..rank as u32 {
            let v = table.neighbour(u, s);
            if v == NONE || edge_wall[u as usize * rank + s as usize] != NONE {
                continue;
            }
            let w = table.word(u);
            let mut refl: Vec<u32> = w.to_vec();
            refl.push(s);
            refl.extend(w.iter().rev());
            let r = pres.normalize_unchecked(&refl);
            let id = *by_key.entry(r.word.clone()).or_insert_with(|| {
                walls.push(Wall { label: s, reflection: r.clone(), rep_edge: (u.min(v), u.max(v)) });
                (walls.len() - 1) as u32
            });
            edge_wall[u as usize * rank + s as usize] = id;
            edge_wall[v as usize * rank + s as usize] = id;
        }
    }
    (walls, edge_wall)
}

impl DavisBall {
    pub fn vertex_count(&self) -> usize {
        self.table.len()
    }

    pub fn sphere_sizes(&self) -> Vec<usize> {
        let mut out = vec![0; self.radius + 1];
        for &d in &self.dist {
            out[d as usize] += 1;
        }
        out
    }

    pub fn edges(&self) -> Vec<(u32, u32, u32)> {
        let mut out = Vec::new();
        for u in 0..self.table.len() as u32 {
            for s in 0..self.pres.rank() as u32 {
                let v = self.table.neighbour(u, s);
                if v != NONE && u < v {
                    out.push((u, v, s));
                }
            }
        }
        out
    }

    pub fn edge_wall(&self, u: u32, s: u32) -> u32 {
        self.edge_wall[u as usize * self.pres.rank() + s as usize]
    }

    pub fn vertex(&self, word: &[u32]) -> Result<u32, CoxeterError> {
        let nf = self.pres.normalize(word)?;
        self.table.lookup(nf.word()).ok_or_else(|| CoxeterError::OutsideBall(self.pres.format_word(word)))
    }

    /// Far iff the wall separates `v` from the identity, i.e. `ℓ(r v) < ℓ(v)`.
    pub fn wall_side(&self, wall: usize, v: u32) -> Result<Side, CoxeterError> {
        if v as usize >= self.table.len() {
            return Err(CoxeterError::OutsideBall(format!("#{v}")));
        }
        let r = &self.walls[wall].reflection;
        let u = self.table.element(v);
        let ru = self.pres.mul(r, &u);
        Ok(if ru.len() < u.len() { Side::Far } else { Side::Near })
    }

    /// Sides by breadth-first search from the identity avoiding the wall's edges.
    pub fn wall_sides_by_search(&self, wall: usize) -> Vec<Side> {
        let rank = self.pres.rank();
        let mut side = vec![Side::Far; self.table.len()];
        let mut seen = vec![false; self.table.len()];
        seen[0] = true;
        side[0] = Side::Near;
        let mut queue = VecDeque::from([0u32]);
        while let Some(u) = queue.pop_front() {
            for s in 0..rank as u32 {
                let v = self.table.neighbour(u, s);
                if v == NONE || seen[v as usize] || self.edge_wall(u, s) == wall as u32 {
                    continue;
                }
                seen[v as usize] = true;
                side[v as usize] = Side::Near;
                queue.push_back(v);
            }
        }
        side
    }

    /// The link at `u`: generators, joined when a square at `u` uses both.
    pub fn link_at(&self, u: u32) -> FlagComplex {
        let rank = self.pres.rank();
        let mut link = FlagComplex::new(self.pres.labels().to_vec());
        for a in 0..rank as u32 {
            let ua = self.table.neighbour(u, a);
            if ua == NONE {
                continue;
            }
            for b in a + 1..rank as u32 {
                let ub = self.table.neighbour(u, b);
                if ub == NONE {
                    continue;
                }
                let uab = self.table.neighbour(ua, b);
                if uab != NONE && self.table.neighbour(ub, a) == uab {
                    link.add_edge(a as usize, b as usize);
                }
            }
        }
        link
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("graph davis_ball {\n");
        for v in 0..self.table.len() as u32 {
            s.push_str(&format!("  v{v} [label=\"{}\"];\n", self.pres.format_word(self.table.word(v))));
        }
        for (u, v, a) in self.edges() {
            s.push_str(&format!("  v{u} -- v{v} [label=\"{}\"];\n", self.pres.label(a)));
        }
        s.push_str("}\n");
        s
    }

    pub fn growth_json(&self) -> serde_json::Value {
        serde_json::json!({
            "radius": self.radius,
            "sphere_sizes": self.sphere_sizes(),
            "series": self.pres.growth_series(self.radius).iter().map(|x| x.to_string()).collect::<Vec<_>>(),
        })
    }

    const MAGIC: &'static [u8; 4] = b"ODLB";
    const VERSION: u32 = 1;

    /// Binary cache: header, vertex words, squares. Edges and walls are rebuilt on load.
    pub fn write_cache(&self, path: &Path) -> Result<(), CoxeterError> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(Self::MAGIC)?;
        for x in [Self::VERSION as u64, self.pres.fingerprint(), self.radius as u64, self.table.len() as u64] {
            w.write_all(&x.to_le_bytes())?;
        }
        for v in 0..self.table.len() as u32 {
            let word = self.table.word(v);
            w.write_all(&[self.dist[v as usize], word.len() as u8])?;
            for &s in word {
                w.write_all(&s.to_le_bytes())?;
            }
        }
        w.write_all(&(self.squares.len() as u64).to_le_bytes())?;
        for sq in &self.squares {
            for c in sq.corners {
                w.write_all(&c.to_le_bytes())?;
            }
            w.write_all(&sq.labels.0.to_le_bytes())?;
            w.write_all(&sq.labels.1.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_cache(path: &Path, pres: &RacgPresentation) -> Result<DavisBall, CoxeterError> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != Self::MAGIC {
            return Err(CoxeterError::Cache("bad magic".into()));
        }
        let read_u64 = |r: &mut BufReader<File>| -> Result<u64, CoxeterError> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(u64::from_le_bytes(b))
        };
        let version = read_u64(&mut r)?;
        if version != Self::VERSION as u64 {
            return Err(CoxeterError::Cache(format!("unsupported version {version}")));
        }
        if read_u64(&mut r)? != pres.fingerprint() {
            return Err(CoxeterError::Cache("presentation fingerprint mismatch".into()));
        }
        let radius = read_u64(&mut r)? as usize;
        let n = read_u64(&mut r)? as usize;
        let mut table = VertexTable::new(pres.rank());
        let mut dist = Vec::with_capacity(n);
        for _ in 0..n {
            let mut hdr = [0u8; 2];
            r.read_exact(&mut hdr)?;
            let mut word = Vec::with_capacity(hdr[1] as usize);
            for _ in 0..hdr[1] {
                let mut b = [0u8; 4];
                r.read_exact(&mut b)?;
                word.push(u32::from_le_bytes(b));
            }
            dist.push(hdr[0]);
            table.insert(&word);
        }
        let nsq = read_u64(&mut r)? as usize;
        let mut squares = Vec::with_capacity(nsq);
        let read_u32 = |r: &mut BufReader<File>| -> Result<u32, CoxeterError> {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            Ok(u32::from_le_bytes(b))
        };
        for _ in 0..nsq {
            let corners = [read_u32(&mut r)?, read_u32(&mut r)?, read_u32(&mut r)?, read_u32(&mut r)?];
            let labels = (read_u32(&mut r)?, read_u32(&mut r)?);
            squares.push(Square { corners, labels });
        }
        table.fill_neighbours(pres);
        let (walls, edge_wall) = collect_walls(pres, &table);
        Ok(DavisBall { pres: pres.clone(), radius, table, dist, squares, walls, edge_wall })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complexes::build_odd;

    fn petersen() -> RacgPresentation {
        RacgPresentation::from_complex(build_odd(3).unwrap().complex())
    }

    fn two_commuting() -> RacgPresentation {
        RacgPresentation::from_complex(&FlagComplex::from_edges(vec!["a".into(), "b".into()], &[(0, 1)]))
    }

    #[test]
    fn normal_form_examples() {
        let p = two_commuting();
        assert!(p.normalize(&[0, 0]).unwrap().is_empty());
        assert_eq!(p.normalize(&[1, 0]).unwrap().word(), &[0, 1]);
        assert_eq!(p.normalize(&[0, 1, 0]).unwrap().word(), &[1]);
        assert!(p.normalize(&[2]).is_err());
    }

    #[test]
    fn free_group_ball_is_a_tree() {
        let m = 4;
        let ball = build_ball(&RacgPresentation::free(m), 3).unwrap();
        assert_eq!(ball.sphere_sizes(), vec![1, m, m * (m - 1), m * (m - 1) * (m - 1)]);
        assert!(ball.squares.is_empty());
    }

    #[test]
    fn petersen_growth() {
        let p = petersen();
        assert_eq!(p.growth_series(3), vec![1, 10, 75, 540]);
        let ball = build_ball(&p, 3).unwrap();
        assert_eq!(ball.sphere_sizes(), vec![1, 10, 75, 540]);
    }

    #[test]
    fn links_inside_ball_match_l() {
        let p = petersen();
        let ball = build_ball(&p, 3).unwrap();
        let l = p.defining_graph();
        for v in 0..ball.vertex_count() as u32 {
            // A square at v reaches graph distance dist(v) + 2.
            if (ball.dist[v as usize] as usize) + 2 <= ball.radius {
                assert_eq!(ball.link_at(v), l);
            }
        }
    }

    #[test]
    fn walls_agree_with_search() {
        let p = petersen();
        let ball = build_ball(&p, 3).unwrap();
        for w in 0..ball.walls.len() {
            let by_search = ball.wall_sides_by_search(w);
            for v in 0..ball.vertex_count() as u32 {
                assert_eq!(ball.wall_side(w, v).unwrap(), by_search[v as usize]);
            }
            let (a, b) = ball.walls[w].rep_edge;
            assert_ne!(by_search[a as usize], by_search[b as usize]);
        }
        for (u, v, s) in ball.edges() {
            assert_eq!(ball.walls[ball.edge_wall(u, s) as usize].label, s);
            let w = ball.edge_wall(u, s) as usize;
            assert_ne!(ball.wall_side(w, u).unwrap(), ball.wall_side(w, v).unwrap());
        }
    }

    #[test]
    fn squares_have_two_adjacent_walls() {
        let p = petersen();
        let ball = build_ball(&p, 3).unwrap();
        for sq in &ball.squares {
            let [a, b, c, d] = sq.corners;
            assert!(p.commutes(sq.labels.0, sq.labels.1));
            let walls: Vec<u32> = [(a, b), (b, c), (c, d), (d, a)]
                .iter()
                .map(|&(x, y)| {
                    let s = (0..p.rank() as u32).find(|&s| ball.table.neighbour(x, s) == y).unwrap();
                    ball.edge_wall(x, s)
                })
                .collect();
            assert_eq!(walls[0], walls[2]);
            assert_eq!(walls[1], walls[3]);
            assert_ne!(walls[0], walls[1]);
        }
    }

    #[test]
    fn cache_round_trip() {
        let p = petersen();
        let ball = build_ball(&p, 2).unwrap();
        let dir = std::env::temp_dir().join(format!("oddlattice-cache-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("o3.ball");
        ball.write_cache(&path).unwrap();
        let back = DavisBall::read_cache(&path, &p).unwrap();
        assert_eq!(back.sphere_sizes(), ball.sphere_sizes());
        assert_eq!(back.squares, ball.squares);
        assert!(DavisBall::read_cache(&path, &RacgPresentation::free(10)).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn cap_is_enforced() {
        assert!(matches!(
            build_ball_capped(&petersen(), 3, 100),
            Err(CoxeterError::TooLarge { estimate: 626, cap: 100 })
        ));
    }
}
