//! Finite permutations and a deterministic stabilizer-chain engine.
//!
//! Points are stored 0-based: point `i` here is the point `i + 1` of `[n]`.
//! Everything that leaves the process (cycle notation, JSON) is 1-based.
//!
//! ```
//! use oddlattice::perm::{Permutation, PermutationGroup};
//!
//! let p: Permutation = Permutation::parse_cycles("(1 2 3)", 5).unwrap();
//! let q = Permutation::parse_cycles("(3 4 5)", 5).unwrap();
//! let g = PermutationGroup::new(5, vec![p, q]).unwrap();
//! assert_eq!(g.order().to_string(), "60");
//! ```

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PermError {
    #[error("degree mismatch: {0} vs {1}")]
    DegreeMismatch(usize, usize),
    #[error("images do not form a bijection of [{0}]")]
    NotBijection(usize),
    #[error("cannot parse cycle notation {0:?}: {1}")]
    Parse(String, String),
    #[error("point {point} outside [{degree}]")]
    PointOutOfRange { point: usize, degree: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

/// A bijection of `{0, .., n-1}`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    images: Vec<u32>,
}

impl Permutation {
    pub fn identity(degree: usize) -> Self {
        Permutation { images: (0..degree as u32).collect() }
    }

    /// Builds from 0-based images, checking bijectivity.
    pub fn from_images(images: Vec<u32>) -> Result<Self, PermError> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &x in &images {
            let x = x as usize;
            if x >= n || seen[x] {
                return Err(PermError::NotBijection(n));
            }
            seen[x] = true;
        }
        Ok(Permutation { images })
    }

    /// Trusted constructor for internally generated image vectors.
    pub(crate) fn from_images_unchecked(images: Vec<u32>) -> Self {
        debug_assert!(Permutation::from_images(images.clone()).is_ok());
        Permutation { images }
    }

    /// Builds from 1-based cycles, e.g. `&[&[1, 2], &[3, 4]]`.
    pub fn from_cycles(degree: usize, cycles: &[&[usize]]) -> Result<Self, PermError> {
        let mut images: Vec<u32> = (0..degree as u32).collect();
        let mut touched = vec![false; degree];
        for cycle in cycles {
            for (k, &a) in cycle.iter().enumerate() {
                if a == 0 || a > degree {
                    return Err(PermError::PointOutOfRange { point: a, degree });
                }
                if touched[a - 1] {
                    return Err(PermError::NotBijection(degree));
                }
                touched[a - 1] = true;
                let b = cycle[(k + 1) % cycle.len()];
                if b == 0 || b > degree {
                    return Err(PermError::PointOutOfRange { point: b, degree });
                }
                images[a - 1] = (b - 1) as u32;
            }
        }
        Permutation::from_images(images)
    }

    /// Transposition of the 0-based points `a` and `b`.
    pub fn transposition(degree: usize, a: usize, b: usize) -> Self {
        let mut images: Vec<u32> = (0..degree as u32).collect();
        images.swap(a, b);
        Permutation { images }
    }

    /// Parses 1-based cycle notation such as `"(1 2)(3 4)"` or `"(1,2)"`.
    /// `"()"`, `"id"` and the empty string denote the identity.
    pub fn parse_cycles(text: &str, degree: usize) -> Result<Self, PermError> {
        let err = |m: &str| PermError::Parse(text.to_string(), m.to_string());
        let t = text.trim();
        if t.is_empty() || t == "id" || t == "()" {
            return Ok(Permutation::identity(degree));
        }
        let mut cycles: Vec<Vec<usize>> = Vec::new();
        let mut rest = t;
        while !rest.is_empty() {
            let open = rest.find('(').ok_or_else(|| err("expected '('"))?;
            if !rest[..open].trim().is_empty() {
                return Err(err("text between cycles"));
            }
            let close = rest.find(')').ok_or_else(|| err("unclosed cycle"))?;
            if close < open {
                return Err(err("unbalanced parentheses"));
            }
            let body = &rest[open + 1..close];
            let mut cycle = Vec::new();
            for tok in body.split(|c: char| c == ',' || c.is_whitespace()) {
                if tok.is_empty() {
                    continue;
                }
                let v: usize = tok.parse().map_err(|_| err("non-numeric point"))?;
                cycle.push(v);
            }
            if !cycle.is_empty() {
                cycles.push(cycle);
            }
            rest = rest[close + 1..].trim_start();
        }
        let refs: Vec<&[usize]> = cycles.iter().map(|c| c.as_slice()).collect();
        Permutation::from_cycles(degree, &refs)
    }

    pub fn degree(&self) -> usize {
        self.images.len()
    }

    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.images[i] as usize
    }

    pub fn images(&self) -> &[u32] {
        &self.images
    }

    /// `compose(p, q)(i) = p(q(i))`.
    pub fn compose(&self, q: &Permutation) -> Result<Permutation, PermError> {
        if self.degree() != q.degree() {
            return Err(PermError::DegreeMismatch(self.degree(), q.degree()));
        }
        Ok(self.compose_unchecked(q))
    }

    #[inline]
    pub(crate) fn compose_unchecked(&self, q: &Permutation) -> Permutation {
        Permutation { images: q.images.iter().map(|&j| self.images[j as usize]).collect() }
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0u32; self.images.len()];
        for (i, &j) in self.images.iter().enumerate() {
            inv[j as usize] = i as u32;
        }
        Permutation { images: inv }
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &j)| i as u32 == j)
    }

    pub fn is_involution(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &j)| self.images[j as usize] == i as u32)
    }

    /// 0-based moved points, ascending.
    pub fn support(&self) -> Vec<usize> {
        (0..self.degree()).filter(|&i| self.apply(i) != i).collect()
    }

    pub fn parity(&self) -> Parity {
        let n = self.degree();
        let mut seen = vec![false; n];
        let mut transpositions = 0usize;
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut len = 0;
            let mut x = start;
            while !seen[x] {
                seen[x] = true;
                x = self.apply(x);
                len += 1;
            }
            transpositions += len - 1;
        }
        if transpositions % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    /// Parity together with the 0-based support.
    pub fn parity_support(&self) -> (Parity, Vec<usize>) {
        (self.parity(), self.support())
    }

    /// Non-trivial cycles as 0-based point lists, each starting at its least point.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let n = self.degree();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] || self.apply(start) == start {
                continue;
            }
            let mut cyc = Vec::new();
            let mut x = start;
            while !seen[x] {
                seen[x] = true;
                cyc.push(x);
                x = self.apply(x);
            }
            out.push(cyc);
        }
        out
    }

    /// Order of the element.
    pub fn element_order(&self) -> BigUint {
        let mut acc = BigUint::one();
        for c in self.cycles() {
            let len = BigUint::from(c.len());
            let g = num_integer_gcd(&acc, &len);
            acc = acc * &len / g;
        }
        acc
    }

    /// Conjugates by relabelling points: `i ↦ images[i]` becomes `f(i) ↦ f(images[i])`.
    pub fn relabel(&self, f: &Permutation) -> Permutation {
        let mut images = vec![0u32; self.degree()];
        for i in 0..self.degree() {
            images[f.apply(i)] = f.apply(self.apply(i)) as u32;
        }
        Permutation { images }
    }

    /// Embeds into a larger degree, fixing the new points.
    pub fn extend_to(&self, degree: usize) -> Permutation {
        assert!(degree >= self.degree());
        let mut images = self.images.clone();
        images.extend(self.degree() as u32..degree as u32);
        Permutation { images }
    }
}

fn num_integer_gcd(a: &BigUint, b: &BigUint) -> BigUint {
    let (mut a, mut b) = (a.clone(), b.clone());
    while b != BigUint::from(0u32) {
        let r = &a % &b;
        a = b;
        b = r;
    }
    a
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cycles = self.cycles();
        if cycles.is_empty() {
            return write!(f, "()");
        }
        for c in cycles {
            write!(f, "(")?;
            for (k, x) in c.iter().enumerate() {
                if k > 0 {
                    write!(f, " ")?;
                }
                write!(f, "{}", x + 1)?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Permutation[{}]{}", self.degree(), self)
    }
}

#[derive(Serialize, Deserialize)]
struct PermutationJson {
    degree: usize,
    images: Vec<usize>,
}

impl Serialize for Permutation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PermutationJson {
            degree: self.degree(),
            images: self.images.iter().map(|&x| x as usize + 1).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Permutation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = PermutationJson::deserialize(d)?;
        if raw.images.len() != raw.degree {
            return Err(serde::de::Error::custom("images length differs from degree"));
        }
        let mut images = Vec::with_capacity(raw.degree);
        for x in raw.images {
            if x == 0 {
                return Err(serde::de::Error::custom("images are 1-based"));
            }
            images.push((x - 1) as u32);
        }
        Permutation::from_images(images).map_err(serde::de::Error::custom)
    }
}

/// A permutation stored by its moved points only. Used for automorphisms of
/// large balls whose support is small.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SparsePerm {
    degree: usize,
    moved: Vec<(u32, u32)>,
}

impl SparsePerm {
    pub fn identity(degree: usize) -> Self {
        SparsePerm { degree, moved: Vec::new() }
    }

    /// From `(point, image)` pairs; pairs with `point == image` are dropped.
    pub fn from_pairs(degree: usize, pairs: impl IntoIterator<Item = (u32, u32)>) -> Result<Self, PermError> {
        let map: BTreeMap<u32, u32> = pairs.into_iter().filter(|(a, b)| a != b).collect();
        let mut targets: Vec<u32> = map.values().copied().collect();
        targets.sort_unstable();
        let sources: Vec<u32> = map.keys().copied().collect();
        if targets != sources || sources.last().map_or(false, |&x| x as usize >= degree) {
            return Err(PermError::NotBijection(degree));
        }
        Ok(SparsePerm { degree, moved: map.into_iter().collect() })
    }

    pub fn from_dense(p: &Permutation) -> Self {
        SparsePerm {
            degree: p.degree(),
            moved: p
                .images
                .iter()
                .enumerate()
                .filter(|(i, &j)| *i as u32 != j)
                .map(|(i, &j)| (i as u32, j))
                .collect(),
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn apply(&self, i: usize) -> usize {
        match self.moved.binary_search_by_key(&(i as u32), |&(a, _)| a) {
            Ok(k) => self.moved[k].1 as usize,
            Err(_) => i,
        }
    }

    pub fn moved(&self) -> &[(u32, u32)] {
        &self.moved
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.moved.iter().map(|&(a, _)| a as usize)
    }

    pub fn is_identity(&self) -> bool {
        self.moved.is_empty()
    }

    pub fn to_dense(&self) -> Permutation {
        let mut images: Vec<u32> = (0..self.degree as u32).collect();
        for &(a, b) in &self.moved {
            images[a as usize] = b;
        }
        Permutation { images }
    }

    pub fn inverse(&self) -> SparsePerm {
        let mut moved: Vec<(u32, u32)> = self.moved.iter().map(|&(a, b)| (b, a)).collect();
        moved.sort_unstable();
        SparsePerm { degree: self.degree, moved }
    }

    /// `self ∘ q`.
    pub fn compose(&self, q: &SparsePerm) -> SparsePerm {
        let mut pts: Vec<u32> = self.support().chain(q.support()).map(|x| x as u32).collect();
        pts.sort_unstable();
        pts.dedup();
        let moved = pts
            .into_iter()
            .map(|x| (x, self.apply(q.apply(x as usize)) as u32))
            .filter(|(a, b)| a != b)
            .collect();
        SparsePerm { degree: self.degree, moved }
    }

    pub fn commutes_with(&self, q: &SparsePerm) -> bool {
        self.compose(q) == q.compose(self)
    }

    /// Restriction to an invariant point list, as a dense permutation of
    /// positions in `points`. `None` if `points` is not invariant.
    pub fn restrict(&self, points: &[u32]) -> Option<Permutation> {
        let index: BTreeMap<u32, u32> = points.iter().enumerate().map(|(k, &p)| (p, k as u32)).collect();
        let mut images = Vec::with_capacity(points.len());
        for &p in points {
            images.push(*index.get(&(self.apply(p as usize) as u32))?);
        }
        Permutation::from_images(images).ok()
    }
}

#[derive(Debug, Clone)]
struct Level {
    base: u32,
    gens: Vec<Permutation>,
    orbit: Vec<u32>,
    /// Position of a point in `orbit`, or `u32::MAX`.
    orbit_index: Vec<u32>,
    /// `reps[k]` maps `base` to `orbit[k]`.
    reps: Vec<Permutation>,
    reps_inv: Vec<Permutation>,
}

impl Level {
    fn new(base: u32, degree: usize) -> Self {
        let mut orbit_index = vec![u32::MAX; degree];
        orbit_index[base as usize] = 0;
        Level {
            base,
            gens: Vec::new(),
            orbit: vec![base],
            orbit_index,
            reps: vec![Permutation::identity(degree)],
            reps_inv: vec![Permutation::identity(degree)],
        }
    }
}

/// A permutation group with a base and strong generating set.
///
/// Base points are chosen as the least point moved by the generator that
/// opens a new level, after an optional prescribed prefix. Orbits are grown
/// breadth-first, so transversal representatives are reproducible.
#[derive(Debug, Clone)]
pub struct PermutationGroup {
    degree: usize,
    generators: Vec<Permutation>,
    levels: Vec<Level>,
    prefix: Vec<u32>,
    /// Known group order; sifting stops once the chain reaches it.
    target: Option<BigUint>,
}

impl PermutationGroup {
    pub fn new(degree: usize, generators: Vec<Permutation>) -> Result<Self, PermError> {
        Self::with_base_prefix(degree, generators, &[])
    }

    /// Builds the chain with `prefix` as the first base points. The subgroup at
    /// depth `prefix.len()` is then the pointwise stabilizer of the prefix.
    pub fn with_base_prefix(degree: usize, generators: Vec<Permutation>, prefix: &[usize]) -> Result<Self, PermError> {
        Self::build(degree, generators, prefix, None)
    }

    /// As [`PermutationGroup::with_base_prefix`] for a group whose order is
    /// already known. The chain is complete as soon as the product of its
    /// orbit lengths reaches `order`, since that product never exceeds the
    /// true order.
    pub fn with_known_order(
        degree: usize,
        generators: Vec<Permutation>,
        prefix: &[usize],
        order: BigUint,
    ) -> Result<Self, PermError> {
        Self::build(degree, generators, prefix, Some(order))
    }

    fn build(
        degree: usize,
        generators: Vec<Permutation>,
        prefix: &[usize],
        target: Option<BigUint>,
    ) -> Result<Self, PermError> {
        for g in &generators {
            if g.degree() != degree {
                return Err(PermError::DegreeMismatch(degree, g.degree()));
            }
        }
        for &p in prefix {
            if p >= degree {
                return Err(PermError::PointOutOfRange { point: p + 1, degree });
            }
        }
        let mut group = PermutationGroup {
            degree,
            generators: generators.clone(),
            levels: Vec::new(),
            prefix: prefix.iter().map(|&p| p as u32).collect(),
            target,
        };
        for g in generators {
            if group.complete() {
                break;
            }
            if !g.is_identity() && !group.contains(&g) {
                group.add_generator(0, g);
            }
        }
        Ok(group)
    }

    fn complete(&self) -> bool {
        self.target.as_ref().map_or(false, |t| self.order() == *t)
    }

    pub fn symmetric(degree: usize) -> Self {
        let mut gens = Vec::new();
        if degree >= 2 {
            gens.push(Permutation::transposition(degree, 0, 1));
            let cycle: Vec<u32> = (0..degree as u32).map(|i| (i + 1) % degree as u32).collect();
            gens.push(Permutation::from_images_unchecked(cycle));
        }
        PermutationGroup::new(degree, gens).expect("consistent degree")
    }

    pub fn alternating(degree: usize) -> Self {
        PermutationGroup::new(degree, alternating_generators(degree)).expect("consistent degree")
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn generators(&self) -> &[Permutation] {
        &self.generators
    }

    /// Base points, 0-based.
    pub fn base(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.base as usize).collect()
    }

    /// Orbit lengths along the chain.
    pub fn orbit_lengths(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.orbit.len()).collect()
    }

    pub fn strong_generators(&self) -> Vec<Permutation> {
        let mut all: Vec<Permutation> = self.levels.iter().flat_map(|l| l.gens.iter().cloned()).collect();
        all.sort();
        all.dedup();
        all
    }

    pub fn order(&self) -> BigUint {
        self.levels.iter().fold(BigUint::one(), |acc, l| acc * BigUint::from(l.orbit.len()))
    }

    pub fn is_trivial(&self) -> bool {
        self.levels.iter().all(|l| l.orbit.len() == 1)
    }

    pub fn contains(&self, g: &Permutation) -> bool {
        if g.degree() != self.degree {
            return false;
        }
        let (h, depth) = self.strip(g.clone(), 0);
        depth == self.levels.len() && h.is_identity()
    }

    /// Generators of the pointwise stabilizer of the first `depth` base points:
    /// every strong generator introduced at that level or below.
    pub fn stabilizer_generators(&self, depth: usize) -> Vec<Permutation> {
        let mut gens: Vec<Permutation> =
            self.levels.iter().skip(depth).flat_map(|l| l.gens.iter().cloned()).collect();
        gens.sort();
        gens.dedup();
        gens
    }

    /// Pointwise stabilizer of `points`, as a new group with its own chain.
    pub fn pointwise_stabilizer(&self, points: &[usize]) -> PermutationGroup {
        let gens = self.strong_generators();
        let moved: Vec<usize> = points.iter().copied().filter(|&p| gens.iter().any(|g| g.apply(p) != p)).collect();
        let rebased = PermutationGroup::with_known_order(self.degree, gens, &moved, self.order())
            .expect("points checked by caller");
        let order = rebased.levels.iter().skip(moved.len()).fold(BigUint::one(), |a, l| a * BigUint::from(l.orbit.len()));
        PermutationGroup::with_known_order(self.degree, rebased.stabilizer_generators(moved.len()), &[], order)
            .expect("same degree")
    }

    /// Orbit of a point under the generators, in breadth-first order.
    pub fn orbit(&self, point: usize) -> Vec<usize> {
        orbit_of(self.degree, &self.generators, point)
    }

    fn strip(&self, mut g: Permutation, from: usize) -> (Permutation, usize) {
        for t in from..self.levels.len() {
            let level = &self.levels[t];
            let p = g.apply(level.base as usize);
            let k = level.orbit_index[p];
            if k == u32::MAX {
                return (g, t);
            }
            if k != 0 {
                g = level.reps_inv[k as usize].compose_unchecked(&g);
            }
        }
        (g, self.levels.len())
    }

    fn choose_base(&self, depth: usize, g: &Permutation) -> u32 {
        if depth < self.prefix.len() {
            return self.prefix[depth];
        }
        (0..self.degree).find(|&i| g.apply(i) != i).map(|i| i as u32).unwrap_or(0)
    }

    fn add_generator(&mut self, depth: usize, g: Permutation) {
        if depth == self.levels.len() {
            let base = self.choose_base(depth, &g);
            self.levels.push(Level::new(base, self.degree));
        }
        self.levels[depth].gens.push(g.clone());
        let old_len = self.levels[depth].orbit.len();
        // Grow the orbit with every generator; new points get representatives.
        {
            let level = &mut self.levels[depth];
            let mut k = 0;
            while k < level.orbit.len() {
                let p = level.orbit[k] as usize;
                let gens_here: &[Permutation] =
                    if k < old_len { std::slice::from_ref(level.gens.last().unwrap()) } else { &level.gens[..] };
                let mut fresh = Vec::new();
                for s in gens_here {
                    let q = s.apply(p);
                    if level.orbit_index[q] == u32::MAX && !fresh.iter().any(|(x, _)| *x == q) {
                        fresh.push((q, s.compose_unchecked(&level.reps[k])));
                    }
                }
                for (q, rep) in fresh {
                    if level.orbit_index[q] == u32::MAX {
                        level.orbit_index[q] = level.orbit.len() as u32;
                        level.orbit.push(q as u32);
                        level.reps_inv.push(rep.inverse());
                        level.reps.push(rep);
                    }
                }
                k += 1;
            }
        }
        // Schreier generators: old points with the new generator, new points with all.
        let orbit_len = self.levels[depth].orbit.len();
        for k in 0..orbit_len {
            if self.complete() {
                return;
            }
            let ngens = self.levels[depth].gens.len();
            let range = if k < old_len { ngens - 1..ngens } else { 0..ngens };
            for si in range {
                let sch = {
                    let level = &self.levels[depth];
                    let s = &level.gens[si];
                    let q = s.apply(level.orbit[k] as usize);
                    let qk = level.orbit_index[q] as usize;
                    let su = if k == 0 { s.clone() } else { s.compose_unchecked(&level.reps[k]) };
                    if qk == 0 {
                        su
                    } else {
                        level.reps_inv[qk].compose_unchecked(&su)
                    }
                };
                if sch.is_identity() {
                    continue;
                }
                let (h, reached) = self.strip(sch, depth + 1);
                if reached == self.levels.len() && h.is_identity() {
                    continue;
                }
                self.add_generator(depth + 1, h);
            }
        }
    }
}

/// Breadth-first orbit of `point` under `gens`.
pub fn orbit_of(degree: usize, gens: &[Permutation], point: usize) -> Vec<usize> {
    let mut seen = vec![false; degree];
    let mut out = vec![point];
    seen[point] = true;
    let mut k = 0;
    while k < out.len() {
        let p = out[k];
        for g in gens {
            let q = g.apply(p);
            if !seen[q] {
                seen[q] = true;
                out.push(q);
            }
        }
        k += 1;
    }
    out
}

/// Standard generators of `Alt_n`: the 3-cycles `(1 2 i)` for `i ≥ 3`.
pub fn alternating_generators(n: usize) -> Vec<Permutation> {
    (2..n).map(|i| Permutation::from_cycles(n, &[&[1, 2, i + 1]]).expect("valid cycle")).collect()
}

pub fn factorial(n: usize) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, k| acc * BigUint::from(k))
}

/// `|Alt_n|`, taking `Alt_0 = Alt_1 = 1`.
pub fn alternating_order(n: usize) -> BigUint {
    if n < 2 {
        BigUint::one()
    } else {
        factorial(n) / BigUint::from(2u32)
    }
}

pub fn group_order(degree: usize, gens: &[Permutation]) -> Result<BigUint, PermError> {
    Ok(PermutationGroup::new(degree, gens.to_vec())?.order())
}

/// True iff `⟨gens⟩ = Alt_n`: every generator is even and the order is `n!/2`.
pub fn equals_alternating(gens: &[Permutation], n: usize) -> Result<bool, PermError> {
    if gens.iter().any(|g| g.parity() == Parity::Odd) {
        return Ok(false);
    }
    Ok(group_order(n, gens)? == alternating_order(n))
}

/// True iff `⟨gens⟩ = Sym_n`.
pub fn equals_symmetric(gens: &[Permutation], n: usize) -> Result<bool, PermError> {
    Ok(group_order(n, gens)? == factorial(n))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Primitivity {
    Primitive,
    /// A non-trivial invariant partition, blocks as sorted 0-based point lists.
    Imprimitive { blocks: Vec<Vec<usize>> },
    /// The orbit of point 0, which is a proper subset of the domain.
    Intransitive { orbit: Vec<usize> },
}

impl Primitivity {
    pub fn is_primitive(&self) -> bool {
        matches!(self, Primitivity::Primitive)
    }
}

/// Primitivity test by minimal block systems: for each `b ≠ 0` the finest
/// invariant partition joining `0` and `b` is computed with a union-find.
pub fn is_primitive(gens: &[Permutation], domain_size: usize) -> Result<Primitivity, PermError> {
    for g in gens {
        if g.degree() != domain_size {
            return Err(PermError::DegreeMismatch(domain_size, g.degree()));
        }
    }
    if domain_size <= 1 {
        return Ok(Primitivity::Primitive);
    }
    let mut orbit = orbit_of(domain_size, gens, 0);
    if orbit.len() < domain_size {
        orbit.sort_unstable();
        return Ok(Primitivity::Intransitive { orbit });
    }
    for b in 1..domain_size {
        let blocks = minimal_block(gens, domain_size, b);
        if blocks.len() > 1 {
            return Ok(Primitivity::Imprimitive { blocks });
        }
    }
    Ok(Primitivity::Primitive)
}

fn minimal_block(gens: &[Permutation], n: usize, b: usize) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut queue = vec![(0usize, b)];
    while let Some((x, y)) = queue.pop() {
        let (rx, ry) = (find(&mut parent, x), find(&mut parent, y));
        if rx == ry {
            continue;
        }
        parent[rx.max(ry)] = rx.min(ry);
        for g in gens {
            queue.push((g.apply(x), g.apply(y)));
        }
    }
    let mut classes: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for x in 0..n {
        let r = find(&mut parent, x);
        classes.entry(r).or_default().push(x);
    }
    classes.into_values().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str, n: usize) -> Permutation {
        Permutation::parse_cycles(s, n).unwrap()
    }

    #[test]
    fn compose_is_right_to_left() {
        let a = p("(1 2)(3 4)", 4);
        let b = p("(2 3)", 4);
        let c = a.compose(&b).unwrap();
        for i in 0..4 {
            assert_eq!(c.apply(i), a.apply(b.apply(i)));
        }
        assert_eq!(c.to_string(), "(1 2 4 3)");
        assert!(p("(1 2)", 2).compose(&p("(1 2)", 2)).unwrap().is_identity());
        assert!(a.compose(&Permutation::identity(5)).is_err());
    }

    #[test]
    fn parity_and_support() {
        assert_eq!(Permutation::identity(4).parity_support(), (Parity::Even, vec![]));
        assert_eq!(p("(1 2)(3 4)", 4).parity_support(), (Parity::Even, vec![0, 1, 2, 3]));
        assert_eq!(p("(1 2 3 4)", 4).parity(), Parity::Odd);
    }

    #[test]
    fn cycle_notation_round_trip() {
        let q = p("(1,3,5)(2 4)", 6);
        assert_eq!(q.to_string(), "(1 3 5)(2 4)");
        assert_eq!(p(&q.to_string(), 6), q);
        assert!(Permutation::parse_cycles("(1 2", 3).is_err());
        assert!(Permutation::parse_cycles("(1 7)", 3).is_err());
        assert!(Permutation::parse_cycles("(1 2)(2 3)", 3).is_err());
        assert_eq!(p("()", 3), Permutation::identity(3));
    }

    #[test]
    fn json_is_one_based() {
        let q = p("(1 2)", 3);
        let s = serde_json::to_string(&q).unwrap();
        assert_eq!(s, r#"{"degree":3,"images":[2,1,3]}"#);
        let back: Permutation = serde_json::from_str(&s).unwrap();
        assert_eq!(back, q);
        assert!(serde_json::from_str::<Permutation>(r#"{"degree":2,"images":[1,1]}"#).is_err());
    }

    #[test]
    fn small_orders() {
        assert_eq!(group_order(3, &[p("(1 2)", 3), p("(1 2 3)", 3)]).unwrap(), BigUint::from(6u32));
        assert_eq!(group_order(3, &[]).unwrap(), BigUint::from(1u32));
        assert!(equals_alternating(&[p("(1 2 3)", 5), p("(3 4 5)", 5)], 5).unwrap());
        assert!(!equals_alternating(&[p("(1 2)", 2)], 2).unwrap());
        assert!(equals_symmetric(&[p("(1 2)", 2)], 2).unwrap());
        assert_eq!(PermutationGroup::symmetric(7).order(), factorial(7));
        assert_eq!(PermutationGroup::alternating(9).order(), alternating_order(9));
    }

    #[test]
    fn membership_and_stabilizers() {
        let g = PermutationGroup::symmetric(5);
        assert!(g.contains(&p("(1 5)(2 3)", 5)));
        let a = PermutationGroup::alternating(5);
        assert!(!a.contains(&p("(1 2)", 5)));
        let st = g.pointwise_stabilizer(&[0, 1]);
        assert_eq!(st.order(), BigUint::from(6u32));
        for s in st.generators() {
            assert_eq!(s.apply(0), 0);
            assert_eq!(s.apply(1), 1);
        }
    }

    #[test]
    fn primitivity_examples() {
        let c4 = [p("(1 2 3 4)", 4)];
        assert_eq!(is_primitive(&c4, 4).unwrap(), Primitivity::Imprimitive { blocks: vec![vec![0, 2], vec![1, 3]] });
        assert!(is_primitive(&[p("(1 2)", 2)], 2).unwrap().is_primitive());
        assert!(matches!(is_primitive(&[p("(1 2)", 3)], 3).unwrap(), Primitivity::Intransitive { .. }));
    }

    #[test]
    fn sparse_matches_dense() {
        let a = p("(1 5 9)(2 3)", 10);
        let b = p("(3 4)(9 10)", 10);
        let (sa, sb) = (SparsePerm::from_dense(&a), SparsePerm::from_dense(&b));
        assert_eq!(sa.compose(&sb).to_dense(), a.compose(&b).unwrap());
        assert_eq!(sa.inverse().to_dense(), a.inverse());
        assert_eq!(sa.restrict(&[0, 4, 8]).unwrap(), p("(1 2 3)", 3));
        assert!(sa.restrict(&[0, 1]).is_none());
    }
}
