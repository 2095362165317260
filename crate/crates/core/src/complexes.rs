//! Odd graphs, flag complexes, joins, girth, fixators and superstar-transitivity.
//!
//! A vertex of `O_d` is a `(d-1)`-subset of `[2d-1]`, stored as a bit set
//! where bit `i` is the point `i + 1`. Vertices are listed in colex order.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::perm::{factorial, PermError, Permutation, PermutationGroup};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ComplexError {
    #[error("parameter d = {0} unsupported (need 2 <= d <= 32)")]
    BadParameter(usize),
    #[error("brute force over Sym_{0} is limited to d <= 4; use chain mode")]
    BruteForceTooLarge(usize),
    #[error("complex with {0} vertices is too large for automorphism enumeration")]
    TooLarge(usize),
    #[error("{0} is not a vertex of O_{1}")]
    NotAVertex(String, usize),
    #[error("{0} and {1} are not adjacent")]
    NotAnEdge(String, String),
    #[error(transparent)]
    Perm(#[from] PermError),
}

/// A subset of `[2d-1]`; bit `i` stands for the point `i + 1`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SubsetVertex {
    bits: u64,
}

impl SubsetVertex {
    pub fn from_bits(bits: u64) -> Self {
        SubsetVertex { bits }
    }

    /// From 0-based points.
    pub fn from_points(points: &[usize]) -> Self {
        SubsetVertex { bits: points.iter().fold(0u64, |b, &p| b | (1u64 << p)) }
    }

    /// From 1-based elements of `[2d-1]`.
    pub fn from_elements(elements: &[usize]) -> Self {
        SubsetVertex { bits: elements.iter().fold(0u64, |b, &e| b | (1u64 << (e - 1))) }
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    pub fn contains(&self, point: usize) -> bool {
        self.bits >> point & 1 == 1
    }

    /// 0-based points, ascending.
    pub fn points(&self) -> Vec<usize> {
        (0..64).filter(|&i| self.contains(i)).collect()
    }

    /// 1-based elements, ascending.
    pub fn elements(&self) -> Vec<usize> {
        self.points().into_iter().map(|p| p + 1).collect()
    }

    pub fn is_disjoint(&self, other: &SubsetVertex) -> bool {
        self.bits & other.bits == 0
    }

    pub fn union(&self, other: &SubsetVertex) -> SubsetVertex {
        SubsetVertex { bits: self.bits | other.bits }
    }

    pub fn intersection(&self, other: &SubsetVertex) -> SubsetVertex {
        SubsetVertex { bits: self.bits & other.bits }
    }

    /// Complement inside `[ell]`.
    pub fn complement(&self, ell: usize) -> SubsetVertex {
        SubsetVertex { bits: !self.bits & ((1u64 << ell) - 1) }
    }

    /// Image under a permutation of `[ell]`.
    pub fn permute(&self, p: &Permutation) -> SubsetVertex {
        let mut bits = 0u64;
        let mut b = self.bits;
        while b != 0 {
            let i = b.trailing_zeros() as usize;
            bits |= 1u64 << p.apply(i);
            b &= b - 1;
        }
        SubsetVertex { bits }
    }
}

impl fmt::Display for SubsetVertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.elements().iter().map(|e| e.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

impl fmt::Debug for SubsetVertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A flag simplicial complex, stored as its 1-skeleton.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlagComplex {
    labels: Vec<String>,
    adj: Vec<Vec<u32>>,
}

impl FlagComplex {
    pub fn new(labels: Vec<String>) -> Self {
        let n = labels.len();
        FlagComplex { labels, adj: vec![Vec::new(); n] }
    }

    /// `n` isolated vertices labelled `z1..zn`.
    pub fn discrete(n: usize, prefix: &str) -> Self {
        FlagComplex::new((1..=n).map(|i| format!("{prefix}{i}")).collect())
    }

    pub fn from_edges(labels: Vec<String>, edges: &[(usize, usize)]) -> Self {
        let mut k = FlagComplex::new(labels);
        for &(a, b) in edges {
            k.add_edge(a, b);
        }
        k
    }

    pub fn path(n: usize) -> Self {
        let edges: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
        FlagComplex::from_edges((1..=n).map(|i| format!("p{i}")).collect(), &edges)
    }

    pub fn cycle(n: usize) -> Self {
        let edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        FlagComplex::from_edges((1..=n).map(|i| format!("c{i}")).collect(), &edges)
    }

    pub fn add_edge(&mut self, a: usize, b: usize) {
        assert_ne!(a, b, "loops are not simplices");
        if let Err(pos) = self.adj[a].binary_search(&(b as u32)) {
            self.adj[a].insert(pos, b as u32);
            let pos = self.adj[b].binary_search(&(a as u32)).unwrap_err();
            self.adj[b].insert(pos, a as u32);
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(|a| a.len()).sum::<usize>() / 2
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, v: usize) -> &str {
        &self.labels[v]
    }

    pub fn neighbours(&self, v: usize) -> &[u32] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a].binary_search(&(b as u32)).is_ok()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (a, nb) in self.adj.iter().enumerate() {
            for &b in nb {
                if a < b as usize {
                    out.push((a, b as usize));
                }
            }
        }
        out
    }

    /// All non-empty simplices (cliques), each sorted, in lexicographic order.
    pub fn simplices(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut cur = Vec::new();
        for v in 0..self.vertex_count() {
            cur.push(v);
            self.extend_cliques(&mut cur, &mut out);
            cur.pop();
        }
        out.sort();
        out
    }

    fn extend_cliques(&self, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        out.push(cur.clone());
        let last = *cur.last().unwrap();
        for &w in &self.adj[last] {
            let w = w as usize;
            if w > last && cur.iter().all(|&u| self.has_edge(u, w)) {
                cur.push(w);
                self.extend_cliques(cur, out);
                cur.pop();
            }
        }
    }

    /// Maximal simplices of the flag closure.
    pub fn maximal_simplices(&self) -> Vec<Vec<usize>> {
        let all = self.simplices();
        let mut out: Vec<Vec<usize>> = all
            .iter()
            .filter(|s| {
                !(0..self.vertex_count()).any(|w| !s.contains(&w) && s.iter().all(|&u| self.has_edge(u, w)))
            })
            .cloned()
            .collect();
        out.sort();
        out
    }

    pub fn dimension(&self) -> Option<usize> {
        self.maximal_simplices().iter().map(|s| s.len() - 1).max()
    }

    /// True iff every 3-clique of the 1-skeleton is absent; then the flag
    /// complex is the graph itself.
    pub fn is_triangle_free(&self) -> bool {
        self.edges().iter().all(|&(a, b)| {
            let (na, nb) = (&self.adj[a], &self.adj[b]);
            !na.iter().any(|x| nb.binary_search(x).is_ok())
        })
    }

    /// Induced subcomplex on `vertices` (in the given order).
    pub fn induced(&self, vertices: &[usize]) -> FlagComplex {
        let pos: HashMap<usize, usize> = vertices.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let mut k = FlagComplex::new(vertices.iter().map(|&v| self.labels[v].clone()).collect());
        for (i, &v) in vertices.iter().enumerate() {
            for &w in &self.adj[v] {
                if let Some(&j) = pos.get(&(w as usize)) {
                    if i < j {
                        k.add_edge(i, j);
                    }
                }
            }
        }
        k
    }

    /// Closed neighbourhood `N_1(σ)`: the vertices of σ and all their neighbours, sorted.
    pub fn closed_neighbourhood(&self, sigma: &[usize]) -> Vec<usize> {
        let mut set: Vec<usize> = sigma.to_vec();
        for &v in sigma {
            set.extend(self.adj[v].iter().map(|&w| w as usize));
        }
        set.sort_unstable();
        set.dedup();
        set
    }

    pub fn is_automorphism(&self, images: &[usize]) -> bool {
        let n = self.vertex_count();
        if images.len() != n {
            return false;
        }
        let mut seen = vec![false; n];
        for &x in images {
            if x >= n || seen[x] {
                return false;
            }
            seen[x] = true;
        }
        self.edges().iter().all(|&(a, b)| self.has_edge(images[a], images[b]))
    }

    pub fn to_dot(&self, name: &str) -> String {
        let mut s = format!("graph {name} {{\n");
        for (i, l) in self.labels.iter().enumerate() {
            s.push_str(&format!("  v{i} [label=\"{l}\"];\n"));
        }
        for (a, b) in self.edges() {
            s.push_str(&format!("  v{a} -- v{b};\n"));
        }
        s.push_str("}\n");
        s
    }
}

/// The join: disjoint union plus every cross edge. Labels of the second
/// factor are kept; collisions get a `'` suffix.
pub fn join(k1: &FlagComplex, k2: &FlagComplex) -> FlagComplex {
    let n1 = k1.vertex_count();
    let existing: HashSet<&String> = k1.labels.iter().collect();
    let mut labels = k1.labels.clone();
    for l in &k2.labels {
        let mut l = l.clone();
        while existing.contains(&l) {
            l.push('\'');
        }
        labels.push(l);
    }
    let mut k = FlagComplex::new(labels);
    for (a, b) in k1.edges() {
        k.add_edge(a, b);
    }
    for (a, b) in k2.edges() {
        k.add_edge(n1 + a, n1 + b);
    }
    for a in 0..n1 {
        for b in 0..k2.vertex_count() {
            k.add_edge(a, n1 + b);
        }
    }
    k
}

/// The Odd graph `O_d` with its subset labelling.
#[derive(Clone, Debug)]
pub struct OddGraph {
    d: usize,
    vertices: Vec<SubsetVertex>,
    index: HashMap<u64, u32>,
    complex: FlagComplex,
}

/// All `k`-subsets of `[ell]` in colex order.
pub fn subsets_colex(ell: usize, k: usize) -> Vec<SubsetVertex> {
    let mut out = Vec::new();
    if k > ell {
        return out;
    }
    if k == 0 {
        out.push(SubsetVertex::from_bits(0));
        return out;
    }
    // Gosper's hack walks k-subsets in increasing integer order, which is colex.
    let mut x: u64 = (1u64 << k) - 1;
    let limit = 1u64 << ell;
    while x < limit {
        out.push(SubsetVertex::from_bits(x));
        let c = x & x.wrapping_neg();
        let r = x + c;
        x = (((r ^ x) >> 2) / c) | r;
    }
    out
}

pub fn build_odd(d: usize) -> Result<OddGraph, ComplexError> {
    if !(2..=32).contains(&d) {
        return Err(ComplexError::BadParameter(d));
    }
    let ell = 2 * d - 1;
    let vertices = subsets_colex(ell, d - 1);
    let index: HashMap<u64, u32> = vertices.iter().enumerate().map(|(i, v)| (v.bits(), i as u32)).collect();
    let labels = vertices.iter().map(|v| v.to_string()).collect();
    let mut adj = vec![Vec::new(); vertices.len()];
    let full = (1u64 << ell) - 1;
    for (i, v) in vertices.iter().enumerate() {
        // Neighbours of A are the (d-1)-subsets of the d-element complement.
        let comp = !v.bits() & full;
        let mut b = comp;
        while b != 0 {
            let drop = b & b.wrapping_neg();
            let w = comp & !drop;
            adj[i].push(index[&w]);
            b &= b - 1;
        }
        adj[i].sort_unstable();
    }
    let complex = FlagComplex { labels, adj };
    Ok(OddGraph { d, vertices, index, complex })
}

impl OddGraph {
    pub fn d(&self) -> usize {
        self.d
    }

    /// `2d - 1`.
    pub fn ell(&self) -> usize {
        2 * self.d - 1
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[SubsetVertex] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> SubsetVertex {
        self.vertices[i]
    }

    pub fn index_of(&self, v: &SubsetVertex) -> Option<usize> {
        self.index.get(&v.bits()).map(|&i| i as usize)
    }

    pub fn complex(&self) -> &FlagComplex {
        &self.complex
    }

    pub fn neighbours(&self, i: usize) -> &[u32] {
        self.complex.neighbours(i)
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.vertices[a].is_disjoint(&self.vertices[b])
    }

    /// The action of a permutation of `[2d-1]` on vertex indices.
    pub fn vertex_permutation(&self, p: &Permutation) -> Permutation {
        let images = self.vertices.iter().map(|v| self.index[&v.permute(p).bits()]).collect();
        Permutation::from_images_unchecked(images)
    }

    /// The unique point of `[2d-1]` outside `A ∪ B` for an edge `{A, B}`.
    pub fn odd_one_out(&self, a: usize, b: usize) -> Option<usize> {
        let u = self.vertices[a].union(&self.vertices[b]).complement(self.ell());
        (self.has_edge(a, b) && u.len() == 1).then(|| u.points()[0])
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "d": self.d,
            "vertices": self.vertices.iter().map(|v| v.elements()).collect::<Vec<_>>(),
            "edges": self.complex.edges().iter().map(|&(a, b)| [a + 1, b + 1]).collect::<Vec<_>>(),
        })
    }

    pub fn parse_vertex(&self, text: &str) -> Result<usize, ComplexError> {
        let elements: Vec<usize> = text
            .trim_matches(|c| c == '{' || c == '}')
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| ComplexError::NotAVertex(text.to_string(), self.d))?;
        if elements.iter().any(|&e| e == 0 || e > self.ell()) {
            return Err(ComplexError::NotAVertex(text.to_string(), self.d));
        }
        let v = SubsetVertex::from_elements(&elements);
        self.index_of(&v).ok_or_else(|| ComplexError::NotAVertex(text.to_string(), self.d))
    }
}

/// Shortest cycle length by BFS from every vertex; `None` for forests.
pub fn girth(g: &FlagComplex) -> Option<usize> {
    let n = g.vertex_count();
    let mut best: Option<usize> = None;
    let mut dist = vec![u32::MAX; n];
    let mut parent = vec![u32::MAX; n];
    for s in 0..n {
        dist.iter_mut().for_each(|x| *x = u32::MAX);
        dist[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            if let Some(b) = best {
                if 2 * dist[u] as usize + 1 >= b {
                    break;
                }
            }
            for &w in g.neighbours(u) {
                let w = w as usize;
                if dist[w] == u32::MAX {
                    dist[w] = dist[u] + 1;
                    parent[w] = u as u32;
                    queue.push_back(w);
                } else if parent[u] != w as u32 {
                    let len = (dist[u] + dist[w] + 1) as usize;
                    best = Some(best.map_or(len, |b| b.min(len)));
                }
            }
        }
    }
    best
}

/// Backtracking enumeration of isomorphisms `a → b` extending `forced`.
/// The callback receives the image vector and returns `false` to stop.
pub fn for_each_isomorphism(
    a: &FlagComplex,
    b: &FlagComplex,
    forced: &[(usize, usize)],
    mut visit: impl FnMut(&[usize]) -> bool,
) {
    let n = a.vertex_count();
    if n != b.vertex_count() || a.edge_count() != b.edge_count() {
        return;
    }
    // Order: forced vertices first, then breadth-first so most vertices have
    // an already-placed neighbour that narrows their candidates.
    let mut order: Vec<usize> = Vec::with_capacity(n);
    let mut placed = vec![false; n];
    for &(x, _) in forced {
        if !placed[x] {
            placed[x] = true;
            order.push(x);
        }
    }
    let mut head = 0;
    loop {
        while head < order.len() {
            let u = order[head];
            head += 1;
            for &w in a.neighbours(u) {
                if !placed[w as usize] {
                    placed[w as usize] = true;
                    order.push(w as usize);
                }
            }
        }
        match (0..n).find(|&v| !placed[v]) {
            Some(v) => {
                placed[v] = true;
                order.push(v);
            }
            None => break,
        }
    }
    let forced_map: HashMap<usize, usize> = forced.iter().copied().collect();
    let mut img = vec![usize::MAX; n];
    let mut used = vec![false; n];
    let mut stop = false;
    fn rec(
        k: usize,
        order: &[usize],
        a: &FlagComplex,
        b: &FlagComplex,
        forced: &HashMap<usize, usize>,
        img: &mut Vec<usize>,
        used: &mut Vec<bool>,
        stop: &mut bool,
        visit: &mut dyn FnMut(&[usize]) -> bool,
    ) {
        if *stop {
            return;
        }
        if k == order.len() {
            if !visit(img) {
                *stop = true;
            }
            return;
        }
        let u = order[k];
        let candidates: Vec<usize> = if let Some(&t) = forced.get(&u) {
            vec![t]
        } else if let Some(&p) = a.neighbours(u).iter().find(|&&p| img[p as usize] != usize::MAX) {
            b.neighbours(img[p as usize]).iter().map(|&x| x as usize).collect()
        } else {
            (0..b.vertex_count()).collect()
        };
        for t in candidates {
            if used[t] || a.degree(u) != b.degree(t) {
                continue;
            }
            let ok = order[..k].iter().all(|&w| a.has_edge(u, w) == b.has_edge(t, img[w]));
            if !ok {
                continue;
            }
            img[u] = t;
            used[t] = true;
            rec(k + 1, order, a, b, forced, img, used, stop, visit);
            used[t] = false;
            img[u] = usize::MAX;
            if *stop {
                return;
            }
        }
    }
    rec(0, &order, a, b, &forced_map, &mut img, &mut used, &mut stop, &mut visit);
}

/// All automorphisms of a small complex, as image vectors.
pub fn automorphisms(k: &FlagComplex) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for_each_isomorphism(k, k, &[], |img| {
        out.push(img.to_vec());
        true
    });
    out.sort();
    out
}

pub fn automorphism_count(k: &FlagComplex) -> usize {
    let mut count = 0;
    for_each_isomorphism(k, k, &[], |_| {
        count += 1;
        true
    });
    count
}

/// A subcomplex of `O_d` whose fixator or stabilizer is requested.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FixTarget {
    /// Setwise stabilizer of a vertex.
    Vertex { a: SubsetVertex },
    /// Pointwise fixator of the two endpoints of an edge.
    Edge { a: SubsetVertex, b: SubsetVertex },
    /// Pointwise fixator of the closed neighbourhood of a vertex.
    Star { a: SubsetVertex },
    /// Pointwise fixator of the closed neighbourhood of an edge.
    EdgeStar { a: SubsetVertex, b: SubsetVertex },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixMode {
    BruteForce,
    Chain,
}

#[derive(Clone, Debug)]
pub struct FixatorReport {
    pub d: usize,
    pub target: FixTarget,
    pub mode: FixMode,
    /// The subgroup of `Sym_{2d-1}`.
    pub group: PermutationGroup,
    pub order: BigUint,
    /// Number of satisfying elements seen by brute force.
    pub enumerated: Option<usize>,
}

impl FixatorReport {
    /// The order predicted by the closed forms for the four cases.
    pub fn predicted_order(&self) -> BigUint {
        let d = self.d;
        match self.target {
            FixTarget::Vertex { .. } => factorial(d - 1) * factorial(d),
            FixTarget::Edge { .. } => factorial(d - 1) * factorial(d - 1),
            FixTarget::Star { .. } => factorial(d - 1),
            FixTarget::EdgeStar { .. } => BigUint::from(1u32),
        }
    }
}

fn target_vertex_set(odd: &OddGraph, target: &FixTarget) -> Result<Vec<usize>, ComplexError> {
    let idx = |v: &SubsetVertex| odd.index_of(v).ok_or_else(|| ComplexError::NotAVertex(v.to_string(), odd.d()));
    let edge = |a: &SubsetVertex, b: &SubsetVertex| -> Result<(usize, usize), ComplexError> {
        let (i, j) = (idx(a)?, idx(b)?);
        if !odd.has_edge(i, j) {
            return Err(ComplexError::NotAnEdge(a.to_string(), b.to_string()));
        }
        Ok((i, j))
    };
    Ok(match target {
        FixTarget::Vertex { a } | FixTarget::Star { a } => {
            let i = idx(a)?;
            if matches!(target, FixTarget::Star { .. }) {
                odd.complex().closed_neighbourhood(&[i])
            } else {
                vec![i]
            }
        }
        FixTarget::Edge { a, b } => {
            let (i, j) = edge(a, b)?;
            vec![i, j]
        }
        FixTarget::EdgeStar { a, b } => {
            let (i, j) = edge(a, b)?;
            odd.complex().closed_neighbourhood(&[i, j])
        }
    })
}

fn satisfies(odd: &OddGraph, target: &FixTarget, set: &[usize], p: &Permutation) -> bool {
    match target {
        FixTarget::Vertex { a } => a.permute(p) == *a,
        _ => set.iter().all(|&i| odd.vertex(i).permute(p) == odd.vertex(i)),
    }
}

/// The subgroup of `Aut(O_d) = Sym_{2d-1}` stabilizing or fixing `target`.
///
/// Brute force runs over all of `Sym_{2d-1}` and is limited to `d <= 4`.
/// Chain mode acts on `[2d-1] ⊔ V(O_d)` and reads the fixator off a
/// stabilizer chain whose base starts with the target vertices.
pub fn fixator_report(d: usize, target: &FixTarget, mode: FixMode) -> Result<FixatorReport, ComplexError> {
    let odd = build_odd(d)?;
    let set = target_vertex_set(&odd, target)?;
    let ell = odd.ell();
    let mut enumerated = None;
    let group = match mode {
        FixMode::BruteForce => {
            if d > 4 {
                return Err(ComplexError::BruteForceTooLarge(2 * d - 1));
            }
            let mut gens = Vec::new();
            let mut running = PermutationGroup::new(ell, vec![])?;
            let mut count = 0usize;
            for_each_permutation(ell, |p| {
                if satisfies(&odd, target, &set, p) {
                    count += 1;
                    if !running.contains(p) {
                        gens.push(p.clone());
                        running = PermutationGroup::new(ell, gens.clone()).expect("degree");
                    }
                }
            });
            enumerated = Some(count);
            running
        }
        FixMode::Chain => {
            let nv = odd.vertex_count();
            let combined = |p: &Permutation| {
                let vp = odd.vertex_permutation(p);
                let mut images: Vec<u32> = p.images().to_vec();
                images.extend(vp.images().iter().map(|&x| x + ell as u32));
                Permutation::from_images_unchecked(images)
            };
            let sym = PermutationGroup::symmetric(ell);
            let gens: Vec<Permutation> = sym.generators().iter().map(combined).collect();
            let stab_gens = match target {
                FixTarget::Vertex { a } => {
                    // Setwise stabilizer of A is the stabilizer of the vertex A.
                    let i = odd.index_of(a).expect("checked");
                    let chain = PermutationGroup::with_base_prefix(ell + nv, gens, &[ell + i])?;
                    chain.stabilizer_generators(1)
                }
                _ => {
                    let prefix: Vec<usize> = set.iter().map(|&i| ell + i).collect();
                    let chain = PermutationGroup::with_base_prefix(ell + nv, gens, &prefix)?;
                    chain.stabilizer_generators(prefix.len())
                }
            };
            let restricted: Vec<Permutation> = stab_gens
                .iter()
                .map(|g| Permutation::from_images_unchecked(g.images()[..ell].to_vec()))
                .collect();
            PermutationGroup::new(ell, restricted)?
        }
    };
    let order = group.order();
    Ok(FixatorReport { d, target: target.clone(), mode, group, order, enumerated })
}

/// Visits every permutation of `[n]` (Heap's algorithm).
pub fn for_each_permutation(n: usize, mut visit: impl FnMut(&Permutation)) {
    let mut a: Vec<u32> = (0..n as u32).collect();
    let mut c = vec![0usize; n];
    visit(&Permutation::from_images_unchecked(a.clone()));
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            visit(&Permutation::from_images_unchecked(a.clone()));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// A star isomorphism that does not extend to a global automorphism.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SuperstarWitness {
    /// 1 for the vertex-to-vertex case, 2 for the identity-on-σ case.
    pub case: u8,
    pub sigma: Vec<String>,
    pub sigma_prime: Vec<String>,
    /// The isomorphism `N_1(σ) → N_1(σ')` as label pairs.
    pub map: Vec<(String, String)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuperstarReport {
    pub holds: bool,
    pub automorphisms: usize,
    pub vertex_pairs_checked: usize,
    pub simplices_checked: usize,
    pub witness: Option<SuperstarWitness>,
}

pub const SUPERSTAR_VERTEX_LIMIT: usize = 40;

/// Superstar-transitivity through its two-case reduction: isomorphisms of
/// closed vertex neighbourhoods, and automorphisms of `N_1(σ)` fixing σ
/// pointwise, must all be restrictions of automorphisms of `K`.
pub fn is_superstar_transitive(k: &FlagComplex) -> Result<SuperstarReport, ComplexError> {
    if k.vertex_count() > SUPERSTAR_VERTEX_LIMIT {
        return Err(ComplexError::TooLarge(k.vertex_count()));
    }
    let auts = automorphisms(k);
    let n = k.vertex_count();
    let label_map = |dom: &[usize], img: &dyn Fn(usize) -> usize| -> Vec<(String, String)> {
        dom.iter().map(|&x| (k.label(x).to_string(), k.label(img(x)).to_string())).collect()
    };
    let mut report = SuperstarReport {
        holds: true,
        automorphisms: auts.len(),
        vertex_pairs_checked: 0,
        simplices_checked: 0,
        witness: None,
    };
    // Case 1: σ = v, σ' = v'.
    let nbhd: Vec<Vec<usize>> = (0..n).map(|v| k.closed_neighbourhood(&[v])).collect();
    for v in 0..n {
        let restrictions: HashSet<Vec<usize>> =
            auts.iter().map(|g| nbhd[v].iter().map(|&x| g[x]).collect()).collect();
        let sub_v = k.induced(&nbhd[v]);
        let pos_v = nbhd[v].iter().position(|&x| x == v).unwrap();
        for w in 0..n {
            report.vertex_pairs_checked += 1;
            let sub_w = k.induced(&nbhd[w]);
            let pos_w = nbhd[w].iter().position(|&x| x == w).unwrap();
            let mut failure = None;
            for_each_isomorphism(&sub_v, &sub_w, &[(pos_v, pos_w)], |img| {
                let global: Vec<usize> = img.iter().map(|&j| nbhd[w][j]).collect();
                if restrictions.contains(&global) {
                    true
                } else {
                    failure = Some(global);
                    false
                }
            });
            if let Some(global) = failure {
                let map = nbhd[v].iter().copied().zip(global.iter().copied()).collect::<HashMap<_, _>>();
                report.holds = false;
                report.witness = Some(SuperstarWitness {
                    case: 1,
                    sigma: vec![k.label(v).to_string()],
                    sigma_prime: vec![k.label(w).to_string()],
                    map: label_map(&nbhd[v], &|x| map[&x]),
                });
                return Ok(report);
            }
        }
    }
    // Case 2: σ = σ' of dimension ≥ 1, φ|σ = id.
    for sigma in k.simplices().into_iter().filter(|s| s.len() >= 2) {
        report.simplices_checked += 1;
        let dom = k.closed_neighbourhood(&sigma);
        let restrictions: HashSet<Vec<usize>> = auts
            .iter()
            .filter(|g| sigma.iter().all(|&x| g[x] == x))
            .map(|g| dom.iter().map(|&x| g[x]).collect())
            .collect();
        let sub = k.induced(&dom);
        let forced: Vec<(usize, usize)> = sigma
            .iter()
            .map(|x| {
                let p = dom.iter().position(|y| y == x).unwrap();
                (p, p)
            })
            .collect();
        let mut failure = None;
        for_each_isomorphism(&sub, &sub, &forced, |img| {
            let global: Vec<usize> = img.iter().map(|&j| dom[j]).collect();
            if restrictions.contains(&global) {
                true
            } else {
                failure = Some(global);
                false
            }
        });
        if let Some(global) = failure {
            let map = dom.iter().copied().zip(global.iter().copied()).collect::<HashMap<_, _>>();
            let names: Vec<String> = sigma.iter().map(|&x| k.label(x).to_string()).collect();
            report.holds = false;
            report.witness = Some(SuperstarWitness {
                case: 2,
                sigma: names.clone(),
                sigma_prime: names,
                map: label_map(&dom, &|x| map[&x]),
            });
            return Ok(report);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_odd_graphs() {
        let o2 = build_odd(2).unwrap();
        assert_eq!((o2.vertex_count(), o2.complex().edge_count()), (3, 3));
        let o3 = build_odd(3).unwrap();
        assert_eq!((o3.vertex_count(), o3.complex().edge_count()), (10, 15));
        assert!((0..10).all(|v| o3.complex().degree(v) == 3));
        assert_eq!(build_odd(6).unwrap().vertex_count(), 462);
        assert!(build_odd(1).is_err());
        assert!(build_odd(33).is_err());
    }

    #[test]
    fn colex_order() {
        let s: Vec<String> = subsets_colex(4, 2).iter().map(|v| v.to_string()).collect();
        assert_eq!(s, ["{1,2}", "{1,3}", "{2,3}", "{1,4}", "{2,4}", "{3,4}"]);
    }

    #[test]
    fn girths() {
        assert_eq!(girth(build_odd(2).unwrap().complex()), Some(3));
        assert_eq!(girth(build_odd(3).unwrap().complex()), Some(5));
        assert_eq!(girth(build_odd(4).unwrap().complex()), Some(6));
        assert_eq!(girth(&FlagComplex::path(5)), None);
        assert_eq!(girth(&FlagComplex::cycle(7)), Some(7));
    }

    #[test]
    fn petersen_automorphisms() {
        assert_eq!(automorphism_count(build_odd(3).unwrap().complex()), 120);
        assert_eq!(automorphism_count(&FlagComplex::cycle(5)), 10);
    }

    #[test]
    fn joins() {
        let sq = join(&FlagComplex::discrete(2, "a"), &FlagComplex::discrete(2, "b"));
        assert_eq!((sq.vertex_count(), sq.edge_count()), (4, 4));
        assert_eq!(girth(&sq), Some(4));
        let o3 = build_odd(3).unwrap();
        let j = join(&FlagComplex::discrete(3, "z"), o3.complex());
        assert_eq!((j.vertex_count(), j.edge_count()), (13, 45));
        let e = join(o3.complex(), &FlagComplex::new(vec![]));
        assert_eq!(&e, o3.complex());
    }

    #[test]
    fn simplices_of_triangle() {
        let k = FlagComplex::cycle(3);
        assert_eq!(k.simplices().len(), 7);
        assert_eq!(k.maximal_simplices(), vec![vec![0, 1, 2]]);
        assert_eq!(k.dimension(), Some(2));
    }

    #[test]
    fn fixators_d3_brute_force() {
        let a = SubsetVertex::from_elements(&[1, 2]);
        let b = SubsetVertex::from_elements(&[3, 4]);
        for target in [
            FixTarget::Vertex { a },
            FixTarget::Edge { a, b },
            FixTarget::Star { a },
            FixTarget::EdgeStar { a, b },
        ] {
            let brute = fixator_report(3, &target, FixMode::BruteForce).unwrap();
            let chain = fixator_report(3, &target, FixMode::Chain).unwrap();
            assert_eq!(brute.order, brute.predicted_order(), "{target:?}");
            assert_eq!(BigUint::from(brute.enumerated.unwrap()), brute.order);
            assert_eq!(chain.order, brute.order, "{target:?}");
        }
        assert!(fixator_report(5, &FixTarget::Vertex { a: SubsetVertex::from_elements(&[1, 2, 3, 4]) }, FixMode::BruteForce).is_err());
    }

    #[test]
    fn superstar_small_cases() {
        assert!(is_superstar_transitive(build_odd(3).unwrap().complex()).unwrap().holds);
        // Every star isomorphism of P_3 is a reflection, so it extends.
        assert!(is_superstar_transitive(&FlagComplex::path(3)).unwrap().holds);
        let p4 = is_superstar_transitive(&FlagComplex::path(4)).unwrap();
        assert!(!p4.holds);
        assert_eq!(p4.witness.unwrap().sigma, vec!["p2".to_string()]);
        assert!(is_superstar_transitive(&FlagComplex::cycle(6)).unwrap().holds);
    }

    #[test]
    fn join_superstar_depends_on_c_vs_d() {
        let o3 = build_odd(3).unwrap();
        let four = join(&FlagComplex::discrete(4, "z"), o3.complex());
        assert!(is_superstar_transitive(&four).unwrap().holds);
        let three = join(&FlagComplex::discrete(3, "z"), o3.complex());
        let r = is_superstar_transitive(&three).unwrap();
        assert!(!r.holds);
        let w = r.witness.unwrap();
        // The failing map swaps the three z's with the three L-neighbours of an L-vertex.
        assert_eq!(w.case, 1);
        assert!(w.map.iter().any(|(a, b)| a.starts_with('z') && !b.starts_with('z')));
    }
}
