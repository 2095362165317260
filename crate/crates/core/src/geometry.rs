//! The ℓ∞ metric on Davis complexes: normal paths, sphere classification,
//! blocks and sectors.
//!
//! Balls are built directly in the king graph of `X_L`: two vertices are
//! adjacent when they span a cube, i.e. they differ by the product of a
//! clique of `L`. The distance so obtained is checked against the
//! Cartier–Foata height of the normal form.
//!
//! ```
//! use oddlattice::complexes::build_odd;
//! use oddlattice::coxeter::RacgPresentation;
//! use oddlattice::geometry::KingBall;
//!
//! let pres = RacgPresentation::from_complex(build_odd(3).unwrap().complex());
//! let king = KingBall::build(&pres, 1).unwrap();
//! assert_eq!(king.sphere(1).len(), 25);
//! ```

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use serde::Serialize;
use thiserror::Error;

use crate::complexes::girth;
use crate::coxeter::{CoxeterError, DavisBall, RacgPresentation, VertexTable, NONE};

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("vertex {0} lies outside the ball")]
    OutOfRange(String),
    #[error("radius {requested} exceeds the available {available}")]
    Radius { requested: usize, available: usize },
    #[error("link girth {0:?} is below 5; the sphere claims do not apply")]
    Inapplicable(Option<usize>),
    #[error("king ball exceeds the vertex cap {0}")]
    TooLarge(usize),
    #[error("normal path uniqueness violated: {0}")]
    Uniqueness(String),
    #[error("the brute-force path enumeration needs a square complex (triangle-free L)")]
    NotSquareComplex,
    #[error(transparent)]
    Coxeter(#[from] CoxeterError),
}

/// All non-empty cliques of `L`, ascending within and lexicographic overall.
pub fn cliques(pres: &RacgPresentation) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(p: &RacgPresentation, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        out.push(cur.clone());
        let last = *cur.last().unwrap();
        for &w in p.neighbours(last) {
            if w > last && cur.iter().all(|&u| p.commutes(u, w)) {
                cur.push(w);
                rec(p, cur, out);
                cur.pop();
            }
        }
    }
    for v in 0..pres.rank() as u32 {
        cur.push(v);
        rec(pres, &mut cur, &mut out);
        cur.pop();
    }
    out.sort();
    out
}

/// Cartier–Foata layers read from the left: the first layer is the set of
/// letters that can be moved to the front.
pub fn foata_layers(pres: &RacgPresentation, word: &[u32]) -> Vec<Vec<u32>> {
    let mut rest = word.to_vec();
    let mut layers = Vec::new();
    while !rest.is_empty() {
        let mut take = vec![false; rest.len()];
        for i in 0..rest.len() {
            take[i] = rest[..i].iter().all(|&t| t != rest[i] && pres.commutes(t, rest[i]));
        }
        let mut layer: Vec<u32> = rest.iter().zip(&take).filter(|(_, &t)| t).map(|(&s, _)| s).collect();
        layer.sort_unstable();
        rest = rest.iter().zip(&take).filter(|(_, &t)| !t).map(|(&s, _)| s).collect();
        layers.push(layer);
    }
    layers
}

/// Layers read from the right; `word = ρ_k ⋯ ρ_1` with `ρ_1` first in the output.
pub fn right_layers(pres: &RacgPresentation, word: &[u32]) -> Vec<Vec<u32>> {
    let rev: Vec<u32> = word.iter().rev().copied().collect();
    foata_layers(pres, &rev)
}

/// ℓ∞ length of an element: its number of Cartier–Foata layers.
pub fn lsup_length(pres: &RacgPresentation, word: &[u32]) -> usize {
    foata_layers(pres, word).len()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

/// A normal cube path: vertex ids and the label set of each cube.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NormalPath {
    pub vertices: Vec<u32>,
    pub cubes: Vec<Vec<u32>>,
    pub direction: Direction,
}

impl NormalPath {
    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn reversed_vertices(&self) -> Vec<u32> {
        self.vertices.iter().rev().copied().collect()
    }
}

/// The label form of the star conditions. Up: every label of `C_i` lies
/// outside `C_{i-1}` and fails to commute with some label of `C_{i-1}`.
/// Down: the same with the roles of the two cubes exchanged.
pub fn is_normal_cube_sequence(pres: &RacgPresentation, cubes: &[Vec<u32>], direction: Direction) -> bool {
    let is_clique = |c: &Vec<u32>| {
        !c.is_empty() && c.iter().enumerate().all(|(i, &a)| c[i + 1..].iter().all(|&b| pres.commutes(a, b)))
    };
    if !cubes.iter().all(is_clique) {
        return false;
    }
    let blocked = |a: u32, other: &[u32]| !other.contains(&a) && other.iter().any(|&b| !pres.commutes(a, b));
    cubes.windows(2).all(|w| match direction {
        Direction::Up => w[1].iter().all(|&a| blocked(a, &w[0])),
        Direction::Down => w[0].iter().all(|&a| blocked(a, &w[1])),
    })
}

/// The ℓ∞ ball of radius `R` about the identity.
#[derive(Clone, Debug)]
pub struct KingBall {
    pub pres: RacgPresentation,
    pub radius: usize,
    pub table: VertexTable,
    pub dist: Vec<u8>,
    spheres: Vec<Vec<u32>>,
    cliques: Vec<Vec<u32>>,
}

pub const DEFAULT_KING_CAP: usize = 5_000_000;

impl KingBall {
    pub fn build(pres: &RacgPresentation, radius: usize) -> Result<KingBall, GeometryError> {
        Self::build_capped(pres, radius, DEFAULT_KING_CAP)
    }

    pub fn build_capped(pres: &RacgPresentation, radius: usize, cap: usize) -> Result<KingBall, GeometryError> {
        let rank = pres.rank();
        let cliques = cliques(pres);
        let mut table = VertexTable::new(rank);
        table.insert(&[]);
        let mut dist = vec![0u8];
        let mut spheres = vec![vec![0u32]];
        let mut word = Vec::new();
        for k in 1..=radius {
            let mut next = Vec::new();
            for &u in &spheres[k - 1] {
                for c in &cliques {
                    word.clear();
                    word.extend_from_slice(table.word(u));
                    for &s in c {
                        pres.push_reduced(&mut word, s);
                    }
                    let nf = pres.shortlex(&word);
                    let (v, fresh) = table.insert(&nf);
                    if fresh {
                        if table.len() > cap {
                            return Err(GeometryError::TooLarge(cap));
                        }
                        dist.push(k as u8);
                        next.push(v);
                    }
                    if c.len() == 1 {
                        table.set_neighbour(u, c[0], v);
                        table.set_neighbour(v, c[0], u);
                    }
                }
            }
            spheres.push(next);
        }
        table.fill_neighbours(pres);
        Ok(KingBall { pres: pres.clone(), radius, table, dist, spheres, cliques })
    }

    pub fn vertex_count(&self) -> usize {
        self.table.len()
    }

    pub fn sphere(&self, n: usize) -> &[u32] {
        &self.spheres[n]
    }

    pub fn sphere_sizes(&self) -> Vec<usize> {
        self.spheres.iter().map(|s| s.len()).collect()
    }

    pub fn cliques(&self) -> &[Vec<u32>] {
        &self.cliques
    }

    pub fn word(&self, v: u32) -> &[u32] {
        self.table.word(v)
    }

    pub fn dist(&self, v: u32) -> usize {
        self.dist[v as usize] as usize
    }

    #[inline]
    pub fn neighbour(&self, v: u32, s: u32) -> u32 {
        self.table.neighbour(v, s)
    }

    /// `v · σ` for a clique σ, if inside the ball.
    pub fn cube_corner(&self, v: u32, sigma: &[u32]) -> u32 {
        let mut cur = v;
        for &s in sigma {
            cur = self.table.neighbour(cur, s);
            if cur == NONE {
                return NONE;
            }
        }
        cur
    }

    /// Vertex id of the element with the given word (any word).
    pub fn lookup(&self, word: &[u32]) -> Option<u32> {
        let nf = self.pres.normalize(word).ok()?;
        self.table.lookup(nf.word())
    }

    /// `u⁻¹ x` as a normal form.
    pub fn difference(&self, u: u32, x: u32) -> Vec<u32> {
        let mut w: Vec<u32> = self.word(u).iter().rev().copied().collect();
        w.extend_from_slice(self.word(x));
        self.pres.normalize_unchecked(&w).word().to_vec()
    }

    /// The unique normal path from `u` to `x` in the requested direction.
    pub fn normal_path(&self, u: u32, x: u32, direction: Direction) -> Result<NormalPath, GeometryError> {
        let n = self.vertex_count() as u32;
        if u >= n || x >= n {
            return Err(GeometryError::OutOfRange(format!("#{}", u.max(x))));
        }
        let g = self.difference(u, x);
        let cubes = match direction {
            Direction::Up => foata_layers(&self.pres, &g),
            Direction::Down => {
                let mut r = right_layers(&self.pres, &g);
                r.reverse();
                r
            }
        };
        if !is_normal_cube_sequence(&self.pres, &cubes, direction) {
            return Err(GeometryError::Uniqueness(format!(
                "layers of {} fail the star condition",
                self.pres.format_word(&g)
            )));
        }
        let mut vertices = vec![u];
        let mut word: Vec<u32> = self.word(u).to_vec();
        for c in &cubes {
            for &s in c {
                self.pres.push_reduced(&mut word, s);
            }
            let nf = self.pres.shortlex(&word);
            let v = self
                .table
                .lookup(&nf)
                .ok_or_else(|| GeometryError::OutOfRange(self.pres.format_word(&nf)))?;
            vertices.push(v);
            word = nf;
        }
        debug_assert_eq!(*vertices.last().unwrap(), x);
        Ok(NormalPath { vertices, cubes, direction })
    }

    /// Links `Lk(x, B_n)`: the labels of edges from `x` into `B_n` and the
    /// pairs of them spanning a square inside `B_n`.
    pub fn link_in_ball(&self, x: u32, n: usize) -> (Vec<u32>, Vec<(u32, u32)>) {
        let rank = self.pres.rank() as u32;
        let inside = |w: u32| w != NONE && self.dist(w) <= n;
        let verts: Vec<u32> = (0..rank).filter(|&s| inside(self.neighbour(x, s))).collect();
        let mut edges = Vec::new();
        for (i, &a) in verts.iter().enumerate() {
            for &b in &verts[i + 1..] {
                if self.pres.commutes(a, b) && inside(self.cube_corner(x, &[a, b])) {
                    edges.push((a, b));
                }
            }
        }
        (verts, edges)
    }

    /// Enumerates every normal cube path from the base of length at most
    /// `radius` using only vertex sets: cubes are edges and 4-cycles of the
    /// ball, stars are unions of the 4-cycles through an edge. Returns how
    /// many paths end at each vertex and the length of each such path.
    pub fn enumerate_normal_paths(&self) -> Result<(Vec<u32>, Vec<u8>), GeometryError> {
        let l = self.pres.defining_graph();
        if !l.is_triangle_free() {
            return Err(GeometryError::NotSquareComplex);
        }
        let n = self.vertex_count();
        let mut hits = vec![0u32; n];
        let mut length = vec![u8::MAX; n];
        hits[0] = 1;
        length[0] = 0;
        // (endpoint, previous cube, star of previous cube, depth)
        let mut stack: Vec<(u32, Vec<u32>, Vec<u32>, usize)> = vec![(0, Vec::new(), Vec::new(), 0)];
        while let Some((u, prev, star, depth)) = stack.pop() {
            if depth == self.radius {
                continue;
            }
            for (cube, opposite) in self.cubes_at(u) {
                let meets = |set: &[u32]| cube.iter().any(|&c| c != u && set.contains(&c));
                if meets(&prev) || meets(&star) {
                    continue;
                }
                hits[opposite as usize] += 1;
                let len = depth as u8 + 1;
                if length[opposite as usize] == u8::MAX {
                    length[opposite as usize] = len;
                } else if length[opposite as usize] != len {
                    length[opposite as usize] = u8::MAX - 1;
                }
                let star = self.star_of(&cube);
                stack.push((opposite, cube, star, depth + 1));
            }
        }
        Ok((hits, length))
    }

    /// Cubes at `u` found geometrically: edges and 4-cycles through `u`,
    /// each as a sorted vertex set with the corner opposite `u`.
    fn cubes_at(&self, u: u32) -> Vec<(Vec<u32>, u32)> {
        let rank = self.pres.rank() as u32;
        let nbrs: Vec<u32> = (0..rank).map(|s| self.neighbour(u, s)).filter(|&w| w != NONE).collect();
        let mut out: Vec<(Vec<u32>, u32)> = nbrs.iter().map(|&w| (sorted(vec![u, w]), w)).collect();
        for (i, &p) in nbrs.iter().enumerate() {
            for &q in &nbrs[i + 1..] {
                for w in self.common_neighbours(p, q) {
                    if w != u {
                        out.push((sorted(vec![u, p, q, w]), w));
                    }
                }
            }
        }
        out
    }

    fn graph_neighbours(&self, p: u32) -> Vec<u32> {
        (0..self.pres.rank() as u32).map(|s| self.neighbour(p, s)).filter(|&w| w != NONE).collect()
    }

    fn common_neighbours(&self, p: u32, q: u32) -> Vec<u32> {
        let np = self.graph_neighbours(p);
        let nq: HashSet<u32> = self.graph_neighbours(q).into_iter().collect();
        np.into_iter().filter(|w| nq.contains(w)).collect()
    }

    /// Vertex set of the union of closed cubes containing `cube`.
    fn star_of(&self, cube: &[u32]) -> Vec<u32> {
        let mut out: Vec<u32> = cube.to_vec();
        if cube.len() == 2 {
            let (p, q) = (cube[0], cube[1]);
            for r in self.graph_neighbours(p) {
                if r == q {
                    continue;
                }
                for s in self.graph_neighbours(q) {
                    if s != p && s != r && self.graph_neighbours(r).contains(&s) {
                        out.push(r);
                        out.push(s);
                    }
                }
            }
        }
        sorted(out)
    }

    /// Distances recomputed by breadth-first search in the king graph of a
    /// graph-metric ball; entries beyond `radius` are `None`.
    pub fn lsup_from_davis(ball: &DavisBall, radius: usize) -> Result<Vec<Option<u8>>, GeometryError> {
        if 2 * radius > ball.radius {
            return Err(GeometryError::Radius { requested: radius, available: ball.radius / 2 });
        }
        let cl = cliques(&ball.pres);
        let n = ball.vertex_count();
        let mut dist: Vec<Option<u8>> = vec![None; n];
        dist[0] = Some(0);
        let mut queue = VecDeque::from([0u32]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u as usize].unwrap();
            if du as usize == radius {
                continue;
            }
            for c in &cl {
                let mut cur = u;
                for &s in c {
                    cur = ball.table.neighbour(cur, s);
                    if cur == NONE {
                        break;
                    }
                }
                if cur != NONE && dist[cur as usize].is_none() {
                    dist[cur as usize] = Some(du + 1);
                    queue.push_back(cur);
                }
            }
        }
        Ok(dist)
    }

    /// Classifies `S_n` about the base into free and partly free vertices.
    pub fn classify_sphere(&self, n: usize) -> Result<SphereStructure, GeometryError> {
        if n == 0 || n > self.radius {
            return Err(GeometryError::Radius { requested: n, available: self.radius });
        }
        let g = girth(&self.pres.defining_graph());
        if g.map_or(false, |g| g < 5) {
            return Err(GeometryError::Inapplicable(g));
        }
        let rank = self.pres.rank() as u32;
        let l = self.pres.defining_graph();
        let sphere = self.sphere(n).to_vec();
        let mut class = Vec::with_capacity(sphere.len());
        let mut inner = Vec::with_capacity(sphere.len());
        for &x in &sphere {
            let ins: Vec<u32> = (0..rank)
                .filter(|&s| {
                    let w = self.neighbour(x, s);
                    w != NONE && self.dist(w) + 1 == n
                })
                .collect();
            let outs: Vec<u32> = (0..rank)
                .filter(|&s| {
                    let w = self.neighbour(x, s);
                    w != NONE && self.dist(w) == n
                })
                .collect();
            // Edge form of the definition.
            let edge_pf = ins.len() == 1 && outs.iter().all(|&f| self.pres.commutes(f, ins[0]));
            let (lverts, ledges) = self.link_in_ball(x, n);
            let squares_at_x: Vec<(u32, u32)> = ledges.clone();
            let edge_free = !edge_pf
                && squares_at_x.len() == 1
                && outs.len() == 2
                && squares_at_x[0] == (outs[0].min(outs[1]), outs[0].max(outs[1]));
            // Link form: Lk(x, B_n) is N_1(ε) in L, or a single edge.
            let link_pf = ins.len() == 1 && {
                let e = ins[0] as usize;
                let mut star: Vec<u32> = l.neighbours(e).to_vec();
                star.push(e as u32);
                star.sort_unstable();
                let mut star_edges: Vec<(u32, u32)> =
                    l.neighbours(e).iter().map(|&f| ((e as u32).min(f), (e as u32).max(f))).collect();
                star_edges.sort_unstable();
                lverts == star && ledges == star_edges
            };
            let link_free = !link_pf && lverts.len() == 2 && ledges.len() == 1;
            if edge_pf != link_pf || edge_free != link_free {
                return Err(GeometryError::Uniqueness(format!(
                    "definitions disagree at {}",
                    self.pres.format_word(self.word(x))
                )));
            }
            let c = if edge_pf {
                VertexClass::PartlyFree
            } else if edge_free {
                VertexClass::Free
            } else {
                VertexClass::Neither
            };
            class.push(c);
            inner.push(if edge_pf { Some(ins[0]) } else { None });
        }
        let position: HashMap<u32, usize> = sphere.iter().enumerate().map(|(i, &x)| (x, i)).collect();
        let sphere_nbrs = |i: usize| -> Vec<usize> {
            (0..rank)
                .map(|s| self.neighbour(sphere[i], s))
                .filter(|&w| w != NONE && self.dist(w) == n)
                .map(|w| position[&w])
                .collect()
        };
        // Blocks: components of partly free vertices under sphere edges.
        let mut block_of = vec![usize::MAX; sphere.len()];
        let mut blocks: Vec<Vec<u32>> = Vec::new();
        for i in 0..sphere.len() {
            if class[i] != VertexClass::PartlyFree || block_of[i] != usize::MAX {
                continue;
            }
            let id = blocks.len();
            let mut comp = vec![i];
            block_of[i] = id;
            let mut k = 0;
            while k < comp.len() {
                for j in sphere_nbrs(comp[k]) {
                    if class[j] == VertexClass::PartlyFree && block_of[j] == usize::MAX {
                        block_of[j] = id;
                        comp.push(j);
                    }
                }
                k += 1;
            }
            let mut verts: Vec<u32> = comp.iter().map(|&j| sphere[j]).collect();
            verts.sort_unstable();
            blocks.push(verts);
        }
        let extended_blocks: Vec<Vec<u32>> = blocks
            .iter()
            .map(|b| {
                let mut ext = b.clone();
                for &x in b {
                    for j in sphere_nbrs(position[&x]) {
                        if class[j] == VertexClass::Free {
                            ext.push(sphere[j]);
                        }
                    }
                }
                sorted(ext)
            })
            .collect();
        let mut sector = BTreeMap::new();
        for (i, &x) in sphere.iter().enumerate() {
            if class[i] == VertexClass::PartlyFree {
                let path = self.normal_path(0, x, Direction::Down)?;
                sector.insert(x, path.vertices[1]);
            }
        }
        Ok(SphereStructure { n, vertices: sphere, class, inner_label: inner, blocks, extended_blocks, sector, position })
    }

    /// Checks the sphere claims on `S_n`.
    pub fn verify_sphere_claims(&self, s: &SphereStructure) -> Result<SphereClaimsReport, GeometryError> {
        let n = s.n;
        let rank = self.pres.rank() as u32;
        let mut report = SphereClaimsReport {
            n,
            sphere_size: s.vertices.len(),
            partly_free: s.count(VertexClass::PartlyFree),
            free: s.count(VertexClass::Free),
            blocks: s.blocks.len(),
            max_block: s.blocks.iter().map(|b| b.len()).max().unwrap_or(0),
            sectors: s.sector.values().collect::<HashSet<_>>().len(),
            exhaustive_classes: s.count(VertexClass::Neither) == 0,
            no_three_consecutive: true,
            blocks_in_one_sector: true,
            free_neighbours_partly_free: true,
            penultimate_vertex: true,
            counterexample: None,
        };
        let fail = |r: &mut SphereClaimsReport, what: &str, x: u32| {
            if r.counterexample.is_none() {
                r.counterexample = Some(format!("{what} at {}", self.pres.format_word(self.word(x))));
            }
        };
        if !report.exhaustive_classes {
            let i = s.class.iter().position(|&c| c == VertexClass::Neither).unwrap();
            fail(&mut report, "neither free nor partly free", s.vertices[i]);
        }
        for b in &s.blocks {
            if b.len() >= 3 {
                report.no_three_consecutive = false;
                fail(&mut report, "block of size >= 3", b[0]);
            }
            let secs: HashSet<u32> = b.iter().map(|x| s.sector[x]).collect();
            if secs.len() != 1 {
                report.blocks_in_one_sector = false;
                fail(&mut report, "block split across sectors", b[0]);
            }
        }
        for (i, &x) in s.vertices.iter().enumerate() {
            let path = self.normal_path(0, x, Direction::Up)?;
            let y = path.vertices[path.vertices.len() - 2];
            match s.class[i] {
                VertexClass::PartlyFree => {
                    let e = s.inner_label[i].unwrap();
                    if self.neighbour(x, e) != y {
                        report.penultimate_vertex = false;
                        fail(&mut report, "penultimate vertex is not the inner neighbour", x);
                    }
                }
                VertexClass::Free => {
                    let nbrs: Vec<u32> = (0..rank)
                        .map(|t| self.neighbour(x, t))
                        .filter(|&w| w != NONE && self.dist(w) == n)
                        .collect();
                    let ok = nbrs.len() == 2
                        && nbrs.iter().all(|w| s.class_of(*w) == Some(VertexClass::PartlyFree))
                        && self.share_square(x, nbrs[0], nbrs[1]);
                    if !ok {
                        report.free_neighbours_partly_free = false;
                        fail(&mut report, "free vertex neighbours", x);
                    }
                    // The unique vertex of S_{n-1} within ℓ∞ distance 1.
                    let inner: Vec<u32> = self
                        .cliques
                        .iter()
                        .map(|c| self.cube_corner(x, c))
                        .filter(|&w| w != NONE && self.dist(w) + 1 == n)
                        .collect();
                    if inner != vec![y] {
                        report.penultimate_vertex = false;
                        fail(&mut report, "penultimate vertex of a free vertex", x);
                    }
                }
                VertexClass::Neither => {}
            }
        }
        Ok(report)
    }

    fn share_square(&self, x: u32, p: u32, q: u32) -> bool {
        let rank = self.pres.rank() as u32;
        let a = (0..rank).find(|&s| self.neighbour(x, s) == p);
        let b = (0..rank).find(|&s| self.neighbour(x, s) == q);
        match (a, b) {
            (Some(a), Some(b)) => self.pres.commutes(a, b) && self.cube_corner(x, &[a, b]) != NONE,
            _ => false,
        }
    }
}

fn sorted(mut v: Vec<u32>) -> Vec<u32> {
    v.sort_unstable();
    v.dedup();
    v
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexClass {
    Free,
    PartlyFree,
    /// Neither definition applies; never expected in a CAT(0) square complex.
    Neither,
}

#[derive(Clone, Debug)]
pub struct SphereStructure {
    pub n: usize,
    pub vertices: Vec<u32>,
    pub class: Vec<VertexClass>,
    /// Label of the unique inner edge of a partly free vertex.
    pub inner_label: Vec<Option<u32>>,
    pub blocks: Vec<Vec<u32>>,
    pub extended_blocks: Vec<Vec<u32>>,
    /// Partly free vertex ↦ the vertex of `S_1` on its downward normal path.
    pub sector: BTreeMap<u32, u32>,
    position: HashMap<u32, usize>,
}

impl SphereStructure {
    pub fn count(&self, c: VertexClass) -> usize {
        self.class.iter().filter(|&&x| x == c).count()
    }

    pub fn class_of(&self, x: u32) -> Option<VertexClass> {
        self.position.get(&x).map(|&i| self.class[i])
    }

    pub fn partly_free(&self) -> Vec<u32> {
        self.vertices.iter().zip(&self.class).filter(|(_, &c)| c == VertexClass::PartlyFree).map(|(&x, _)| x).collect()
    }

    pub fn free(&self) -> Vec<u32> {
        self.vertices.iter().zip(&self.class).filter(|(_, &c)| c == VertexClass::Free).map(|(&x, _)| x).collect()
    }

    /// Sector id ↦ its partly free vertices.
    pub fn sectors(&self) -> BTreeMap<u32, Vec<u32>> {
        let mut out: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        for (&x, &a) in &self.sector {
            out.entry(a).or_default().push(x);
        }
        out
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SphereClaimsReport {
    pub n: usize,
    pub sphere_size: usize,
    pub partly_free: usize,
    pub free: usize,
    pub blocks: usize,
    pub max_block: usize,
    pub sectors: usize,
    pub exhaustive_classes: bool,
    pub no_three_consecutive: bool,
    pub blocks_in_one_sector: bool,
    pub free_neighbours_partly_free: bool,
    pub penultimate_vertex: bool,
    pub counterexample: Option<String>,
}

impl SphereClaimsReport {
    pub fn passed(&self) -> bool {
        self.exhaustive_classes
            && self.no_three_consecutive
            && self.blocks_in_one_sector
            && self.free_neighbours_partly_free
            && self.penultimate_vertex
    }
}

pub fn sphere_stats_csv(reports: &[SphereClaimsReport]) -> String {
    let mut s = String::from("n,sphere,partly_free,free,blocks,max_block,sectors,passed\n");
    for r in reports {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.n,
            r.sphere_size,
            r.partly_free,
            r.free,
            r.blocks,
            r.max_block,
            r.sectors,
            r.passed()
        ));
    }
    s
}

/// Normal-path checks over every vertex of the ball: the algebraic up- and
/// down-paths from the base are normal, have length `d(v, x)`, the down-path
/// is the reverse of the up-path from `x`, and concatenation holds.
#[derive(Clone, Debug, Serialize, Default)]
pub struct PathReport {
    pub pairs: usize,
    pub unique: bool,
    pub lengths_agree: bool,
    pub reverse_agrees: bool,
    pub concatenation: bool,
    pub counterexample: Option<String>,
}

impl PathReport {
    pub fn passed(&self) -> bool {
        self.unique && self.lengths_agree && self.reverse_agrees && self.concatenation
    }
}

pub fn verify_normal_paths(king: &KingBall, brute_force: bool) -> Result<PathReport, GeometryError> {
    let mut r = PathReport { unique: true, lengths_agree: true, reverse_agrees: true, concatenation: true, ..Default::default() };
    let name = |x: u32| king.pres.format_word(king.word(x));
    let (hits, lengths) = if brute_force { king.enumerate_normal_paths()? } else { (Vec::new(), Vec::new()) };
    for x in 0..king.vertex_count() as u32 {
        r.pairs += 1;
        let up = king.normal_path(0, x, Direction::Up)?;
        let down = king.normal_path(0, x, Direction::Down)?;
        let height = lsup_length(&king.pres, king.word(x));
        if up.len() != king.dist(x) || down.len() != king.dist(x) || height != king.dist(x) {
            r.lengths_agree = false;
            r.counterexample.get_or_insert(format!("length mismatch at {}", name(x)));
        }
        if brute_force && (hits[x as usize] != 1 || lengths[x as usize] as usize != king.dist(x)) {
            r.unique = false;
            r.counterexample.get_or_insert(format!("{} normal paths reach {}", hits[x as usize], name(x)));
        }
        // [v↘x] is the reverse of [x↗v]; the latter is evaluated from x.
        let back = king.normal_path(x, 0, Direction::Up)?;
        if back.reversed_vertices() != down.vertices {
            r.reverse_agrees = false;
            r.counterexample.get_or_insert(format!("reverse path mismatch at {}", name(x)));
        }
        for (i, &u) in up.vertices.iter().enumerate() {
            let head = king.normal_path(0, u, Direction::Up)?;
            let tail = king.normal_path(u, x, Direction::Up)?;
            if head.vertices[..] != up.vertices[..=i] || tail.vertices[..] != up.vertices[i..] {
                r.concatenation = false;
                r.counterexample.get_or_insert(format!("concatenation fails at {} via {}", name(x), name(u)));
            }
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complexes::{build_odd, join, FlagComplex};
    use crate::coxeter::build_ball;

    fn o3() -> RacgPresentation {
        RacgPresentation::from_complex(build_odd(3).unwrap().complex())
    }

    #[test]
    fn first_sphere_of_petersen_complex() {
        let king = KingBall::build(&o3(), 2).unwrap();
        assert_eq!(king.sphere(1).len(), 25);
        let s = king.classify_sphere(1).unwrap();
        assert_eq!((s.count(VertexClass::PartlyFree), s.count(VertexClass::Free)), (10, 15));
        assert_eq!(s.blocks.len(), 10);
        assert!(s.blocks.iter().all(|b| b.len() == 1));
    }

    #[test]
    fn tree_spheres_are_partly_free() {
        let king = KingBall::build(&RacgPresentation::free(3), 3).unwrap();
        assert_eq!(king.sphere_sizes(), vec![1, 3, 6, 12]);
        for n in 1..=3 {
            let s = king.classify_sphere(n).unwrap();
            assert_eq!(s.count(VertexClass::PartlyFree), s.vertices.len());
        }
    }

    #[test]
    fn diagonal_is_at_distance_one() {
        let king = KingBall::build(&o3(), 1).unwrap();
        let a = 0u32;
        let b = o3().neighbours(a)[0];
        let x = king.lookup(&[a, b]).unwrap();
        assert_eq!(king.dist(x), 1);
        let p = king.normal_path(0, x, Direction::Up).unwrap();
        assert_eq!(p.cubes, vec![vec![a, b]]);
        assert!(king.normal_path(0, 0, Direction::Up).unwrap().is_empty());
    }

    #[test]
    fn king_distances_match_davis_ball() {
        let p = o3();
        let ball = build_ball(&p, 4).unwrap();
        let from_graph = KingBall::lsup_from_davis(&ball, 2).unwrap();
        let king = KingBall::build(&p, 2).unwrap();
        let mut count = 0;
        for v in 0..ball.vertex_count() as u32 {
            if let Some(d) = from_graph[v as usize] {
                count += 1;
                let id = king.table.lookup(ball.table.word(v)).unwrap();
                assert_eq!(king.dist(id), d as usize);
            }
        }
        assert_eq!(count, king.vertex_count());
        assert!(KingBall::lsup_from_davis(&ball, 3).is_err());
    }

    #[test]
    fn paths_in_small_ball() {
        let king = KingBall::build(&o3(), 2).unwrap();
        let r = verify_normal_paths(&king, true).unwrap();
        assert!(r.passed(), "{r:?}");
        assert_eq!(r.pairs, 1 + 25 + king.sphere(2).len());
    }

    #[test]
    fn square_grid_link_is_inapplicable() {
        let c4 = RacgPresentation::from_complex(&FlagComplex::cycle(4));
        let king = KingBall::build(&c4, 2).unwrap();
        assert!(matches!(king.classify_sphere(1), Err(GeometryError::Inapplicable(Some(4)))));
        let j = RacgPresentation::from_complex(&join(&FlagComplex::discrete(2, "a"), &FlagComplex::discrete(3, "b")));
        let king = KingBall::build(&j, 1).unwrap();
        assert!(king.classify_sphere(1).is_err());
    }

    #[test]
    fn star_condition_examples() {
        let p = o3();
        let a = 0u32;
        let b = p.neighbours(a)[0];
        let c = (0..10).find(|&c| c != a && !p.commutes(a, c)).unwrap();
        assert!(is_normal_cube_sequence(&p, &[vec![a], vec![c]], Direction::Up));
        assert!(!is_normal_cube_sequence(&p, &[vec![a], vec![b]], Direction::Up));
        assert!(!is_normal_cube_sequence(&p, &[vec![a], vec![a]], Direction::Up));
    }
}
