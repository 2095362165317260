//! Automorphisms of finite Davis balls, local actions, and the restriction
//! groups of the universal group `U(F)`.
//!
//! All automorphisms here are explicit vertex maps on a [`KingBall`] about
//! the identity. A local group `F` is a permutation group on the generators
//! of `W_L`, i.e. on `V(L)`.

use std::collections::{HashMap, HashSet};

use num_bigint::BigUint;
use num_traits::One;
use serde::Serialize;
use thiserror::Error;

use crate::complexes::{FlagComplex, OddGraph};
use crate::coxeter::{RacgPresentation, Side, NONE};
use crate::geometry::{GeometryError, KingBall, SphereStructure, VertexClass};
use crate::perm::{alternating_generators, PermError, Permutation, PermutationGroup, SparsePerm};

#[derive(Debug, Error)]
pub enum UniversalError {
    #[error("vertex {0} is too close to the boundary of the ball for its link")]
    Boundary(String),
    #[error("not an automorphism: {0}")]
    NotAutomorphism(String),
    #[error("the map does not fix the carrier of the wall at {0}")]
    CarrierMoved(String),
    #[error("automorphism does not fix the base vertex")]
    BaseMoved,
    #[error("{0}")]
    Precondition(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Perm(#[from] PermError),
}

/// A subgroup `F ≤ Aut(L)` acting on generator indices.
#[derive(Clone, Debug)]
pub struct LocalGroup {
    pub generators: Vec<Permutation>,
    pub group: PermutationGroup,
}

impl LocalGroup {
    pub fn new(rank: usize, generators: Vec<Permutation>) -> Result<Self, UniversalError> {
        let group = PermutationGroup::new(rank, generators.clone())?;
        Ok(LocalGroup { generators, group })
    }

    /// `Alt_{2d-1}` acting on the vertices of `O_d`.
    pub fn odd_alternating(odd: &OddGraph) -> Self {
        let gens: Vec<Permutation> =
            alternating_generators(odd.ell()).iter().map(|p| odd.vertex_permutation(p)).collect();
        LocalGroup::new(odd.vertex_count(), gens).expect("consistent degree")
    }

    /// `Alt(V(L))`, the local group of the regular tree when `L` is edgeless.
    pub fn alternating(rank: usize) -> Self {
        LocalGroup::new(rank, alternating_generators(rank)).expect("consistent degree")
    }

    pub fn order(&self) -> BigUint {
        self.group.order()
    }

    pub fn contains(&self, p: &Permutation) -> bool {
        self.group.contains(p)
    }

    /// Pointwise fixator of the closed neighbourhood of `s` in `L`.
    pub fn star_fixator(&self, l: &FlagComplex, s: u32) -> PermutationGroup {
        self.group.pointwise_stabilizer(&l.closed_neighbourhood(&[s as usize]))
    }
}

/// Recovers the permutation of `[2d-1]` inducing a vertex permutation of
/// `O_d`: point `i` goes to the common point of the images of the subsets
/// containing `i`.
pub fn odd_point_action(odd: &OddGraph, vertex_perm: &Permutation) -> Option<Permutation> {
    let ell = odd.ell();
    let mut images = Vec::with_capacity(ell);
    for i in 0..ell {
        let mut common = (1u64 << ell) - 1;
        for (k, v) in odd.vertices().iter().enumerate() {
            if v.contains(i) {
                common &= odd.vertex(vertex_perm.apply(k)).bits();
            }
        }
        if common.count_ones() != 1 {
            return None;
        }
        images.push(common.trailing_zeros());
    }
    let p = Permutation::from_images(images).ok()?;
    (odd.vertex_permutation(&p) == *vertex_perm).then_some(p)
}

/// Anything that maps ball vertices to ball vertices.
pub trait VertexMap {
    fn image(&self, v: u32) -> u32;
}

impl VertexMap for BallAutomorphism {
    fn image(&self, v: u32) -> u32 {
        self.images[v as usize]
    }
}

impl VertexMap for SparsePerm {
    fn image(&self, v: u32) -> u32 {
        self.apply(v as usize) as u32
    }
}

/// A vertex bijection of a king ball that preserves edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BallAutomorphism {
    images: Vec<u32>,
}

impl BallAutomorphism {
    pub fn identity(n: usize) -> Self {
        BallAutomorphism { images: (0..n as u32).collect() }
    }

    /// Validates bijectivity and edge preservation.
    pub fn from_images(king: &KingBall, images: Vec<u32>) -> Result<Self, UniversalError> {
        let g = BallAutomorphism { images };
        check_automorphism(king, &g, 0..king.vertex_count() as u32, king.vertex_count())?;
        let mut seen = vec![false; g.images.len()];
        for &w in &g.images {
            if w as usize >= seen.len() || std::mem::replace(&mut seen[w as usize], true) {
                return Err(UniversalError::NotAutomorphism("not a bijection".into()));
            }
        }
        Ok(g)
    }

    pub fn images(&self) -> &[u32] {
        &self.images
    }

    pub fn apply(&self, v: u32) -> u32 {
        self.images[v as usize]
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &BallAutomorphism) -> BallAutomorphism {
        BallAutomorphism { images: other.images.iter().map(|&w| self.images[w as usize]).collect() }
    }

    pub fn inverse(&self) -> BallAutomorphism {
        let mut inv = vec![0u32; self.images.len()];
        for (v, &w) in self.images.iter().enumerate() {
            inv[w as usize] = v as u32;
        }
        BallAutomorphism { images: inv }
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(v, &w)| v as u32 == w)
    }

    pub fn fixes(&self, points: impl IntoIterator<Item = u32>) -> bool {
        points.into_iter().all(|v| self.images[v as usize] == v)
    }

    /// Restriction to the prefix `0..m` of vertex ids (a ball `B_k`).
    pub fn restrict(&self, m: usize) -> Result<Permutation, UniversalError> {
        let images: Vec<u32> = self.images[..m].to_vec();
        if images.iter().any(|&w| w as usize >= m) {
            return Err(UniversalError::Precondition("restriction does not preserve the sub-ball".into()));
        }
        Ok(Permutation::from_images(images)?)
    }

    pub fn to_sparse(&self) -> SparsePerm {
        SparsePerm::from_pairs(
            self.images.len(),
            self.images.iter().enumerate().filter(|(v, &w)| *v as u32 != w).map(|(v, &w)| (v as u32, w)),
        )
        .expect("bijection")
    }
}

/// Number of vertices of `B_k`: ids are assigned sphere by sphere.
pub fn ball_prefix(king: &KingBall, k: usize) -> usize {
    king.sphere_sizes()[..=k].iter().sum()
}

/// Checks that `g` preserves edges at every listed vertex and that its local
/// action at each interior one is an automorphism of `L`. Only vertices with
/// id below `limit` are considered part of the domain.
pub fn check_automorphism(
    king: &KingBall,
    g: &impl VertexMap,
    vertices: impl IntoIterator<Item = u32>,
    limit: usize,
) -> Result<(), UniversalError> {
    let rank = king.pres.rank() as u32;
    let l = king.pres.defining_graph();
    let name = |v: u32| king.pres.format_word(king.word(v));
    for u in vertices {
        let gu = g.image(u);
        if gu == NONE || gu as usize >= king.vertex_count() {
            return Err(UniversalError::NotAutomorphism(format!("{} has no image", name(u))));
        }
        let labels: HashMap<u32, u32> = (0..rank)
            .filter_map(|t| {
                let w = king.neighbour(gu, t);
                (w != NONE).then_some((w, t))
            })
            .collect();
        let mut local = Vec::with_capacity(rank as usize);
        for s in 0..rank {
            let w = king.neighbour(u, s);
            if w == NONE || w as usize >= limit {
                continue;
            }
            match labels.get(&g.image(w)) {
                Some(&t) => local.push(t),
                None => return Err(UniversalError::NotAutomorphism(format!("edge at {} label {}", name(u), s))),
            }
        }
        if local.len() == rank as usize && !l.is_automorphism(&local.iter().map(|&t| t as usize).collect::<Vec<_>>()) {
            return Err(UniversalError::NotAutomorphism(format!("local action at {} is not in Aut(L)", name(u))));
        }
    }
    Ok(())
}

/// `D_x g` on generator indices: `s ↦ t` where `g(xs) = g(x)t`.
pub fn local_action(king: &KingBall, g: &impl VertexMap, x: u32) -> Result<Permutation, UniversalError> {
    if king.dist(x) >= king.radius {
        return Err(UniversalError::Boundary(king.pres.format_word(king.word(x))));
    }
    let rank = king.pres.rank() as u32;
    let gx = g.image(x);
    let labels: HashMap<u32, u32> = (0..rank).map(|t| (king.neighbour(gx, t), t)).collect();
    let images: Result<Vec<u32>, UniversalError> = (0..rank)
        .map(|s| {
            labels.get(&g.image(king.neighbour(x, s))).copied().ok_or_else(|| {
                UniversalError::NotAutomorphism(format!("edge {s} at {}", king.pres.format_word(king.word(x))))
            })
        })
        .collect();
    Ok(Permutation::from_images(images?)?)
}

/// `D_x g` as a permutation of `[2d-1]`.
pub fn local_action_points(
    king: &KingBall,
    odd: &OddGraph,
    g: &impl VertexMap,
    x: u32,
) -> Result<Permutation, UniversalError> {
    let p = local_action(king, g, x)?;
    odd_point_action(odd, &p).ok_or_else(|| UniversalError::NotAutomorphism("not induced by Sym_{2d-1}".into()))
}

fn check_aut_of_l(pres: &RacgPresentation, phi: &Permutation) -> Result<(), UniversalError> {
    let images: Vec<usize> = phi.images().iter().map(|&i| i as usize).collect();
    if phi.degree() != pres.rank() || !pres.defining_graph().is_automorphism(&images) {
        return Err(UniversalError::Precondition(format!("{phi} is not an automorphism of L")));
    }
    Ok(())
}

fn apply_letterwise(pres: &RacgPresentation, phi: &Permutation, word: &[u32]) -> Vec<u32> {
    let w: Vec<u32> = word.iter().map(|&s| phi.apply(s as usize) as u32).collect();
    pres.normalize(&w).expect("letters in range").word().to_vec()
}

/// `Φ_{v,φ}` for the base `v`: the vertex `s_1⋯s_k` goes to `φ(s_1)⋯φ(s_k)`.
pub fn letterwise_extension(king: &KingBall, phi: &Permutation) -> Result<BallAutomorphism, UniversalError> {
    check_aut_of_l(&king.pres, phi)?;
    let images = (0..king.vertex_count() as u32)
        .map(|v| {
            let w = apply_letterwise(&king.pres, phi, king.word(v));
            king.table.lookup(&w).expect("letterwise image has the same ℓ∞ length")
        })
        .collect();
    Ok(BallAutomorphism { images })
}

/// `Φ_{x,φ}(w) = x · φ(x⁻¹ w)`, or `None` when the image leaves the ball.
pub fn conjugated_image(king: &KingBall, x: u32, phi: &Permutation, w: u32) -> Option<u32> {
    let rel = king.difference(x, w);
    let mut word = king.word(x).to_vec();
    word.extend(rel.iter().map(|&s| phi.apply(s as usize) as u32));
    king.lookup(&word)
}

/// The wall dual to the edge `(p, p·s)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct KingWall {
    pub vertex: u32,
    pub label: u32,
}

impl KingWall {
    /// The reflection `p s p⁻¹` fixing the wall, as a normal form.
    pub fn reflection(&self, king: &KingBall) -> Vec<u32> {
        let p = king.word(self.vertex);
        let mut w = p.to_vec();
        w.push(self.label);
        w.extend(p.iter().rev());
        king.pres.normalize(&w).expect("in range").word().to_vec()
    }

    /// Side of `w`: far iff the wall separates `w` from the base.
    pub fn side(&self, king: &KingBall, reflection: &[u32], w: u32) -> Side {
        let mut word = reflection.to_vec();
        word.extend_from_slice(king.word(w));
        let len = king.pres.normalize(&word).expect("in range").len();
        if len < king.word(w).len() {
            Side::Far
        } else {
            Side::Near
        }
    }

    pub fn sides(&self, king: &KingBall) -> Vec<Side> {
        let r = self.reflection(king);
        (0..king.vertex_count() as u32).map(|w| self.side(king, &r, w)).collect()
    }
}

/// Keeps `g` on the `keep` side of the wall and is the identity on the
/// other; `g` must fix the wall's carrier inside the ball.
pub fn halfspace_truncation(
    king: &KingBall,
    g: &BallAutomorphism,
    wall: KingWall,
    keep: Side,
) -> Result<BallAutomorphism, UniversalError> {
    let sides = wall.sides(king);
    let rank = king.pres.rank() as u32;
    for u in 0..king.vertex_count() as u32 {
        let in_carrier = (0..rank).any(|s| {
            let w = king.neighbour(u, s);
            w != NONE && sides[w as usize] != sides[u as usize]
        });
        if in_carrier && g.apply(u) != u {
            return Err(UniversalError::CarrierMoved(king.pres.format_word(king.word(u))));
        }
    }
    let images = (0..king.vertex_count()).map(|u| if sides[u] == keep { g.images[u] } else { u as u32 }).collect();
    Ok(BallAutomorphism { images })
}

/// One factor of the restriction group: the truncated automorphisms for a block.
#[derive(Clone, Debug)]
pub struct BlockFactor {
    pub block: Vec<u32>,
    /// Label `Y_b` of the wall separating the block from the inner ball.
    pub label: u32,
    pub phis: Vec<Permutation>,
    pub generators: Vec<SparsePerm>,
    pub order: BigUint,
}

impl BlockFactor {
    pub fn support(&self) -> Vec<u32> {
        let mut s: Vec<u32> = self.generators.iter().flat_map(|g| g.support().map(|p| p as u32)).collect();
        s.sort_unstable();
        s.dedup();
        s
    }
}

/// Generators of `U_v^n|_{B_{n+1}(v)}` grouped by block.
#[derive(Clone, Debug)]
pub struct RestrictionGroup {
    pub n: usize,
    /// Number of vertices of `B_{n+1}`; generators act on `0..domain`.
    pub domain: usize,
    pub factors: Vec<BlockFactor>,
    pub provenance: String,
}

impl RestrictionGroup {
    pub fn generators(&self) -> Vec<SparsePerm> {
        self.factors.iter().flat_map(|f| f.generators.iter().cloned()).collect()
    }

    /// Product of the factor orders; the group order once the product
    /// structure has been verified.
    pub fn product_order(&self) -> BigUint {
        self.factors.iter().fold(BigUint::one(), |a, f| a * &f.order)
    }

    /// A stabilizer chain over all generators on the whole domain.
    pub fn dense_group(&self) -> PermutationGroup {
        let gens = self.generators().iter().map(|g| g.to_dense()).collect();
        PermutationGroup::new(self.domain, gens).expect("same degree")
    }
}

fn order_on_support(gens: &[SparsePerm]) -> BigUint {
    let mut pts: Vec<u32> = gens.iter().flat_map(|g| g.support().map(|p| p as u32)).collect();
    pts.sort_unstable();
    pts.dedup();
    if pts.is_empty() {
        return BigUint::one();
    }
    let local: Vec<Permutation> = gens.iter().map(|g| g.restrict(&pts).expect("support is invariant")).collect();
    PermutationGroup::new(pts.len(), local).expect("same degree").order()
}

/// Builds the truncated letterwise generators for every block of `S_n`.
pub fn un_restriction_group(
    king: &KingBall,
    f: &LocalGroup,
    n: usize,
) -> Result<(RestrictionGroup, SphereStructure), UniversalError> {
    if n == 0 || n + 1 > king.radius {
        return Err(UniversalError::Precondition(format!("need 1 ≤ n and n+1 ≤ radius {}", king.radius)));
    }
    let s = king.classify_sphere(n)?;
    let l = king.pres.defining_graph();
    let domain = ball_prefix(king, n + 1);
    // Reflection of each block wall ↦ block index.
    let mut wall_index: HashMap<Vec<u32>, usize> = HashMap::new();
    let mut labels = Vec::new();
    for (bi, b) in s.blocks.iter().enumerate() {
        let i = s.vertices.iter().position(|&x| x == b[0]).unwrap();
        let eps = s.inner_label[i].expect("partly free");
        let wall = KingWall { vertex: b[0], label: eps };
        wall_index.insert(wall.reflection(king), bi);
        labels.push(eps);
    }
    // Vertices of S_n ∪ S_{n+1} beyond each block wall.
    let mut beyond: Vec<Vec<u32>> = vec![Vec::new(); s.blocks.len()];
    let start = ball_prefix(king, n - 1) as u32;
    for w in start..domain as u32 {
        let word = king.word(w);
        for i in 0..word.len() {
            let mut r = word[..i].to_vec();
            r.push(word[i]);
            r.extend(word[..i].iter().rev());
            let r = king.pres.normalize(&r).expect("in range");
            if let Some(&bi) = wall_index.get(r.word()) {
                beyond[bi].push(w);
            }
        }
    }
    let mut factors = Vec::with_capacity(s.blocks.len());
    for (bi, b) in s.blocks.iter().enumerate() {
        let phis = f.star_fixator(&l, labels[bi]).strong_generators();
        let x = b[0];
        let mut generators = Vec::new();
        for phi in &phis {
            let mut pairs = Vec::new();
            for &w in &beyond[bi] {
                let img = conjugated_image(king, x, phi, w).ok_or_else(|| {
                    UniversalError::Precondition(format!("image of {} leaves the ball", king.pres.format_word(king.word(w))))
                })?;
                if img as usize >= domain {
                    return Err(UniversalError::NotAutomorphism("restriction leaves B_{n+1}".into()));
                }
                if img != w {
                    pairs.push((w, img));
                }
            }
            generators.push(SparsePerm::from_pairs(domain, pairs).map_err(|e| {
                UniversalError::NotAutomorphism(format!("truncated map is not a bijection: {e}"))
            })?);
        }
        let order = order_on_support(&generators);
        factors.push(BlockFactor { block: b.clone(), label: labels[bi], phis, generators, order });
    }
    let rg = RestrictionGroup {
        n,
        domain,
        factors,
        provenance: format!("fixator of B_{n}(v) restricted to B_{}(v)", n + 1),
    };
    Ok((rg, s))
}

/// Outcome of the product-structure checks on a restriction group.
#[derive(Clone, Debug, Serialize)]
pub struct ProductReport {
    pub n: usize,
    pub blocks: usize,
    pub order: String,
    pub expected_order: String,
    pub automorphisms: bool,
    pub fixes_inner_ball: bool,
    pub factor_orders: bool,
    pub block_restriction_injective: bool,
    pub cross_trivial: bool,
    pub factors_commute: bool,
    pub overlapping_pairs: usize,
    pub free_vertices_determined: bool,
    pub witness: Option<String>,
}

impl ProductReport {
    pub fn passed(&self) -> bool {
        self.order == self.expected_order
            && self.automorphisms
            && self.fixes_inner_ball
            && self.factor_orders
            && self.block_restriction_injective
            && self.cross_trivial
            && self.factors_commute
            && self.free_vertices_determined
    }
}

/// Checks the three parts of the product proposition on `rg`.
pub fn verify_product_structure(
    king: &KingBall,
    f: &LocalGroup,
    rg: &RestrictionGroup,
    s: &SphereStructure,
) -> Result<ProductReport, UniversalError> {
    let l = king.pres.defining_graph();
    let rank = king.pres.rank() as u32;
    let inner = ball_prefix(king, rg.n) as u32;
    let mut r = ProductReport {
        n: rg.n,
        blocks: rg.factors.len(),
        order: String::new(),
        expected_order: String::new(),
        automorphisms: true,
        fixes_inner_ball: true,
        factor_orders: true,
        block_restriction_injective: true,
        cross_trivial: true,
        factors_commute: true,
        overlapping_pairs: 0,
        free_vertices_determined: true,
        witness: None,
    };
    let name = |v: u32| king.pres.format_word(king.word(v));
    let mut touching: HashMap<u32, Vec<usize>> = HashMap::new();
    let mut expected = BigUint::one();
    for (fi, fac) in rg.factors.iter().enumerate() {
        let fix = f.star_fixator(&l, fac.label);
        expected *= fix.order();
        if fac.order != fix.order() {
            r.factor_orders = false;
            r.witness.get_or_insert(format!("factor at {} has order {}", name(fac.block[0]), fac.order));
        }
        for g in &fac.generators {
            if g.support().any(|p| (p as u32) < inner) {
                r.fixes_inner_ball = false;
                r.witness.get_or_insert(format!("generator of block at {} moves B_n", name(fac.block[0])));
            }
            if let Err(e) = check_automorphism(king, g, g.support().map(|p| p as u32), rg.domain) {
                r.automorphisms = false;
                r.witness.get_or_insert(e.to_string());
            }
        }
        for p in fac.support() {
            touching.entry(p).or_default().push(fi);
        }
        // D_x is injective on the factor and lands on Fix_F(N_1[Y_b]).
        for &x in &fac.block {
            let locals: Vec<Permutation> =
                fac.generators.iter().map(|g| local_action(king, g, x)).collect::<Result<_, _>>()?;
            let image = PermutationGroup::new(king.pres.rank(), locals.clone())?;
            let inside = locals.iter().all(|p| fix.contains(p));
            if image.order() != fac.order || !inside {
                r.block_restriction_injective = false;
                r.witness.get_or_insert(format!("local action at {} is not injective", name(x)));
            }
        }
    }
    let mut pairs: HashSet<(usize, usize)> = HashSet::new();
    for fs in touching.values() {
        for i in 0..fs.len() {
            for j in i + 1..fs.len() {
                pairs.insert((fs[i].min(fs[j]), fs[i].max(fs[j])));
            }
        }
    }
    r.overlapping_pairs = pairs.len();
    for &(i, j) in &pairs {
        for g in &rg.factors[i].generators {
            for h in &rg.factors[j].generators {
                if !g.commutes_with(h) {
                    r.factors_commute = false;
                    r.witness.get_or_insert(format!(
                        "blocks at {} and {} do not commute",
                        name(rg.factors[i].block[0]),
                        name(rg.factors[j].block[0])
                    ));
                }
            }
        }
    }
    let block_of: HashMap<u32, usize> =
        rg.factors.iter().enumerate().flat_map(|(i, f)| f.block.iter().map(move |&x| (x, i))).collect();
    // Factors acting on the edges at a sphere vertex.
    let acting_at = |y: u32| -> HashSet<usize> {
        (0..rank)
            .filter_map(|t| touching.get(&king.neighbour(y, t)))
            .flat_map(|fs| fs.iter().copied())
            .filter(|&fi| rg.factors[fi].generators.iter().any(|g| local_action(king, g, y).map_or(true, |p| !p.is_identity())))
            .collect()
    };
    for (&x, &bi) in &block_of {
        if acting_at(x).iter().any(|&fi| fi != bi) {
            r.cross_trivial = false;
            r.witness.get_or_insert(format!("another block acts at {}", name(x)));
        }
    }
    for y in s.free() {
        let nb: Vec<u32> = (0..rank).map(|t| king.neighbour(y, t)).filter(|&w| s.class_of(w).is_some()).collect();
        let (bx, bz) = match (nb.first().and_then(|x| block_of.get(x)), nb.get(1).and_then(|z| block_of.get(z))) {
            (Some(&a), Some(&b)) if nb.len() == 2 && a != b => (a, b),
            _ => {
                r.free_vertices_determined = false;
                r.witness.get_or_insert(format!("free vertex {} lacks two block neighbours", name(y)));
                continue;
            }
        };
        let acting = acting_at(y);
        let locals: Vec<Permutation> = rg.factors[bx]
            .generators
            .iter()
            .chain(&rg.factors[bz].generators)
            .map(|g| local_action(king, g, y))
            .collect::<Result<_, _>>()?;
        let order = PermutationGroup::new(king.pres.rank(), locals)?.order();
        if acting.iter().any(|&fi| fi != bx && fi != bz) || order != &rg.factors[bx].order * &rg.factors[bz].order {
            r.free_vertices_determined = false;
            r.witness.get_or_insert(format!("free vertex {} is not determined by its blocks", name(y)));
        }
    }
    r.order = rg.product_order().to_string();
    r.expected_order = expected.to_string();
    Ok(r)
}

/// `G¹_x ∩ G¹_z ⊆ G¹_y` for a group acting on the prefix `B_k` of the ball.
pub fn square_determination_check(
    king: &KingBall,
    group: &PermutationGroup,
    x: u32,
    y: u32,
    z: u32,
) -> Result<bool, UniversalError> {
    let m = group.degree();
    let rank = king.pres.rank() as u32;
    let a = (0..rank).find(|&s| king.neighbour(y, s) == x);
    let b = (0..rank).find(|&s| king.neighbour(y, s) == z);
    let square = match (a, b) {
        (Some(a), Some(b)) => a != b && king.pres.commutes(a, b),
        _ => false,
    };
    if !square {
        return Err(UniversalError::Precondition("x, y, z are not consecutive in a square".into()));
    }
    let ball1 = |c: u32| -> Result<Vec<usize>, UniversalError> {
        let mut pts = vec![c as usize];
        for cl in king.cliques() {
            let w = king.cube_corner(c, cl);
            if w == NONE || w as usize >= m {
                return Err(UniversalError::Boundary(king.pres.format_word(king.word(c))));
            }
            pts.push(w as usize);
        }
        Ok(pts)
    };
    let mut fixed = ball1(x)?;
    fixed.extend(ball1(z)?);
    fixed.sort_unstable();
    fixed.dedup();
    let target = ball1(y)?;
    let fix = group.pointwise_stabilizer(&fixed);
    Ok(fix.generators().iter().all(|g| target.iter().all(|&p| g.apply(p) == p)))
}

/// An element of the fixator of `B_{n-1}(v)` moving exactly one of two
/// partly free vertices of `S_n(v)` lying in different sectors.
pub fn sector_witness(
    king: &KingBall,
    f: &LocalGroup,
    s: &SphereStructure,
    x: u32,
    y: u32,
) -> Result<BallAutomorphism, UniversalError> {
    let n = s.n;
    let pf = |v: u32| s.class_of(v) == Some(VertexClass::PartlyFree);
    if !pf(x) || !pf(y) {
        return Err(UniversalError::Precondition("both vertices must be partly free in the sphere".into()));
    }
    if s.sector[&x] == s.sector[&y] {
        return Err(UniversalError::Precondition("the vertices lie in the same sector".into()));
    }
    let l = king.pres.defining_graph();
    let label = |v: u32| s.inner_label[s.vertices.iter().position(|&u| u == v).unwrap()].unwrap();
    let candidate = if n == 1 {
        let (a, b) = (label(x), label(y));
        let stab = f.group.pointwise_stabilizer(&[a as usize]);
        let phi = stab
            .strong_generators()
            .into_iter()
            .find(|p| p.apply(b as usize) != b as usize)
            .ok_or_else(|| UniversalError::Precondition("no local element separates the two labels".into()))?;
        Some(letterwise_extension(king, &phi)?)
    } else {
        let xp = king.neighbour(x, label(x));
        let yp = king.neighbour(y, label(y));
        let inner: Vec<u32> = (0..ball_prefix(king, n - 2) as u32).collect();
        let mut found = None;
        'search: for (p, q, t) in [(xp, yp, x), (yp, xp, y)] {
            let bl = label(t);
            for a in 0..king.pres.rank() as u32 {
                if a == bl || king.pres.commutes(a, bl) {
                    continue;
                }
                let wall = KingWall { vertex: p, label: a };
                let r = wall.reflection(king);
                let ps = wall.side(king, &r, p);
                if wall.side(king, &r, q) == ps || inner.iter().any(|&w| wall.side(king, &r, w) == ps) {
                    continue;
                }
                let fix = f.star_fixator(&l, a);
                let Some(phi) = fix.strong_generators().into_iter().find(|g| g.apply(bl as usize) != bl as usize)
                else {
                    continue;
                };
                let mut images = Vec::with_capacity(king.vertex_count());
                for w in 0..king.vertex_count() as u32 {
                    if wall.side(king, &r, w) == ps {
                        match conjugated_image(king, p, &phi, w) {
                            Some(img) => images.push(img),
                            None => continue 'search,
                        }
                    } else {
                        images.push(w);
                    }
                }
                found = Some(BallAutomorphism { images });
                break 'search;
            }
        }
        found
    };
    let g = candidate.ok_or_else(|| UniversalError::Precondition("no separating wall found".into()))?;
    let g = BallAutomorphism::from_images(king, g.images)?;
    let inner_fixed = g.fixes(0..ball_prefix(king, n - 1) as u32);
    let exactly_one = (g.apply(x) != x) != (g.apply(y) != y);
    if !inner_fixed || !exactly_one {
        return Err(UniversalError::NotAutomorphism("witness fails its postcondition".into()));
    }
    Ok(g)
}

/// The density condition on `B_2(v)`.
#[derive(Clone, Debug, Serialize)]
pub struct DensityReport {
    pub rank: usize,
    pub n: usize,
    pub points: usize,
    pub order_g: String,
    pub order_u: String,
    pub holds: bool,
    pub local_actions_in_f: bool,
    pub witnesses: Vec<String>,
}

/// Closed form `|F| · ∏_s |Fix_F(N_1[s])|` for `|U_v|_{B_2(v)}|`.
pub fn reference_order(king: &KingBall, f: &LocalGroup) -> BigUint {
    let l = king.pres.defining_graph();
    (0..king.pres.rank() as u32).fold(f.order(), |acc, s| acc * f.star_fixator(&l, s).order())
}

/// Generators of `U_v|_{B_2(v)}`: letterwise extensions of generators of
/// `F` and the block generators of `U_v^1`.
pub fn reference_generators(king: &KingBall, f: &LocalGroup) -> Result<Vec<Permutation>, UniversalError> {
    let m = ball_prefix(king, 2);
    let mut gens = Vec::new();
    for phi in &f.generators {
        gens.push(letterwise_extension(king, phi)?.restrict(m)?);
    }
    let (rg, _) = un_restriction_group(king, f, 1)?;
    gens.extend(rg.generators().iter().map(|g| g.to_dense()));
    Ok(gens)
}

/// Compares `|⟨gens|_{B_2}⟩|` with the reference order; generators are
/// restrictions to `B_2(v)` and must fix the base.
pub fn density_condition_check(
    king: &KingBall,
    f: &LocalGroup,
    gens: &[Permutation],
) -> Result<DensityReport, UniversalError> {
    let m = ball_prefix(king, 2);
    let mut witnesses = Vec::new();
    let mut local_ok = true;
    for (i, g) in gens.iter().enumerate() {
        if g.degree() != m {
            return Err(UniversalError::Precondition(format!("generator {i} is not a map of B_2(v)")));
        }
        if g.apply(0) != 0 {
            return Err(UniversalError::BaseMoved);
        }
        let d = local_action(king, &DenseMap(g), 0)?;
        if !f.contains(&d) {
            local_ok = false;
            witnesses.push(format!("generator {i} has local action {d} outside F"));
        }
    }
    let order_g = PermutationGroup::new(m, gens.to_vec())?.order();
    let order_u = reference_order(king, f);
    let holds = local_ok && order_g == order_u;
    if order_g != order_u {
        witnesses.push(format!("order {order_g} differs from {order_u}"));
    }
    Ok(DensityReport {
        rank: king.pres.rank(),
        n: 2,
        points: m,
        order_g: order_g.to_string(),
        order_u: order_u.to_string(),
        holds,
        local_actions_in_f: local_ok,
        witnesses,
    })
}

struct DenseMap<'a>(&'a Permutation);

impl VertexMap for DenseMap<'_> {
    fn image(&self, v: u32) -> u32 {
        self.0.apply(v as usize) as u32
    }
}

/// The three possible orders of `G_v^1|_{B_2(v)}` when `d ≥ 6`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalOption {
    Trivial,
    SingleFactor,
    FullProduct,
    Other,
    /// `d < 6`: only the order is reported.
    Unclassified,
}

pub fn classify_local_option(d: usize, order: &BigUint) -> LocalOption {
    if d < 6 {
        return LocalOption::Unclassified;
    }
    let single = crate::perm::alternating_order(d - 1);
    let count = crate::perm::factorial(2 * d - 1) / (crate::perm::factorial(d - 1) * crate::perm::factorial(d));
    let full = single.pow(u32::try_from(count).expect("binomial fits"));
    if order.is_one() {
        LocalOption::Trivial
    } else if *order == single {
        LocalOption::SingleFactor
    } else if *order == full {
        LocalOption::FullProduct
    } else {
        LocalOption::Other
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complexes::build_odd;

    fn setup(d: usize, r: usize) -> (OddGraph, KingBall, LocalGroup) {
        let odd = build_odd(d).unwrap();
        let pres = RacgPresentation::from_complex(odd.complex());
        let king = KingBall::build(&pres, r).unwrap();
        let f = LocalGroup::odd_alternating(&odd);
        (odd, king, f)
    }

    #[test]
    fn point_action_round_trip() {
        let odd = build_odd(4).unwrap();
        let p = Permutation::from_cycles(7, &[&[1, 2, 3], &[4, 5]]).unwrap();
        assert_eq!(odd_point_action(&odd, &odd.vertex_permutation(&p)), Some(p));
    }

    #[test]
    fn letterwise_local_actions() {
        let (odd, king, _) = setup(3, 2);
        let p = Permutation::from_cycles(5, &[&[1, 2, 3]]).unwrap();
        let phi = odd.vertex_permutation(&p);
        let g = letterwise_extension(&king, &phi).unwrap();
        check_automorphism(&king, &g, 0..king.vertex_count() as u32, king.vertex_count()).unwrap();
        for x in 0..ball_prefix(&king, 1) as u32 {
            assert_eq!(local_action_points(&king, &odd, &g, x).unwrap(), p);
        }
        let id = BallAutomorphism::identity(king.vertex_count());
        assert!(local_action(&king, &id, 3).unwrap().is_identity());
        assert!(local_action(&king, &id, king.sphere(2)[0]).is_err());
    }

    #[test]
    fn tree_restriction_order() {
        let pres = RacgPresentation::free(4);
        let king = KingBall::build(&pres, 2).unwrap();
        let f = LocalGroup::alternating(4);
        let (rg, s) = un_restriction_group(&king, &f, 1).unwrap();
        assert_eq!(rg.product_order(), BigUint::from(3u32).pow(4));
        assert_eq!(rg.dense_group().order(), rg.product_order());
        let rep = verify_product_structure(&king, &f, &rg, &s).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn petersen_restriction_and_witnesses() {
        let (_, king, f) = setup(3, 3);
        let (rg, s) = un_restriction_group(&king, &f, 1).unwrap();
        // Alt(Y_b) with |Y_b| = 2 is trivial.
        assert!(rg.product_order().is_one());
        let rep = verify_product_structure(&king, &f, &rg, &s).unwrap();
        assert!(rep.passed(), "{rep:?}");
        let pf = s.partly_free();
        let w = sector_witness(&king, &f, &s, pf[0], pf[1]).unwrap();
        assert!(w.fixes([0]));
    }

    #[test]
    fn sector_witness_at_depth_two() {
        let (_, king, f) = setup(4, 2);
        let s2 = king.classify_sphere(2).unwrap();
        let sectors = s2.sectors();
        let mut it = sectors.values();
        let (a, b) = (it.next().unwrap()[0], it.next().unwrap()[0]);
        let w = sector_witness(&king, &f, &s2, a, b).unwrap();
        assert!(w.fixes(0..ball_prefix(&king, 1) as u32));
        let same = sectors.values().find(|v| v.len() >= 2).unwrap();
        assert!(sector_witness(&king, &f, &s2, same[0], same[1]).is_err());
    }

    #[test]
    fn truncation_of_identity_and_carrier_guard() {
        let (odd, king, _) = setup(3, 2);
        let id = BallAutomorphism::identity(king.vertex_count());
        let wall = KingWall { vertex: 0, label: 0 };
        assert!(halfspace_truncation(&king, &id, wall, Side::Far).unwrap().is_identity());
        let moving = letterwise_extension(&king, &odd.vertex_permutation(&Permutation::from_cycles(5, &[&[1, 3, 5]]).unwrap())).unwrap();
        assert!(matches!(halfspace_truncation(&king, &moving, wall, Side::Far), Err(UniversalError::CarrierMoved(_))));
    }

    #[test]
    fn trichotomy_needs_d_six() {
        assert_eq!(classify_local_option(4, &BigUint::one()), LocalOption::Unclassified);
        assert_eq!(classify_local_option(6, &BigUint::one()), LocalOption::Trivial);
        assert_eq!(classify_local_option(6, &BigUint::from(60u32)), LocalOption::SingleFactor);
        assert_eq!(classify_local_option(6, &BigUint::from(7u32)), LocalOption::Other);
    }

    #[test]
    fn odd_four_first_sphere_product() {
        let (_, king, f) = setup(4, 2);
        let (rg, s) = un_restriction_group(&king, &f, 1).unwrap();
        assert_eq!(rg.factors.len(), 35);
        assert_eq!(rg.product_order(), BigUint::from(3u32).pow(35));
        assert_eq!(rg.dense_group().order(), rg.product_order());
        assert!(verify_product_structure(&king, &f, &rg, &s).unwrap().passed());
        let gens: Vec<Permutation> = rg.generators().iter().map(|g| g.to_dense()).collect();
        let group = PermutationGroup::new(rg.domain, gens).unwrap();
        let (a, b) = (0u32, king.pres.neighbours(0)[0]);
        let (x, z) = (king.neighbour(0, a), king.neighbour(0, b));
        assert!(square_determination_check(&king, &group, x, 0, z).unwrap());
        assert!(square_determination_check(&king, &group, x, 0, king.cube_corner(0, &[a, b])).is_err());
    }

    /// `L` = an edge plus two isolated vertices: the fixator of the closed
    /// neighbourhood of the edge swaps the isolated pair, and the branch swap
    /// at the base fixes both `B_1(a)` and `B_1(b)` but not `B_1(v)`.
    #[test]
    fn square_determination_counterexample() {
        let l = FlagComplex::from_edges(vec!["a".into(), "b".into(), "c".into(), "d".into()], &[(0, 1)]);
        let pres = RacgPresentation::from_complex(&l);
        let king = KingBall::build(&pres, 2).unwrap();
        let swap = Permutation::from_cycles(4, &[&[3, 4]]).unwrap();
        let phi = letterwise_extension(&king, &swap).unwrap();
        let (sc, sd) = (KingWall { vertex: 0, label: 2 }.sides(&king), KingWall { vertex: 0, label: 3 }.sides(&king));
        let images = (0..king.vertex_count())
            .map(|w| if sc[w] == Side::Far || sd[w] == Side::Far { phi.apply(w as u32) } else { w as u32 })
            .collect();
        let g = BallAutomorphism::from_images(&king, images).unwrap();
        let m = ball_prefix(&king, 2);
        let group = PermutationGroup::new(m, vec![g.restrict(m).unwrap()]).unwrap();
        let (x, z) = (king.neighbour(0, 0), king.neighbour(0, 1));
        assert!(!square_determination_check(&king, &group, x, 0, z).unwrap());
        let trivial = PermutationGroup::new(m, vec![]).unwrap();
        assert!(square_determination_check(&king, &trivial, x, 0, z).unwrap());
    }
}
