//! From an involutive BMW presentation to a lattice in `T_c × X_{O_d}`.
//!
//! The pipeline is: [`build_scaffolding`] → [`build_interlacing`] →
//! [`emit_lattice`] → [`check_link`], [`develop_ball`], [`local_action_report`]
//! and [`check_embedding`]. Every stage has a verifier that reports each
//! condition (`E1`–`E4`, `D1`–`D5`) with a witness.
//!
//! Points of `[2d-1]` and indices of `Z` are 0-based in memory; JSON and
//! labels are 1-based.

use std::collections::{BTreeMap, HashMap, HashSet};

use num_bigint::BigUint;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::bmw::BmwPresentation;
use crate::complexes::{build_odd, join, ComplexError, FlagComplex, OddGraph, SubsetVertex};
use crate::coxeter::{build_ball, CoxeterError, DavisBall, RacgPresentation, NONE};
use crate::geometry::KingBall;
use crate::perm::{alternating_order, group_order, Parity, PermError, Permutation};
use crate::universal::{BallAutomorphism, UniversalError};

#[derive(Debug, Error)]
pub enum ConstructionError {
    #[error("a scaffolding needs n ≥ 1")]
    BadN,
    #[error("scaffolding fails {0}")]
    Scaffolding(String),
    #[error("precondition: {0}")]
    Precondition(String),
    #[error("interlacing pair fails {0}")]
    Interlacing(String),
    #[error("development exceeded {0} vertices")]
    Budget(usize),
    #[error("portage projection is inconsistent: {0}")]
    Portage(String),
    #[error("parse: {0}")]
    Parse(String),
    #[error(transparent)]
    Perm(#[from] PermError),
    #[error(transparent)]
    Complex(#[from] ComplexError),
    #[error(transparent)]
    Coxeter(#[from] CoxeterError),
    #[error(transparent)]
    Universal(#[from] UniversalError),
}

/// One checked condition.
#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct Condition {
    pub name: &'static str,
    pub passed: bool,
    pub witness: Option<String>,
}

impl Condition {
    fn new(name: &'static str, witness: Option<String>) -> Self {
        Condition { name, passed: witness.is_none(), witness }
    }
}

fn all_pass(conditions: &[Condition]) -> bool {
    conditions.iter().all(|c| c.passed)
}

fn failed_names(conditions: &[Condition]) -> String {
    let names: Vec<String> = conditions
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{}: {}", c.name, c.witness.as_deref().unwrap_or("")))
        .collect();
    names.join("; ")
}

fn subset_json(s: &SubsetVertex) -> Vec<usize> {
    s.elements()
}

fn subset_from_json(v: &serde_json::Value) -> Result<SubsetVertex, ConstructionError> {
    let items: Vec<usize> =
        serde_json::from_value(v.clone()).map_err(|e| ConstructionError::Parse(format!("subset: {e}")))?;
    if items.iter().any(|&e| e == 0 || e > 63) {
        return Err(ConstructionError::Parse(format!("subset elements out of range: {items:?}")));
    }
    Ok(SubsetVertex::from_elements(&items))
}

// ---------------------------------------------------------------------------
// Scaffolding

/// An `n`-scaffolding: `d`, `k`, the vertex `A'`, its neighbours
/// `A_1..A_n, B`, involutions `υ_1..υ_k` and vertices `C_1..C_k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scaffolding {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub a_prime: SubsetVertex,
    pub a_list: Vec<SubsetVertex>,
    pub b: SubsetVertex,
    pub upsilons: Vec<Permutation>,
    pub c_list: Vec<SubsetVertex>,
}

/// The `d` used by [`build_scaffolding`]: `max(n + 1, 9)`.
pub fn scaffolding_d(n: usize) -> usize {
    (n + 1).max(9)
}

impl Scaffolding {
    /// The explicit family at a given `d`, unverified. Only `d ≥ 9` passes
    /// `E4`; smaller `d` is kept for inspection.
    pub fn from_formulas(n: usize, d: usize) -> Scaffolding {
        let ell = 2 * d - 1;
        let k = ell;
        // Residue of a 1-based index in [ell].
        let res = |x: usize| (x - 1) % ell + 1;
        let mut a_prime: Vec<usize> = (3..=d).map(|i| 2 * i - 1).collect();
        a_prime.push(6);
        let a_prime = SubsetVertex::from_elements(&a_prime);
        let full = SubsetVertex::from_elements(&(1..=ell).collect::<Vec<_>>());
        let drop = |x: usize| SubsetVertex::from_bits(full.bits() & !a_prime.bits() & !(1u64 << (x - 1)));
        let a_list = (1..=n).map(|i| if i <= 4 { drop(i) } else { drop(2 * i) }).collect();
        let mut b: Vec<usize> = vec![1, 2, 3, 4];
        b.extend((6..=d).map(|i| 2 * i - 2));
        let b = SubsetVertex::from_elements(&b);
        let upsilons = (1..=k)
            .map(|i| {
                Permutation::from_cycles(ell, &[&[res(i), res(i + 1)], &[res(i + 2), res(i + 3)]])
                    .expect("distinct residues for ell ≥ 5")
            })
            .collect();
        let c_list = (1..=k)
            .map(|i| {
                let window: Vec<usize> = (i..=i + d - 3).map(res).collect();
                let mut c = SubsetVertex::from_elements(&window);
                let extra = if c.contains(0) { d } else { 1 };
                c = c.union(&SubsetVertex::from_elements(&[extra]));
                c
            })
            .collect();
        Scaffolding { n, d, k, a_prime, a_list, b, upsilons, c_list }
    }

    pub fn ell(&self) -> usize {
        2 * self.d - 1
    }

    /// `𝒜' = {A_1, …, A_n, B}`.
    pub fn family(&self) -> Vec<SubsetVertex> {
        let mut f = self.a_list.clone();
        f.push(self.b);
        f
    }

    /// `j̄`: the point of `[2d-1]` outside `A_j ∪ A'` (0-based `j`, 0-based point).
    pub fn bar(&self, j: usize) -> Option<usize> {
        let rest = self.a_list.get(j)?.union(&self.a_prime).complement(self.ell());
        (rest.len() == 1).then(|| rest.points()[0])
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "n": self.n,
            "d": self.d,
            "k": self.k,
            "A'": subset_json(&self.a_prime),
            "A_list": self.a_list.iter().map(subset_json).collect::<Vec<_>>(),
            "B": subset_json(&self.b),
            "upsilons": self.upsilons.iter().map(|u| u.to_string()).collect::<Vec<_>>(),
            "C_list": self.c_list.iter().map(subset_json).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Scaffolding, ConstructionError> {
        let num = |key: &str| {
            v[key].as_u64().map(|x| x as usize).ok_or_else(|| ConstructionError::Parse(format!("missing {key}")))
        };
        let (n, d, k) = (num("n")?, num("d")?, num("k")?);
        if !(2..=32).contains(&d) {
            return Err(ConstructionError::Parse(format!("d = {d} out of range")));
        }
        let list = |key: &str| -> Result<Vec<SubsetVertex>, ConstructionError> {
            v[key]
                .as_array()
                .ok_or_else(|| ConstructionError::Parse(format!("missing {key}")))?
                .iter()
                .map(subset_from_json)
                .collect()
        };
        let upsilons = v["upsilons"]
            .as_array()
            .ok_or_else(|| ConstructionError::Parse("missing upsilons".into()))?
            .iter()
            .map(|u| {
                let text = u.as_str().ok_or_else(|| ConstructionError::Parse("upsilon not a string".into()))?;
                Ok(Permutation::parse_cycles(text, 2 * d - 1)?)
            })
            .collect::<Result<Vec<_>, ConstructionError>>()?;
        Ok(Scaffolding {
            n,
            d,
            k,
            a_prime: subset_from_json(&v["A'"])?,
            a_list: list("A_list")?,
            b: subset_from_json(&v["B"])?,
            upsilons,
            c_list: list("C_list")?,
        })
    }
}

/// Per-condition result of [`verify_scaffolding`].
#[derive(Clone, Debug, Serialize)]
pub struct ScaffoldingReport {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub conditions: Vec<Condition>,
    /// `|⟨υ_1, …, υ_k⟩|` as computed.
    pub upsilon_order: String,
    /// `(2d-1)!/2`.
    pub alternating_order: String,
}

impl ScaffoldingReport {
    pub fn passed(&self) -> bool {
        all_pass(&self.conditions)
    }
}

pub fn verify_scaffolding(s: &Scaffolding) -> ScaffoldingReport {
    let ell = s.ell();
    let is_vertex = |v: &SubsetVertex| v.len() == s.d - 1 && v.bits() >> ell == 0;

    let e1 = if s.n == 0 {
        Some("n = 0".to_string())
    } else if s.d < (s.n + 1).max(6) {
        Some(format!("d = {} < max(n+1, 6) = {}", s.d, (s.n + 1).max(6)))
    } else if s.upsilons.len() != s.k || s.c_list.len() != s.k {
        Some(format!("k = {} but {} upsilons and {} C's", s.k, s.upsilons.len(), s.c_list.len()))
    } else if s.a_list.len() != s.n {
        Some(format!("{} sets A_j for n = {}", s.a_list.len(), s.n))
    } else {
        None
    };

    let family = s.family();
    let mut e2 = None;
    if !is_vertex(&s.a_prime) {
        e2 = Some(format!("A' = {} is not a vertex of O_{}", s.a_prime, s.d));
    }
    for (idx, v) in family.iter().enumerate() {
        let name = if idx < s.n { format!("A_{}", idx + 1) } else { "B".to_string() };
        if e2.is_some() {
            break;
        }
        if !is_vertex(v) {
            e2 = Some(format!("{name} = {v} is not a vertex of O_{}", s.d));
        } else if !v.is_disjoint(&s.a_prime) {
            e2 = Some(format!("{name} = {v} meets A' = {}", s.a_prime));
        } else if family[..idx].contains(v) {
            e2 = Some(format!("{name} = {v} repeats an earlier member"));
        }
    }

    let mut e3 = None;
    for (i, u) in s.upsilons.iter().enumerate() {
        if u.degree() != ell {
            e3 = Some(format!("υ_{} has degree {} ≠ {ell}", i + 1, u.degree()));
        } else if !u.is_involution() || u.is_identity() {
            e3 = Some(format!("υ_{} = {u} is not an involution", i + 1));
        } else if u.parity() == Parity::Odd {
            e3 = Some(format!("υ_{} = {u} is odd", i + 1));
        }
        if e3.is_some() {
            break;
        }
    }
    let expected = alternating_order(ell);
    let order = if s.upsilons.iter().all(|u| u.degree() == ell) {
        group_order(ell, &s.upsilons).unwrap_or_default()
    } else {
        BigUint::default()
    };
    if e3.is_none() && order != expected {
        e3 = Some(format!("|⟨υ⟩| = {order} ≠ {expected}"));
    }
    if e3.is_none() {
        if let Some(u1) = s.upsilons.first() {
            if let Some(p) = u1.support().into_iter().find(|&p| !s.b.contains(p)) {
                e3 = Some(format!("supp(υ_1) contains {} ∉ B", p + 1));
            }
        }
    }

    let mut e4 = None;
    for (i, c) in s.c_list.iter().enumerate() {
        if !is_vertex(c) {
            e4 = Some(format!("C_{} = {c} is not a vertex", i + 1));
        } else if family.contains(c) {
            e4 = Some(format!("C_{} = {c} lies in 𝒜'", i + 1));
        } else if s.c_list[..i].contains(c) {
            e4 = Some(format!("C_{} = {c} repeats an earlier C", i + 1));
        }
        if e4.is_some() {
            break;
        }
    }
    if e4.is_none() {
        let mut all: Vec<(String, SubsetVertex)> = Vec::new();
        for (j, a) in s.a_list.iter().enumerate() {
            all.push((format!("A_{}", j + 1), *a));
        }
        all.push(("B".into(), s.b));
        for (i, c) in s.c_list.iter().enumerate() {
            all.push((format!("C_{}", i + 1), *c));
        }
        'outer: for x in 0..all.len() {
            for y in x + 1..all.len() {
                if all[x].1.is_disjoint(&all[y].1) {
                    e4 = Some(format!("edge {{{} = {}, {} = {}}} inside 𝒜' ∪ 𝒞", all[x].0, all[x].1, all[y].0, all[y].1));
                    break 'outer;
                }
            }
        }
    }
    if e4.is_none() && s.k > 0 && s.upsilons.len() == s.k {
        'windows: for (i, c) in s.c_list.iter().enumerate() {
            for t in 0..4 {
                let u = &s.upsilons[(i + t) % s.k];
                if let Some(p) = u.support().into_iter().find(|&p| !c.contains(p)) {
                    e4 = Some(format!("supp(υ_{}) contains {} ∉ C_{} = {c}", (i + t) % s.k + 1, p + 1, i + 1));
                    break 'windows;
                }
            }
        }
    }

    ScaffoldingReport {
        n: s.n,
        d: s.d,
        k: s.k,
        conditions: vec![
            Condition::new("E1", e1),
            Condition::new("E2", e2),
            Condition::new("E3", e3),
            Condition::new("E4", e4),
        ],
        upsilon_order: order.to_string(),
        alternating_order: expected.to_string(),
    }
}

/// The explicit `n`-scaffolding with `d = max(n+1, 9)` and `k = 2d-1`,
/// returned only if it verifies.
pub fn build_scaffolding(n: usize) -> Result<Scaffolding, ConstructionError> {
    if n == 0 {
        return Err(ConstructionError::BadN);
    }
    let s = Scaffolding::from_formulas(n, scaffolding_d(n));
    let report = verify_scaffolding(&s);
    if !report.passed() {
        return Err(ConstructionError::Scaffolding(failed_names(&report.conditions)));
    }
    Ok(s)
}

// ---------------------------------------------------------------------------
// Interlacing pairs

/// `({ζ_z}, {δ_D})`: involutions of `[2d-1]` indexed by `Z`, and involutions
/// of `Z` indexed by the vertices of `O_d`.
#[derive(Clone, Debug)]
pub struct InterlacingPair {
    odd: OddGraph,
    z_labels: Vec<String>,
    x_size: usize,
    zeta: Vec<Permutation>,
    delta: Vec<Permutation>,
}

impl PartialEq for InterlacingPair {
    fn eq(&self, other: &Self) -> bool {
        self.odd.d() == other.odd.d()
            && self.z_labels == other.z_labels
            && self.x_size == other.x_size
            && self.zeta == other.zeta
            && self.delta == other.delta
    }
}

impl InterlacingPair {
    /// `delta` lists the non-identity `δ_D` by vertex index.
    pub fn new(
        odd: OddGraph,
        z_labels: Vec<String>,
        x_size: usize,
        zeta: Vec<Permutation>,
        delta: &[(usize, Permutation)],
    ) -> Result<Self, ConstructionError> {
        let c = z_labels.len();
        if zeta.len() != c {
            return Err(ConstructionError::Precondition(format!("{} ζ's for |Z| = {c}", zeta.len())));
        }
        if x_size > c {
            return Err(ConstructionError::Precondition("|X| > |Z|".into()));
        }
        let mut full = vec![Permutation::identity(c); odd.vertex_count()];
        for (v, p) in delta {
            if *v >= full.len() || p.degree() != c {
                return Err(ConstructionError::Precondition(format!("bad δ entry at vertex {v}")));
            }
            full[*v] = p.clone();
        }
        Ok(InterlacingPair { odd, z_labels, x_size, zeta, delta: full })
    }

    /// `ζ ≡ id`, `δ ≡ id` on `|Z| = c`.
    pub fn trivial(d: usize, c: usize) -> Result<Self, ConstructionError> {
        let odd = build_odd(d)?;
        let ell = odd.ell();
        let labels = (1..=c).map(|i| format!("z{i}")).collect();
        Self::new(odd, labels, c, vec![Permutation::identity(ell); c], &[])
    }

    pub fn odd(&self) -> &OddGraph {
        &self.odd
    }

    pub fn d(&self) -> usize {
        self.odd.d()
    }

    pub fn ell(&self) -> usize {
        self.odd.ell()
    }

    pub fn z_count(&self) -> usize {
        self.z_labels.len()
    }

    pub fn z_labels(&self) -> &[String] {
        &self.z_labels
    }

    pub fn x_size(&self) -> usize {
        self.x_size
    }

    pub fn y_size(&self) -> usize {
        self.z_count() - self.x_size
    }

    pub fn zeta(&self, z: usize) -> &Permutation {
        &self.zeta[z]
    }

    pub fn delta(&self, v: usize) -> &Permutation {
        &self.delta[v]
    }

    pub fn zetas(&self) -> &[Permutation] {
        &self.zeta
    }

    /// Vertices with `δ_D ≠ id`, ascending.
    pub fn delta_support(&self) -> Vec<usize> {
        (0..self.delta.len()).filter(|&v| !self.delta[v].is_identity()).collect()
    }

    /// Replaces one `ζ_z`, without verification.
    pub fn set_zeta(&mut self, z: usize, p: Permutation) {
        self.zeta[z] = p;
    }

    /// Replaces one `δ_D`, without verification.
    pub fn set_delta(&mut self, v: usize, p: Permutation) {
        self.delta[v] = p;
    }

    /// `ζ_z` acting on vertex indices of `O_d`.
    pub fn zeta_vertex_perms(&self) -> Vec<Permutation> {
        self.zeta.iter().map(|p| self.odd.vertex_permutation(p)).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let zeta: BTreeMap<String, String> =
            self.z_labels.iter().zip(&self.zeta).map(|(l, p)| (l.clone(), p.to_string())).collect();
        let delta: BTreeMap<String, String> = self
            .delta_support()
            .into_iter()
            .map(|v| (self.odd.vertex(v).to_string(), self.delta[v].to_string()))
            .collect();
        json!({
            "d": self.d(),
            "X_size": self.x_size,
            "Y_size": self.y_size(),
            "Z": self.z_labels,
            "zeta": zeta,
            "delta": delta,
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self, ConstructionError> {
        let d = v["d"].as_u64().ok_or_else(|| ConstructionError::Parse("missing d".into()))? as usize;
        let x_size = v["X_size"].as_u64().ok_or_else(|| ConstructionError::Parse("missing X_size".into()))? as usize;
        let labels: Vec<String> = serde_json::from_value(v["Z"].clone())
            .map_err(|e| ConstructionError::Parse(format!("Z: {e}")))?;
        if !(2..=32).contains(&d) {
            return Err(ConstructionError::Parse(format!("d = {d} out of range")));
        }
        let odd = build_odd(d)?;
        let zeta_map: BTreeMap<String, String> = serde_json::from_value(v["zeta"].clone())
            .map_err(|e| ConstructionError::Parse(format!("zeta: {e}")))?;
        let mut zeta = Vec::with_capacity(labels.len());
        for l in &labels {
            let text = zeta_map.get(l).ok_or_else(|| ConstructionError::Parse(format!("no ζ for {l}")))?;
            zeta.push(Permutation::parse_cycles(text, odd.ell())?);
        }
        let delta_map: BTreeMap<String, String> = serde_json::from_value(v["delta"].clone())
            .map_err(|e| ConstructionError::Parse(format!("delta: {e}")))?;
        let mut delta = Vec::new();
        for (vertex, text) in delta_map {
            let idx = odd.parse_vertex(&vertex)?;
            delta.push((idx, Permutation::parse_cycles(&text, labels.len())?));
        }
        Self::new(odd, labels, x_size, zeta, &delta)
    }
}

/// Per-condition result of [`verify_interlacing`].
#[derive(Clone, Debug, Serialize)]
pub struct InterlacingReport {
    pub conditions: Vec<Condition>,
}

impl InterlacingReport {
    pub fn passed(&self) -> bool {
        all_pass(&self.conditions)
    }

    pub fn condition(&self, name: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

pub fn verify_interlacing(pair: &InterlacingPair) -> InterlacingReport {
    let ell = pair.ell();
    let c = pair.z_count();
    let odd = &pair.odd;
    let zl = |z: usize| pair.z_labels[z].clone();
    let vl = |v: usize| odd.vertex(v).to_string();

    let d1 = pair.zeta.iter().enumerate().find_map(|(z, p)| {
        if p.degree() != ell {
            Some(format!("ζ_{} has degree {} ≠ {ell}", zl(z), p.degree()))
        } else if !p.is_involution() {
            Some(format!("ζ_{} = {p} has ζ² ≠ 1", zl(z)))
        } else {
            None
        }
    });
    let d2 = pair.delta.iter().enumerate().find_map(|(v, p)| {
        if p.degree() != c {
            Some(format!("δ_{} has degree {} ≠ {c}", vl(v), p.degree()))
        } else if !p.is_involution() {
            Some(format!("δ_{} = {p} has δ² ≠ 1", vl(v)))
        } else {
            None
        }
    });
    if d1.is_some() || pair.zeta.iter().any(|p| p.degree() != ell) || pair.delta.iter().any(|p| p.degree() != c) {
        // Degrees are wrong: the remaining conditions are not meaningful.
        let skip = Some("skipped: D1/D2 degree failure".to_string());
        let d1 = d1.or_else(|| skip.clone());
        return InterlacingReport {
            conditions: vec![
                Condition::new("D1", d1),
                Condition::new("D2", d2.or_else(|| skip.clone())),
                Condition::new("D3", skip.clone()),
                Condition::new("D4", skip.clone()),
                Condition::new("D5", skip),
            ],
        };
    }

    let support = pair.delta_support();
    let mut d3 = None;
    'd3: for &v in &support {
        for &w in odd.neighbours(v) {
            if !pair.delta[w as usize].is_identity() {
                d3 = Some(format!(
                    "edge {{{}, {}}} with δ = {} and {}",
                    vl(v),
                    vl(w as usize),
                    pair.delta[v],
                    pair.delta[w as usize]
                ));
                break 'd3;
            }
        }
    }

    let vperm = pair.zeta_vertex_perms();
    let mut d4 = None;
    'd4: for &v in &support {
        let dv = odd.vertex(v);
        for z in pair.delta[v].support() {
            let z2 = pair.delta[v].apply(z);
            if vperm[z].apply(v) != vperm[z2].apply(v) {
                d4 = Some(format!(
                    "δ_{}({}) = {} but ζ_{}(D) = {} ≠ ζ_{}(D) = {}",
                    vl(v),
                    zl(z),
                    zl(z2),
                    zl(z),
                    vl(vperm[z].apply(v)),
                    zl(z2),
                    vl(vperm[z2].apply(v))
                ));
                break 'd4;
            }
            if let Some(p) = (0..ell).find(|&p| !dv.contains(p) && pair.zeta[z].apply(p) != pair.zeta[z2].apply(p)) {
                d4 = Some(format!(
                    "δ_{}({}) = {} but ζ_{} and ζ_{} differ at {} outside D",
                    vl(v),
                    zl(z),
                    zl(z2),
                    zl(z),
                    zl(z2),
                    p + 1
                ));
                break 'd4;
            }
        }
    }

    let mut d5 = None;
    'd5: for z in 0..c {
        for v in 0..odd.vertex_count() {
            let w = vperm[z].apply(v);
            if w != v && pair.delta[v].apply(z) != pair.delta[w].apply(z) {
                d5 = Some(format!(
                    "ζ_{}({}) = {} but δ_D({}) = {} ≠ δ_D'({}) = {}",
                    zl(z),
                    vl(v),
                    vl(w),
                    zl(z),
                    zl(pair.delta[v].apply(z)),
                    zl(z),
                    zl(pair.delta[w].apply(z))
                ));
                break 'd5;
            }
        }
    }

    InterlacingReport {
        conditions: vec![
            Condition::new("D1", d1),
            Condition::new("D2", d2),
            Condition::new("D3", d3),
            Condition::new("D4", d4),
            Condition::new("D5", d5),
        ],
    }
}

/// The `ξ/α/β/γ` construction on `Z = 𝒳 ⊔ 𝒴`, returned only if it verifies.
pub fn build_interlacing(gamma: &BmwPresentation, s: &Scaffolding) -> Result<InterlacingPair, ConstructionError> {
    let (m, n) = (gamma.m(), gamma.n());
    if s.n != n {
        return Err(ConstructionError::Precondition(format!("scaffolding is for n = {}, presentation has n = {n}", s.n)));
    }
    if m < 3 {
        return Err(ConstructionError::Precondition(format!("m = {m} < 3: β needs x_1, x_2, x_3")));
    }
    if s.k == m {
        return Err(ConstructionError::Precondition(format!("k = m = {m}")));
    }
    let report = verify_scaffolding(s);
    if !report.passed() {
        return Err(ConstructionError::Scaffolding(failed_names(&report.conditions)));
    }
    let (xi_local, alpha_local) = gamma.local_actions();
    if let Some(i) = xi_local.iter().position(|p| p.parity() == Parity::Odd) {
        return Err(ConstructionError::Precondition(format!("ξ'_{} = {} is odd", i + 1, xi_local[i])));
    }
    let odd = build_odd(s.d)?;
    let ell = odd.ell();
    let bar: Vec<usize> = (0..n)
        .map(|j| s.bar(j).ok_or_else(|| ConstructionError::Precondition(format!("A_{} has no odd one out", j + 1))))
        .collect::<Result<_, _>>()?;

    let c = m + s.k;
    let mut zeta = Vec::with_capacity(c);
    for xi in &xi_local {
        let mut images: Vec<u32> = (0..ell as u32).collect();
        for j in 0..n {
            images[bar[j]] = bar[xi.apply(j)] as u32;
        }
        zeta.push(Permutation::from_images(images)?);
    }
    zeta.extend(s.upsilons.iter().cloned());

    let mut delta: Vec<(usize, Permutation)> = Vec::new();
    let index = |v: &SubsetVertex, name: String| {
        odd.index_of(v).ok_or_else(|| ConstructionError::Precondition(format!("{name} = {v} is not a vertex")))
    };
    for (j, a) in s.a_list.iter().enumerate() {
        let mut images: Vec<u32> = (0..c as u32).collect();
        for i in 0..m {
            images[i] = alpha_local[j].apply(i) as u32;
        }
        delta.push((index(a, format!("A_{}", j + 1))?, Permutation::from_images(images)?));
    }
    let beta = Permutation::from_cycles(c, &[&[1, m + 1], &[2, 3]])?;
    delta.push((index(&s.b, "B".into())?, beta));
    for i in 0..s.k {
        let y = |t: usize| m + (i + t) % s.k + 1;
        let gamma_i = Permutation::from_cycles(c, &[&[y(0), y(1)], &[y(2), y(3)]])?;
        delta.push((index(&s.c_list[i], format!("C_{}", i + 1))?, gamma_i));
    }
    let mut seen = HashSet::new();
    for (v, _) in &delta {
        if !seen.insert(*v) {
            return Err(ConstructionError::Precondition(format!("vertex {} carries two δ's", odd.vertex(*v))));
        }
    }

    let mut labels: Vec<String> = (1..=m).map(|i| format!("x{i}")).collect();
    labels.extend((1..=s.k).map(|i| format!("y{i}")));
    let pair = InterlacingPair::new(odd, labels, m, zeta, &delta)?;
    let report = verify_interlacing(&pair);
    if !report.passed() {
        return Err(ConstructionError::Interlacing(failed_names(&report.conditions)));
    }
    Ok(pair)
}

/// A small non-trivial pair at `d = 4`: `Z = {z1..z4}`, `δ_{D0} = (z1 z2)`
/// at `D0 = {1,2,3}`, `ζ_{z1} = (1 2)`, `ζ_{z2} = (1 3)`,
/// `ζ_{z3} = (4 5)(6 7)`, `ζ_{z4} = id`.
pub fn small_nontrivial_pair() -> InterlacingPair {
    let odd = build_odd(4).expect("d = 4");
    let zeta = vec![
        Permutation::from_cycles(7, &[&[1, 2]]).expect("cycle"),
        Permutation::from_cycles(7, &[&[1, 3]]).expect("cycle"),
        Permutation::from_cycles(7, &[&[4, 5], &[6, 7]]).expect("cycle"),
        Permutation::identity(7),
    ];
    let d0 = odd.index_of(&SubsetVertex::from_elements(&[1, 2, 3])).expect("vertex");
    let delta = vec![(d0, Permutation::from_cycles(4, &[&[1, 2]]).expect("cycle"))];
    let labels = (1..=4).map(|i| format!("z{i}")).collect();
    InterlacingPair::new(odd, labels, 4, zeta, &delta).expect("consistent sizes")
}

// ---------------------------------------------------------------------------
// Presentations

/// A presentation whose generators are involutions and whose other relators
/// have length four: commutators `[a, b]` and squares `a b c d`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticePresentation {
    pub generators: Vec<String>,
    pub involutions: Vec<u32>,
    pub commutations: Vec<(u32, u32)>,
    pub squares: Vec<[u32; 4]>,
}

impl LatticePresentation {
    pub fn generator_count(&self) -> usize {
        self.generators.len()
    }

    /// The relation counts `(involutions, commutations, squares)`.
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.involutions.len(), self.commutations.len(), self.squares.len())
    }

    /// The BMW presentation as a square presentation on `x_1..x_m, a_1..a_n`.
    pub fn from_bmw(p: &BmwPresentation) -> Self {
        let (m, n) = (p.m(), p.n());
        let mut generators: Vec<String> = (1..=m).map(|i| format!("x{i}")).collect();
        generators.extend((1..=n).map(|j| format!("a{j}")));
        let squares = p
            .relations()
            .into_iter()
            .map(|[i, j, i2, j2]| [i as u32, (m + j) as u32, i2 as u32, (m + j2) as u32])
            .collect();
        LatticePresentation { generators, involutions: (0..(m + n) as u32).collect(), commutations: vec![], squares }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let one = |x: u32| x as usize + 1;
        json!({
            "generators": self.generators,
            "relations": {
                "involutions": self.involutions.iter().map(|&x| one(x)).collect::<Vec<_>>(),
                "commutations": self.commutations.iter().map(|&(a, b)| [one(a), one(b)]).collect::<Vec<_>>(),
                "squares": self.squares.iter().map(|s| s.map(one)).collect::<Vec<_>>(),
            }
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self, ConstructionError> {
        let parse = |e: serde_json::Error| ConstructionError::Parse(e.to_string());
        let generators: Vec<String> = serde_json::from_value(v["generators"].clone()).map_err(parse)?;
        let r = &v["relations"];
        let involutions: Vec<usize> = serde_json::from_value(r["involutions"].clone()).map_err(parse)?;
        let commutations: Vec<[usize; 2]> = serde_json::from_value(r["commutations"].clone()).map_err(parse)?;
        let squares: Vec<[usize; 4]> = serde_json::from_value(r["squares"].clone()).map_err(parse)?;
        let g = generators.len();
        let zero = |x: usize| {
            if x == 0 || x > g {
                Err(ConstructionError::Parse(format!("generator index {x} out of range")))
            } else {
                Ok((x - 1) as u32)
            }
        };
        Ok(LatticePresentation {
            involutions: involutions.into_iter().map(zero).collect::<Result<_, _>>()?,
            commutations: commutations
                .into_iter()
                .map(|[a, b]| Ok((zero(a)?, zero(b)?)))
                .collect::<Result<_, ConstructionError>>()?,
            squares: squares
                .into_iter()
                .map(|s| Ok([zero(s[0])?, zero(s[1])?, zero(s[2])?, zero(s[3])?]))
                .collect::<Result<_, ConstructionError>>()?,
            generators,
        })
    }
}

/// The presentation of `Λ`, after checking D1–D5.
pub fn emit_lattice(pair: &InterlacingPair) -> Result<LatticePresentation, ConstructionError> {
    let report = verify_interlacing(pair);
    if !report.passed() {
        return Err(ConstructionError::Interlacing(failed_names(&report.conditions)));
    }
    Ok(emit_lattice_unchecked(pair))
}

/// The presentation of `Λ` for any pair, verified or not. Generators are
/// `Z` in order, then `V(O_d)` in colex order.
pub fn emit_lattice_unchecked(pair: &InterlacingPair) -> LatticePresentation {
    let c = pair.z_count();
    let odd = &pair.odd;
    let nv = odd.vertex_count();
    let mut generators = pair.z_labels.clone();
    generators.extend(odd.vertices().iter().map(|v| v.to_string()));
    let g = |v: usize| (c + v) as u32;
    let commutations =
        odd.complex().edges().into_iter().map(|(a, b)| (g(a), g(b))).collect::<Vec<_>>();
    let vperm = pair.zeta_vertex_perms();
    let mut squares = Vec::with_capacity(c * nv);
    for z in 0..c {
        for v in 0..nv {
            squares.push([z as u32, g(v), pair.delta[v].apply(z) as u32, g(vperm[z].apply(v))]);
        }
    }
    LatticePresentation { generators, involutions: (0..(c + nv) as u32).collect(), commutations, squares }
}

// ---------------------------------------------------------------------------
// Corner tables and the link

fn corner_key(x: u32, y: u32) -> u64 {
    (x as u64) << 32 | y as u64
}

/// The least of the eight readings of a 4-cycle of labels.
pub fn square_class(w: [u32; 4]) -> [u32; 4] {
    let mut best = w;
    for r in 0..4 {
        let rot = [w[r], w[(r + 1) % 4], w[(r + 2) % 4], w[(r + 3) % 4]];
        let rev = [w[r], w[(r + 3) % 4], w[(r + 2) % 4], w[(r + 1) % 4]];
        best = best.min(rot).min(rev);
    }
    best
}

/// Corner transitions of a square presentation. At a vertex with a square
/// through the edges `x` and `y`, crossing `x` carries `y` to the parallel
/// edge `across(x, y)`.
#[derive(Clone, Debug)]
pub struct CornerTable {
    gens: usize,
    across: HashMap<u64, u32>,
    /// Corners claimed by two different squares.
    pub conflicts: Vec<(u32, u32)>,
}

impl CornerTable {
    pub fn from_presentation(p: &LatticePresentation) -> CornerTable {
        let mut t = CornerTable { gens: p.generator_count(), across: HashMap::new(), conflicts: Vec::new() };
        let words = p.commutations.iter().map(|&(a, b)| [a, b, a, b]).chain(p.squares.iter().copied());
        for w in words {
            for r in 0..4 {
                let (prev, cur, next) = (w[(r + 3) % 4], w[r], w[(r + 1) % 4]);
                t.insert(cur, prev, next);
                t.insert(cur, next, prev);
            }
        }
        t
    }

    fn insert(&mut self, x: u32, y: u32, value: u32) {
        match self.across.insert(corner_key(x, y), value) {
            Some(old) if old != value => {
                self.across.insert(corner_key(x, y), old);
                self.conflicts.push((x, y));
            }
            _ => {}
        }
    }

    pub fn generator_count(&self) -> usize {
        self.gens
    }

    #[inline]
    pub fn across(&self, x: u32, y: u32) -> Option<u32> {
        self.across.get(&corner_key(x, y)).copied()
    }

    pub fn has_corner(&self, x: u32, y: u32) -> bool {
        self.across.contains_key(&corner_key(x, y))
    }

    /// Crossing `x` twice returns every edge to itself.
    pub fn is_involutive(&self) -> bool {
        self.across.iter().all(|(&k, &y2)| {
            let x = (k >> 32) as u32;
            self.across(x, y2) == Some(k as u32)
        })
    }

    /// Unordered link edges `(x, y)` with `x < y`, sorted.
    pub fn link_edges(&self) -> Vec<(u32, u32)> {
        let mut e: Vec<(u32, u32)> = self
            .across
            .keys()
            .map(|&k| ((k >> 32) as u32, k as u32))
            .filter(|(x, y)| x < y)
            .collect();
        e.sort_unstable();
        e
    }
}

/// A missing face of a candidate 3-cube `{z, D, D'}`.
#[derive(Clone, Debug, Serialize)]
pub struct MissingFace {
    pub triangle: [String; 3],
    pub square: [String; 4],
}

/// Result of [`check_link`].
#[derive(Clone, Debug, Serialize)]
pub struct LinkReport {
    pub vertices: usize,
    pub edges: usize,
    pub join_edges: usize,
    pub involutions_complete: bool,
    pub corner_conflicts: usize,
    pub missing_edges: Vec<[String; 2]>,
    pub extra_edges: Vec<[String; 2]>,
    pub edges_match_join: bool,
    pub triangles_checked: usize,
    pub missing_faces: Vec<MissingFace>,
    pub missing_face_count: usize,
    /// Triangles whose 2-skeleton does not close through the corner table.
    pub unclosed_cubes: usize,
    pub flag: bool,
    /// The isomorphism onto `Z ∗ L`: the identity on generator labels.
    pub isomorphism: Option<String>,
}

impl LinkReport {
    pub fn passed(&self) -> bool {
        self.involutions_complete
            && self.corner_conflicts == 0
            && self.edges_match_join
            && self.missing_face_count == 0
            && self.unclosed_cubes == 0
            && self.flag
    }
}

const WITNESS_CAP: usize = 20;

/// Builds the link of the base vertex of the presentation complex and
/// compares it with `Z ∗ L`. Every triangle `{z, D, D'}` must be filled by
/// the six squares of a 3-cube, oriented at the endpoint with `δ = id`.
pub fn check_link(p: &LatticePresentation, pair: &InterlacingPair) -> LinkReport {
    let c = pair.z_count();
    let odd = &pair.odd;
    let nv = odd.vertex_count();
    let gens = p.generator_count();
    let label = |x: u32| p.generators.get(x as usize).cloned().unwrap_or_else(|| format!("#{x}"));
    let g = |v: usize| (c + v) as u32;

    let inv: HashSet<u32> = p.involutions.iter().copied().collect();
    let involutions_complete = (0..gens as u32).all(|x| inv.contains(&x));
    let corners = CornerTable::from_presentation(p);
    let edges = corners.link_edges();
    let edge_set: HashSet<(u32, u32)> = edges.iter().copied().collect();

    let mut expected: HashSet<(u32, u32)> = HashSet::new();
    for z in 0..c as u32 {
        for v in 0..nv {
            expected.insert((z, g(v)));
        }
    }
    for (a, b) in odd.complex().edges() {
        expected.insert((g(a), g(b)));
    }
    let mut missing_edges = Vec::new();
    let mut extra_edges = Vec::new();
    let mut n_missing = 0;
    let mut n_extra = 0;
    for &(a, b) in &expected {
        if !edge_set.contains(&(a, b)) {
            n_missing += 1;
            if missing_edges.len() < WITNESS_CAP {
                missing_edges.push([label(a), label(b)]);
            }
        }
    }
    for &(a, b) in &edges {
        if !expected.contains(&(a, b)) {
            n_extra += 1;
            if extra_edges.len() < WITNESS_CAP {
                extra_edges.push([label(a), label(b)]);
            }
        }
    }
    missing_edges.sort();
    extra_edges.sort();
    let edges_match_join = gens == c + nv && n_missing == 0 && n_extra == 0;

    let relations: HashSet<[u32; 4]> = p
        .commutations
        .iter()
        .map(|&(a, b)| square_class([a, b, a, b]))
        .chain(p.squares.iter().map(|&s| square_class(s)))
        .collect();
    let vperm = pair.zeta_vertex_perms();
    let mut missing_faces = Vec::new();
    let mut missing_face_count = 0;
    let mut unclosed = 0;
    let mut triangles = 0;
    for z in 0..c {
        for (a, b) in odd.complex().edges() {
            triangles += 1;
            // Orient so that δ_{D'} = id when possible.
            let (dv, dpv) = if pair.delta[b].is_identity() { (a, b) } else { (b, a) };
            let z2 = pair.delta[dv].apply(z);
            let dt = vperm[z].apply(dv);
            let dtp = vperm[z].apply(dpv);
            let (zz, zz2) = (z as u32, z2 as u32);
            let faces = [
                [g(dv), g(dpv), g(dv), g(dpv)],
                [zz, g(dv), zz2, g(dt)],
                [zz, g(dpv), zz, g(dtp)],
                [g(dt), g(dtp), g(dt), g(dtp)],
                [zz2, g(dpv), zz2, g(dtp)],
                [zz, g(dv), zz2, g(dt)],
            ];
            let mut bad = false;
            for f in faces {
                if !relations.contains(&square_class(f)) {
                    bad = true;
                    if missing_faces.len() < WITNESS_CAP {
                        missing_faces.push(MissingFace {
                            triangle: [label(zz), label(g(dv)), label(g(dpv))],
                            square: f.map(label),
                        });
                    }
                    break;
                }
            }
            if bad {
                missing_face_count += 1;
            }
            if !cube_closes(&corners, [zz, g(a), g(b)]) {
                unclosed += 1;
            }
        }
    }
    let flag = edges_match_join && odd.complex().is_triangle_free() && missing_face_count == 0 && unclosed == 0;
    let isomorphism = edges_match_join.then(|| "identity on generator labels".to_string());
    LinkReport {
        vertices: gens,
        edges: edges.len(),
        join_edges: expected.len(),
        involutions_complete,
        corner_conflicts: corners.conflicts.len(),
        missing_edges,
        extra_edges,
        edges_match_join,
        triangles_checked: triangles,
        missing_faces,
        missing_face_count,
        unclosed_cubes: unclosed,
        flag,
        isomorphism,
    }
}

/// Transports each edge of a triangle around the other two in both orders;
/// the 3-cube closes when both orders agree for every edge.
fn cube_closes(t: &CornerTable, tri: [u32; 3]) -> bool {
    for k in 0..3 {
        let (a, b, c) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
        let via = |p: u32, q: u32| -> Option<u32> {
            let q1 = t.across(p, q)?;
            let c1 = t.across(p, c)?;
            t.across(q1, c1)
        };
        match (via(a, b), via(b, a)) {
            (Some(x), Some(y)) if x == y => {}
            _ => return false,
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Development

/// A finite ball of the universal cover of a square presentation, grown by
/// breadth-first search in the graph metric.
#[derive(Clone, Debug)]
pub struct CornerComplex {
    pub corners: CornerTable,
    gens: usize,
    radius: usize,
    neighbours: Vec<u32>,
    dist: Vec<u8>,
    parent: Vec<(u32, u32)>,
    levels: Vec<Vec<u32>>,
    /// Identifications the corner table demanded but the ball contradicted.
    pub conflicts: usize,
}

impl CornerComplex {
    pub fn vertex_count(&self) -> usize {
        self.dist.len()
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn generator_count(&self) -> usize {
        self.gens
    }

    pub fn sphere_sizes(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.len()).collect()
    }

    pub fn dist(&self, v: u32) -> usize {
        self.dist[v as usize] as usize
    }

    #[inline]
    pub fn neighbour(&self, v: u32, s: u32) -> u32 {
        self.neighbours[v as usize * self.gens + s as usize]
    }

    /// A geodesic word from the base, read from the BFS tree.
    pub fn word(&self, mut v: u32) -> Vec<u32> {
        let mut w = Vec::new();
        while v != 0 {
            let (u, s) = self.parent[v as usize];
            w.push(s);
            v = u;
        }
        w.reverse();
        w
    }

    fn common_neighbour(&self, a: u32, b: u32, avoid: &[u32]) -> Option<u32> {
        let nb: HashSet<u32> = (0..self.gens as u32).map(|s| self.neighbour(b, s)).collect();
        (0..self.gens as u32)
            .map(|s| self.neighbour(a, s))
            .find(|&c| c != NONE && !avoid.contains(&c) && nb.contains(&c))
    }

    /// The link at `v` read off the developed 1-skeleton: edges are 4-cycles
    /// through `v`, triangles are closed 3-cubes. Triangles are only
    /// available when `dist(v) + 3 ≤ radius`.
    pub fn link_at(&self, v: u32) -> Option<(Vec<(u32, u32)>, Option<Vec<[u32; 3]>>)> {
        let dv = self.dist(v);
        if dv + 2 > self.radius {
            return None;
        }
        let g = self.gens as u32;
        let mut square_at: HashMap<(u32, u32), u32> = HashMap::new();
        let mut edges = Vec::new();
        for x in 0..g {
            for y in x + 1..g {
                let (a, b) = (self.neighbour(v, x), self.neighbour(v, y));
                if let Some(p) = self.common_neighbour(a, b, &[v]) {
                    square_at.insert((x, y), p);
                    edges.push((x, y));
                }
            }
        }
        if dv + 3 > self.radius {
            return Some((edges, None));
        }
        let adj: HashSet<(u32, u32)> = edges.iter().copied().collect();
        let mut tris = Vec::new();
        for &(x, y) in &edges {
            for z in y + 1..g {
                if adj.contains(&(x, z)) && adj.contains(&(y, z)) {
                    let pxy = square_at[&(x, y)];
                    let pxz = square_at[&(x, z)];
                    let pyz = square_at[&(y, z)];
                    let avoid = [self.neighbour(v, x), self.neighbour(v, y), self.neighbour(v, z)];
                    let far = self.common_neighbour(pxy, pxz, &avoid);
                    let closed = far.is_some_and(|f| {
                        (0..g).any(|s| self.neighbour(pyz, s) == f)
                    });
                    if closed {
                        tris.push([x, y, z]);
                    }
                }
            }
        }
        Some((edges, Some(tris)))
    }

    /// Graphviz text for the developed 1-skeleton, edges labelled by generator.
    pub fn to_dot(&self, labels: &[String]) -> String {
        let mut out = String::from("graph developed {\n");
        for v in 0..self.vertex_count() as u32 {
            for s in 0..self.gens as u32 {
                let w = self.neighbour(v, s);
                if w != NONE && v < w {
                    let l = labels.get(s as usize).map(String::as_str).unwrap_or("?");
                    out.push_str(&format!("  {v} -- {w} [label=\"{l}\"];\n"));
                }
            }
        }
        out.push_str("}\n");
        out
    }

    /// Compares the link at every vertex with `dist ≤ radius - 2` against
    /// `expected` (label-preserving). Triangles are compared where available.
    pub fn interior_links(&self, expected: &FlagComplex) -> DevelopedLinkReport {
        let mut exp_edges: Vec<(u32, u32)> = expected.edges().into_iter().map(|(a, b)| (a as u32, b as u32)).collect();
        exp_edges.sort_unstable();
        let mut exp_tris: Vec<[u32; 3]> = expected
            .simplices()
            .into_iter()
            .filter(|s| s.len() == 3)
            .map(|s| [s[0] as u32, s[1] as u32, s[2] as u32])
            .collect();
        exp_tris.sort_unstable();
        let mut report = DevelopedLinkReport::default();
        for v in 0..self.vertex_count() as u32 {
            let Some((mut edges, tris)) = self.link_at(v) else { continue };
            report.edge_checked += 1;
            edges.sort_unstable();
            let mut ok = edges == exp_edges;
            if let Some(mut t) = tris {
                report.triangle_checked += 1;
                t.sort_unstable();
                ok &= t == exp_tris;
            }
            if !ok {
                report.mismatches += 1;
                if report.first_mismatch.is_none() {
                    report.first_mismatch = Some(v);
                }
            }
        }
        report
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct DevelopedLinkReport {
    /// Vertices whose link edges were compared.
    pub edge_checked: usize,
    /// Vertices whose link triangles were also compared.
    pub triangle_checked: usize,
    pub mismatches: usize,
    pub first_mismatch: Option<u32>,
}

impl DevelopedLinkReport {
    pub fn passed(&self) -> bool {
        self.mismatches == 0 && self.edge_checked > 0
    }
}

pub const DEFAULT_DEVELOP_CAP: usize = 4_000_000;

/// Grows the ball of radius `radius` about the identity. A new vertex
/// `w = u·s` is identified with every `x·e` that closes a square with it:
/// the down-neighbours of a vertex are pairwise joined by squares.
pub fn develop_ball(p: &LatticePresentation, radius: usize, cap: usize) -> Result<CornerComplex, ConstructionError> {
    let corners = CornerTable::from_presentation(p);
    let g = p.generator_count();
    let mut cc = CornerComplex {
        corners,
        gens: g,
        radius,
        neighbours: vec![NONE; g],
        dist: vec![0],
        parent: vec![(NONE, NONE)],
        levels: vec![vec![0]],
        conflicts: 0,
    };
    for r in 0..radius {
        let mut next = Vec::new();
        let level = cc.levels[r].clone();
        for &u in &level {
            for s in 0..g as u32 {
                if cc.neighbour(u, s) != NONE {
                    continue;
                }
                let w = cc.dist.len() as u32;
                if w as usize >= cap {
                    return Err(ConstructionError::Budget(cap));
                }
                cc.dist.push((r + 1) as u8);
                cc.parent.push((u, s));
                cc.neighbours.extend(std::iter::repeat(NONE).take(g));
                cc.neighbours[u as usize * g + s as usize] = w;
                cc.neighbours[w as usize * g + s as usize] = u;
                next.push(w);
                if r == 0 {
                    continue;
                }
                let mut queue = vec![(u, s)];
                while let Some((p0, t)) = queue.pop() {
                    for e in 0..g as u32 {
                        let q0 = cc.neighbour(p0, e);
                        if q0 == NONE || cc.dist(q0) + 1 != r {
                            continue;
                        }
                        let (Some(e2), Some(t2)) = (cc.corners.across(t, e), cc.corners.across(e, t)) else {
                            continue;
                        };
                        let x = cc.neighbour(q0, t2);
                        if x == NONE || cc.dist(x) != r {
                            cc.conflicts += 1;
                            continue;
                        }
                        let slot_x = x as usize * g + e2 as usize;
                        let slot_w = w as usize * g + e2 as usize;
                        match cc.neighbours[slot_x] {
                            NONE => {
                                if cc.neighbours[slot_w] != NONE && cc.neighbours[slot_w] != x {
                                    cc.conflicts += 1;
                                    continue;
                                }
                                cc.neighbours[slot_x] = w;
                                cc.neighbours[slot_w] = x;
                                queue.push((x, e2));
                            }
                            y if y == w => {}
                            _ => cc.conflicts += 1,
                        }
                    }
                }
            }
        }
        cc.levels.push(next);
    }
    Ok(cc)
}

/// Sphere sizes of `X_1 × X_2` in the graph metric, from the sphere sizes of
/// the factors.
pub fn product_sphere_sizes(a: &[usize], b: &[usize], radius: usize) -> Vec<u128> {
    (0..=radius)
        .map(|r| {
            (0..=r)
                .filter(|&i| i < a.len() && r - i < b.len())
                .map(|i| a[i] as u128 * b[r - i] as u128)
                .sum()
        })
        .collect()
}

/// Sphere sizes of the product of Davis balls `X_Z × X_L` for a pair.
pub fn product_oracle(pair: &InterlacingPair, radius: usize) -> Result<Vec<u128>, ConstructionError> {
    let tree = build_ball(&RacgPresentation::free(pair.z_count()), radius)?;
    let xl = build_ball(&RacgPresentation::from_complex(pair.odd.complex()), radius)?;
    Ok(product_sphere_sizes(&tree.sphere_sizes(), &xl.sphere_sizes(), radius))
}

/// `Z ∗ L` with `Z` first, labelled like the lattice generators.
pub fn expected_link(pair: &InterlacingPair) -> FlagComplex {
    let z = FlagComplex::new(pair.z_labels.clone());
    join(&z, pair.odd.complex())
}

/// True iff the development is label-preservingly isomorphic to the Davis
/// ball of the same radius for `pres` (same generator order): every
/// developed vertex maps to the normal form of its word, bijectively, and
/// every edge is preserved.
pub fn matches_davis_ball(dev: &CornerComplex, pres: &RacgPresentation, ball: &DavisBall) -> bool {
    if dev.vertex_count() != ball.vertex_count() || pres.rank() != dev.gens {
        return false;
    }
    let mut map = vec![NONE; dev.vertex_count()];
    let mut hit = vec![false; ball.vertex_count()];
    for v in 0..dev.vertex_count() as u32 {
        let Ok(nf) = pres.normalize(&dev.word(v)) else { return false };
        let Some(b) = ball.table.lookup(nf.word()) else { return false };
        if std::mem::replace(&mut hit[b as usize], true) {
            return false;
        }
        map[v as usize] = b;
    }
    for v in 0..dev.vertex_count() as u32 {
        for s in 0..dev.gens as u32 {
            let w = dev.neighbour(v, s);
            let expected = ball.table.neighbour(map[v as usize], s);
            let got = if w == NONE { NONE } else { map[w as usize] };
            if got != expected {
                return false;
            }
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Portage projections

/// How many reduced expressions per vertex the portage evaluator compares.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PortageMode {
    /// The normal form and one commutation of it, when there is one.
    SpotCheck,
    /// Every reduced expression.
    Full,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct PortageStats {
    pub vertices: usize,
    pub expressions: usize,
}

/// All words obtained from `word` by swapping adjacent commuting letters.
pub fn reduced_expressions(pres: &RacgPresentation, word: &[u32]) -> Vec<Vec<u32>> {
    let mut seen: HashSet<Vec<u32>> = HashSet::new();
    let mut stack = vec![word.to_vec()];
    seen.insert(word.to_vec());
    while let Some(w) = stack.pop() {
        for i in 0..w.len().saturating_sub(1) {
            if w[i] != w[i + 1] && pres.commutes(w[i], w[i + 1]) {
                let mut v = w.clone();
                v.swap(i, i + 1);
                if seen.insert(v.clone()) {
                    stack.push(v);
                }
            }
        }
    }
    let mut out: Vec<Vec<u32>> = seen.into_iter().collect();
    out.sort();
    out
}

/// Image of the vertex with the given reduced expression under
/// `pr_{X_L}(z)`: `z·D = ζ_z(D)·δ_D(z)`, applied letter by letter.
fn portage_walk(king: &KingBall, pair: &InterlacingPair, vperm: &[Permutation], z: usize, word: &[u32]) -> u32 {
    let mut carried = z;
    let mut cur = 0u32;
    for &d in word {
        let t = vperm[carried].apply(d as usize) as u32;
        cur = king.neighbour(cur, t);
        if cur == NONE {
            return NONE;
        }
        carried = pair.delta[d as usize].apply(carried);
    }
    cur
}

/// `pr_{X_L}` of a word over `Z` on a king ball of `X_L` (generator index =
/// vertex index of `O_d`). Each vertex is evaluated along its normal form and
/// along further reduced expressions per `mode`; disagreement is an error.
pub fn portage_projection(
    pair: &InterlacingPair,
    z_word: &[usize],
    king: &KingBall,
    mode: PortageMode,
) -> Result<(BallAutomorphism, PortageStats), ConstructionError> {
    if king.pres.rank() != pair.odd.vertex_count() {
        return Err(ConstructionError::Precondition("king ball is not over O_d".into()));
    }
    if let Some(&z) = z_word.iter().find(|&&z| z >= pair.z_count()) {
        return Err(ConstructionError::Precondition(format!("z index {z} out of range")));
    }
    let vperm = pair.zeta_vertex_perms();
    let n = king.vertex_count();
    let mut images: Vec<u32> = (0..n as u32).collect();
    let mut stats = PortageStats::default();
    for &z in z_word.iter().rev() {
        let mut single = vec![NONE; n];
        for v in 0..n as u32 {
            let nf = king.word(v);
            let img = portage_walk(king, pair, &vperm, z, nf);
            if img == NONE {
                return Err(ConstructionError::Portage(format!(
                    "image of {} under {} leaves the ball",
                    king.pres.format_word(nf),
                    pair.z_labels[z]
                )));
            }
            let alternatives = match mode {
                PortageMode::Full => reduced_expressions(&king.pres, nf),
                PortageMode::SpotCheck => {
                    let swap = (0..nf.len().saturating_sub(1)).find(|&i| king.pres.commutes(nf[i], nf[i + 1]));
                    swap.map(|i| {
                        let mut w = nf.to_vec();
                        w.swap(i, i + 1);
                        vec![w]
                    })
                    .unwrap_or_default()
                }
            };
            for w in &alternatives {
                stats.expressions += 1;
                if portage_walk(king, pair, &vperm, z, w) != img {
                    return Err(ConstructionError::Portage(format!(
                        "{} sends {} and {} to different vertices",
                        pair.z_labels[z],
                        king.pres.format_word(nf),
                        king.pres.format_word(w)
                    )));
                }
            }
            stats.vertices += 1;
            single[v as usize] = img;
        }
        for x in images.iter_mut() {
            *x = single[*x as usize];
        }
    }
    let g = BallAutomorphism::from_images(king, images)?;
    Ok((g, stats))
}

/// `pr_{X_Z}` of a word over `V(L)` on a ball of the tree `X_Z`:
/// `D·y = δ_D(y)·ζ_y(D)`, applied letter by letter.
pub fn portage_tree(pair: &InterlacingPair, d_word: &[usize], tree: &DavisBall) -> Result<Permutation, ConstructionError> {
    if tree.pres.rank() != pair.z_count() {
        return Err(ConstructionError::Precondition("tree ball is not over Z".into()));
    }
    let vperm = pair.zeta_vertex_perms();
    let n = tree.vertex_count();
    let mut images: Vec<u32> = (0..n as u32).collect();
    for &d in d_word.iter().rev() {
        let mut single = vec![NONE; n];
        for v in 0..n as u32 {
            let mut carried = d;
            let mut cur = 0u32;
            for &y in tree.table.word(v) {
                cur = tree.table.neighbour(cur, pair.delta[carried].apply(y as usize) as u32);
                if cur == NONE {
                    return Err(ConstructionError::Portage("tree image leaves the ball".into()));
                }
                carried = vperm[y as usize].apply(carried);
            }
            single[v as usize] = cur;
        }
        for x in images.iter_mut() {
            *x = single[*x as usize];
        }
    }
    Permutation::from_images(images).map_err(|e| ConstructionError::Portage(format!("not a bijection: {e}")))
}

// ---------------------------------------------------------------------------
// Local actions and the embedding of Γ

#[derive(Clone, Debug, Serialize)]
pub struct LocalActionReport {
    pub z_size: usize,
    pub ell: usize,
    /// `|⟨ζ_z⟩|` and `(2d-1)!/2`.
    pub zeta_order: String,
    pub zeta_expected: String,
    /// `|⟨δ_D⟩|` and `|Z|!/2`.
    pub delta_order: String,
    pub delta_expected: String,
    pub zeta_alternating: bool,
    pub delta_alternating: bool,
    /// `⟨α_j⟩ = Alt(𝒳)`, when the scaffolding is known.
    pub alpha_alternating: Option<bool>,
    /// `⟨γ_i⟩ = Alt(𝒴)`.
    pub gamma_alternating: Option<bool>,
    /// `β` is even and does not preserve `𝒳`.
    pub beta_outside_product: Option<bool>,
}

impl LocalActionReport {
    pub fn passed(&self) -> bool {
        self.zeta_alternating
            && self.delta_alternating
            && self.alpha_alternating != Some(false)
            && self.gamma_alternating != Some(false)
            && self.beta_outside_product != Some(false)
    }
}

fn restrict(p: &Permutation, lo: usize, hi: usize) -> Option<Permutation> {
    let images: Vec<u32> = (lo..hi).map(|i| p.apply(i)).map(|j| j.wrapping_sub(lo) as u32).collect();
    if images.iter().any(|&j| j as usize >= hi - lo) {
        return None;
    }
    Permutation::from_images(images).ok()
}

fn is_alternating(gens: &[Permutation], degree: usize) -> Result<(bool, BigUint), ConstructionError> {
    let order = group_order(degree, gens)?;
    let even = gens.iter().all(|g| g.parity() == Parity::Even);
    Ok((even && order == alternating_order(degree), order))
}

/// Orders of the two local actions of `Λ`, by stabilizer chains.
pub fn local_action_report(pair: &InterlacingPair, s: Option<&Scaffolding>) -> Result<LocalActionReport, ConstructionError> {
    let ell = pair.ell();
    let c = pair.z_count();
    let (zeta_alt, zeta_order) = is_alternating(&pair.zeta, ell)?;
    let mut deltas: Vec<Permutation> = pair.delta_support().into_iter().map(|v| pair.delta[v].clone()).collect();
    deltas.sort_by(|a, b| a.images().cmp(b.images()));
    deltas.dedup();
    let (delta_alt, delta_order) = is_alternating(&deltas, c)?;
    let (mut alpha_alt, mut gamma_alt, mut beta_out) = (None, None, None);
    if let Some(s) = s {
        let m = pair.x_size;
        let idx = |v: &SubsetVertex| pair.odd.index_of(v);
        let alphas: Option<Vec<Permutation>> =
            s.a_list.iter().map(|a| idx(a).and_then(|v| restrict(&pair.delta[v], 0, m))).collect();
        alpha_alt = Some(match alphas {
            Some(a) => is_alternating(&a, m)?.0,
            None => false,
        });
        let gammas: Option<Vec<Permutation>> =
            s.c_list.iter().map(|cv| idx(cv).and_then(|v| restrict(&pair.delta[v], m, c))).collect();
        gamma_alt = Some(match gammas {
            Some(g) => is_alternating(&g, c - m)?.0,
            None => false,
        });
        beta_out = Some(match idx(&s.b) {
            Some(v) => {
                let beta = &pair.delta[v];
                beta.parity() == Parity::Even && (0..m).any(|i| beta.apply(i) >= m)
            }
            None => false,
        });
    }
    Ok(LocalActionReport {
        z_size: c,
        ell,
        zeta_order: zeta_order.to_string(),
        zeta_expected: alternating_order(ell).to_string(),
        delta_order: delta_order.to_string(),
        delta_expected: alternating_order(c).to_string(),
        zeta_alternating: zeta_alt,
        delta_alternating: delta_alt,
        alpha_alternating: alpha_alt,
        gamma_alternating: gamma_alt,
        beta_outside_product: beta_out,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct EmbeddingReport {
    pub relations_checked: usize,
    pub failures: Vec<String>,
    pub failure_count: usize,
    /// `x_i ↦ x_i`, `a_j ↦ A_j` is injective.
    pub injective: bool,
    /// Every BMW corner transition matches the lattice corner table.
    pub squares_preserved: bool,
    /// Every `A_j` commutes with `A'`: the image stabilizes the hyperplane of `A'`.
    pub in_hyperplane_stabilizer: bool,
}

impl EmbeddingReport {
    pub fn passed(&self) -> bool {
        self.failure_count == 0 && self.injective && self.squares_preserved && self.in_hyperplane_stabilizer
    }
}

/// Checks that `ι(x_i) = x_i`, `ι(a_j) = A_j` sends relations to relations
/// and is a local isometry at the base vertex.
pub fn check_embedding(
    gamma: &BmwPresentation,
    s: &Scaffolding,
    pair: &InterlacingPair,
) -> Result<EmbeddingReport, ConstructionError> {
    let (m, n) = (gamma.m(), gamma.n());
    let c = pair.z_count();
    if pair.x_size != m || s.n != n {
        return Err(ConstructionError::Precondition("pair was not built from this presentation".into()));
    }
    let odd = &pair.odd;
    let a_idx: Vec<usize> = s
        .a_list
        .iter()
        .map(|a| odd.index_of(a).ok_or_else(|| ConstructionError::Precondition(format!("{a} is not a vertex"))))
        .collect::<Result<_, _>>()?;
    let mut failures = Vec::new();
    let mut failure_count = 0;
    let mut checked = 0;
    for i in 0..m {
        for j in 0..n {
            let (i2, j2) = gamma.opposite(i, j);
            checked += 1;
            let zi = pair.zeta[i].clone();
            let img = odd.vertex(a_idx[j]).permute(&zi);
            let ok = pair.delta[a_idx[j]].apply(i) == i2 && img == odd.vertex(a_idx[j2]);
            if !ok {
                failure_count += 1;
                if failures.len() < WITNESS_CAP {
                    failures.push(format!("x{} a{} x{} a{}", i + 1, j + 1, i2 + 1, j2 + 1));
                }
            }
        }
    }
    let mut images: Vec<usize> = (0..m).collect();
    images.extend(a_idx.iter().map(|&v| c + v));
    let injective = images.iter().collect::<HashSet<_>>().len() == images.len();

    let lattice = emit_lattice_unchecked(pair);
    let lt = CornerTable::from_presentation(&lattice);
    let bt = CornerTable::from_presentation(&LatticePresentation::from_bmw(gamma));
    let iota = |x: u32| images[x as usize] as u32;
    let mut squares_preserved = true;
    for x in 0..(m + n) as u32 {
        for y in 0..(m + n) as u32 {
            if let Some(t) = bt.across(x, y) {
                squares_preserved &= lt.across(iota(x), iota(y)) == Some(iota(t));
            }
        }
    }
    let in_stab = a_idx.iter().all(|&v| odd.vertex(v).is_disjoint(&s.a_prime));
    Ok(EmbeddingReport {
        relations_checked: checked,
        failures,
        failure_count,
        injective,
        squares_preserved,
        in_hyperplane_stabilizer: in_stab,
    })
}

/// End-to-end report: scaffolding, pair, link, local actions, embedding.
#[derive(Clone, Debug, Serialize)]
pub struct PipelineReport {
    pub m: usize,
    pub n: usize,
    /// Degree of the tree factor, `c = m + k`.
    pub c: usize,
    pub d: usize,
    pub scaffolding: ScaffoldingReport,
    pub interlacing: InterlacingReport,
    pub relation_counts: (usize, usize, usize),
    pub link: LinkReport,
    pub local_actions: LocalActionReport,
    pub embedding: EmbeddingReport,
}

impl PipelineReport {
    pub fn passed(&self) -> bool {
        self.scaffolding.passed()
            && self.interlacing.passed()
            && self.link.passed()
            && self.local_actions.passed()
            && self.embedding.passed()
    }
}

pub fn run_pipeline(gamma: &BmwPresentation) -> Result<PipelineReport, ConstructionError> {
    let s = build_scaffolding(gamma.n())?;
    let pair = build_interlacing(gamma, &s)?;
    let lattice = emit_lattice(&pair)?;
    Ok(PipelineReport {
        m: gamma.m(),
        n: gamma.n(),
        c: pair.z_count(),
        d: pair.d(),
        scaffolding: verify_scaffolding(&s),
        interlacing: verify_interlacing(&pair),
        relation_counts: lattice.counts(),
        link: check_link(&lattice, &pair),
        local_actions: local_action_report(&pair, Some(&s))?,
        embedding: check_embedding(gamma, &s, &pair)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaffolding_at_five() {
        let s = build_scaffolding(5).unwrap();
        assert_eq!((s.d, s.k), (9, 17));
        assert_eq!(s.a_prime.elements(), vec![5, 6, 7, 9, 11, 13, 15, 17]);
        assert_eq!(s.b.elements(), vec![1, 2, 3, 4, 10, 12, 14, 16]);
        assert_eq!(s.a_list[0].elements(), vec![2, 3, 4, 8, 10, 12, 14, 16]);
        assert_eq!(s.upsilons[0].to_string(), "(1 2)(3 4)");
        let bars: Vec<usize> = (0..5).map(|j| s.bar(j).unwrap() + 1).collect();
        assert_eq!(bars, vec![1, 2, 3, 4, 10]);
    }

    #[test]
    fn lemma_constants_fail_below_nine() {
        for d in 6..9 {
            let r = verify_scaffolding(&Scaffolding::from_formulas(5, d));
            assert!(!r.conditions[3].passed, "d = {d}");
        }
    }

    #[test]
    fn trivial_and_small_pairs_verify() {
        assert!(verify_interlacing(&InterlacingPair::trivial(4, 3).unwrap()).passed());
        assert!(verify_interlacing(&small_nontrivial_pair()).passed());
    }

    #[test]
    fn d3_violation_named() {
        let mut pair = InterlacingPair::trivial(4, 3).unwrap();
        let a = 0;
        let b = pair.odd().neighbours(0)[0] as usize;
        pair.set_delta(a, Permutation::from_cycles(3, &[&[1, 2]]).unwrap());
        pair.set_delta(b, Permutation::from_cycles(3, &[&[1, 3]]).unwrap());
        let r = verify_interlacing(&pair);
        assert!(!r.condition("D3").unwrap().passed);
        let link = check_link(&emit_lattice_unchecked(&pair), &pair);
        assert!(link.missing_face_count > 0);
        assert!(link.unclosed_cubes > 0);
    }

    #[test]
    fn lattice_json_round_trip() {
        let pair = small_nontrivial_pair();
        let p = emit_lattice(&pair).unwrap();
        assert_eq!(p.counts(), (4 + 35, 70, 4 * 35));
        assert_eq!(LatticePresentation::from_json(&p.to_json()).unwrap(), p);
        assert_eq!(InterlacingPair::from_json(&pair.to_json()).unwrap(), pair);
    }

    #[test]
    fn link_of_small_pair() {
        let pair = small_nontrivial_pair();
        let r = check_link(&emit_lattice(&pair).unwrap(), &pair);
        assert!(r.passed(), "{r:?}");
        assert_eq!(r.triangles_checked, 4 * 70);
    }

    #[test]
    fn development_matches_product_counts() {
        let pair = small_nontrivial_pair();
        let p = emit_lattice(&pair).unwrap();
        let dev = develop_ball(&p, 2, DEFAULT_DEVELOP_CAP).unwrap();
        let counts: Vec<u128> = dev.sphere_sizes().iter().map(|&x| x as u128).collect();
        assert_eq!(counts, product_oracle(&pair, 2).unwrap());
        assert_eq!(dev.conflicts, 0);
        let links = dev.interior_links(&expected_link(&pair));
        assert!(links.passed());
    }
}
