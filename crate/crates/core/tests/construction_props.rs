use std::collections::HashSet;

use oddlattice::bmw::BmwPresentation;
use oddlattice::complexes::{build_odd, join, FlagComplex};
use oddlattice::construction::*;
use oddlattice::coxeter::{build_ball, RacgPresentation};
use oddlattice::geometry::KingBall;
use oddlattice::perm::{Parity, Permutation};
use oddlattice::universal::{letterwise_extension, local_action};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fixture(i: usize) -> BmwPresentation {
    let path = format!("{}/fixtures/bmw_5x5_{i}.json", env!("CARGO_MANIFEST_DIR"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    BmwPresentation::from_json(&v).unwrap()
}

/// A uniformly chosen involution: a random matching on a random even subset.
fn random_involution(rng: &mut impl Rng, degree: usize) -> Permutation {
    let mut pts: Vec<usize> = (0..degree).collect();
    pts.shuffle(rng);
    let pairs = rng.gen_range(0..=degree / 2);
    let mut images: Vec<u32> = (0..degree as u32).collect();
    for k in 0..pairs {
        let (a, b) = (pts[2 * k], pts[2 * k + 1]);
        images[a] = b as u32;
        images[b] = a as u32;
    }
    Permutation::from_images(images).unwrap()
}

fn random_even_involution(rng: &mut impl Rng, degree: usize) -> Permutation {
    loop {
        let p = random_involution(rng, degree);
        if p.parity() == Parity::Even {
            return p;
        }
    }
}

#[test]
fn scaffoldings_verify_and_bar_map_is_an_embedding() {
    for n in 1..=12 {
        let s = build_scaffolding(n).unwrap();
        assert!(verify_scaffolding(&s).passed());
        let bars: Vec<usize> = (0..n).map(|j| s.bar(j).unwrap()).collect();
        assert_eq!(bars.iter().collect::<HashSet<_>>().len(), n);
        for (j, &b) in bars.iter().enumerate() {
            assert!(!s.a_prime.contains(b) && !s.a_list[j].contains(b));
        }
        assert_eq!(Scaffolding::from_json(&s.to_json()).unwrap(), s);
    }
}

#[test]
fn built_pairs_verify_and_round_trip() {
    let gamma = fixture(1);
    let s = build_scaffolding(5).unwrap();
    let pair = build_interlacing(&gamma, &s).unwrap();
    assert!(verify_interlacing(&pair).passed());
    let (_, alpha) = gamma.local_actions();
    let trivial_alphas = alpha.iter().filter(|a| a.is_identity()).count();
    assert_eq!(pair.delta_support().len(), 5 - trivial_alphas + 1 + s.k);
    let b = pair.odd().index_of(&s.b).unwrap();
    assert_eq!(pair.delta(b).to_string(), "(1 6)(2 3)");
    assert_eq!(InterlacingPair::from_json(&pair.to_json()).unwrap(), pair);
    let p = emit_lattice(&pair).unwrap();
    assert_eq!(p.counts(), (22 + 24310, 24310 * 9 / 2, 22 * 24310));
    assert_eq!(LatticePresentation::from_json(&p.to_json()).unwrap(), p);
    assert!(CornerTable::from_presentation(&p).is_involutive());
}

#[test]
fn random_single_entry_mutations_are_rejected() {
    let gamma = fixture(2);
    let s = build_scaffolding(5).unwrap();
    let pair = build_interlacing(&gamma, &s).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let (mut rejected, mut valid, mut unchanged, mut trials) = (0, 0, 0, 0);
    while trials < 150 {
        let mut p = pair.clone();
        if rng.gen_bool(0.5) {
            let z = rng.gen_range(0..p.z_count());
            let new = random_involution(&mut rng, p.ell());
            if &new == p.zeta(z) {
                unchanged += 1;
                continue;
            }
            p.set_zeta(z, new);
        } else {
            let v = rng.gen_range(0..p.odd().vertex_count());
            let new = random_involution(&mut rng, p.z_count());
            if &new == p.delta(v) {
                unchanged += 1;
                continue;
            }
            p.set_delta(v, new);
        }
        trials += 1;
        let r = verify_interlacing(&p);
        if r.passed() {
            // Accepted mutations must be genuinely consistent pairs.
            assert!(check_link(&emit_lattice_unchecked(&p), &p).passed());
            valid += 1;
        } else {
            assert!(r.conditions.iter().any(|c| !c.passed && c.witness.is_some()));
            rejected += 1;
        }
    }
    let broken = trials - valid;
    assert!(
        rejected * 100 >= broken * 99,
        "rejected {rejected}/{broken} ({valid} valid mutations, {unchanged} no-op draws)"
    );
}

#[test]
fn perturbing_a_zeta_off_its_support_breaks_d4_or_d5() {
    let pair = build_interlacing(&fixture(3), &build_scaffolding(5).unwrap()).unwrap();
    for z in 0..5 {
        let movers: Vec<usize> =
            pair.delta_support().into_iter().filter(|&v| pair.delta(v).apply(z) != z).collect();
        assert!(!movers.is_empty());
        let fixed_by_all = |q: usize| {
            pair.zeta(z).apply(q) == q
                && movers.iter().all(|&v| pair.zeta(pair.delta(v).apply(z)).apply(q) == q)
        };
        let d = pair.odd().vertex(movers[0]);
        let outside: Vec<usize> = (0..pair.ell()).filter(|&q| fixed_by_all(q) && !d.contains(q)).collect();
        let mut p = pair.clone();
        let extra = Permutation::from_cycles(p.ell(), &[&[outside[0] + 1, outside[1] + 1]]).unwrap();
        p.set_zeta(z, p.zeta(z).compose(&extra).unwrap());
        let r = verify_interlacing(&p);
        assert!(!r.condition("D4").unwrap().passed || !r.condition("D5").unwrap().passed, "z{z}");
    }
}

fn portage_consistent(pair: &InterlacingPair, king: &KingBall) -> bool {
    (0..pair.z_count()).all(|z| portage_projection(pair, &[z], king, PortageMode::Full).is_ok())
}

/// Pairs violating exactly one of D3, D4, D5.
fn single_violations() -> Vec<(&'static str, InterlacingPair)> {
    let cyc = |deg: usize, cs: &[&[usize]]| Permutation::from_cycles(deg, cs).unwrap();
    let base = small_nontrivial_pair();
    let mut out = Vec::new();
    let mut p = InterlacingPair::trivial(4, 3).unwrap();
    let nb = p.odd().neighbours(0)[0] as usize;
    p.set_delta(0, cyc(3, &[&[1, 2]]));
    p.set_delta(nb, cyc(3, &[&[1, 3]]));
    out.push(("D3", p));
    let mut p = base.clone();
    p.set_zeta(1, cyc(7, &[&[1, 3], &[4, 5]]));
    out.push(("D4", p));
    let mut p = base;
    p.set_zeta(0, cyc(7, &[&[3, 4]]));
    p.set_zeta(1, cyc(7, &[&[3, 4]]));
    out.push(("D5", p));
    out
}

#[test]
fn single_broken_conditions_fail_link_or_portage() {
    let king = KingBall::build(&RacgPresentation::from_complex(build_odd(4).unwrap().complex()), 2).unwrap();
    for (name, pair) in single_violations() {
        let r = verify_interlacing(&pair);
        let broken: Vec<&str> = r.conditions.iter().filter(|c| !c.passed).map(|c| c.name).collect();
        assert_eq!(broken, vec![name]);
        let link = check_link(&emit_lattice_unchecked(&pair), &pair);
        assert!(!link.passed() || !portage_consistent(&pair, &king), "{name}");
    }
    assert!(emit_lattice(&single_violations()[0].1).is_err());
}

#[test]
fn sample_pair_portage_local_action_is_zeta() {
    let pair = small_nontrivial_pair();
    let king = KingBall::build(&RacgPresentation::from_complex(pair.odd().complex()), 2).unwrap();
    for z in 0..pair.z_count() {
        let (g, stats) = portage_projection(&pair, &[z], &king, PortageMode::Full).unwrap();
        assert_eq!(stats.vertices, king.vertex_count());
        assert_eq!(local_action(&king, &g, 0).unwrap(), pair.odd().vertex_permutation(pair.zeta(z)));
    }
    let (g, _) = portage_projection(&pair, &[0, 1], &king, PortageMode::SpotCheck).unwrap();
    let expected = pair.odd().vertex_permutation(&pair.zeta(0).compose(pair.zeta(1)).unwrap());
    assert_eq!(local_action(&king, &g, 0).unwrap(), expected);
}

#[test]
fn tree_portage_local_action_is_delta() {
    let pair = small_nontrivial_pair();
    let tree = build_ball(&RacgPresentation::free(pair.z_count()), 3).unwrap();
    for v in 0..pair.odd().vertex_count() {
        let g = portage_tree(&pair, &[v], &tree).unwrap();
        for y in 0..pair.z_count() as u32 {
            let img = g.apply(tree.table.neighbour(0, y) as usize) as u32;
            assert_eq!(img, tree.table.neighbour(0, pair.delta(v).apply(y as usize) as u32));
        }
    }
}

#[test]
fn bmw_development_has_complete_bipartite_links() {
    for i in 1..=3 {
        let gamma = fixture(i);
        let p = LatticePresentation::from_bmw(&gamma);
        let dev = develop_ball(&p, 3, DEFAULT_DEVELOP_CAP).unwrap();
        assert_eq!(dev.conflicts, 0);
        let tree = |k: usize| {
            let mut s = vec![1usize, k];
            s.push(k * (k - 1));
            s.push(k * (k - 1) * (k - 1));
            s
        };
        let oracle = product_sphere_sizes(&tree(gamma.m()), &tree(gamma.n()), 3);
        let counts: Vec<u128> = dev.sphere_sizes().iter().map(|&x| x as u128).collect();
        assert_eq!(counts, oracle);
        let k = join(&FlagComplex::discrete(gamma.m(), "x"), &FlagComplex::discrete(gamma.n(), "a"));
        assert!(dev.interior_links(&k).passed());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn even_zetas_with_trivial_delta_verify(seed in any::<u64>(), c in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pair = InterlacingPair::trivial(4, c).unwrap();
        for z in 0..c {
            pair.set_zeta(z, random_even_involution(&mut rng, 7));
        }
        prop_assert!(verify_interlacing(&pair).passed());
        let p = emit_lattice(&pair).unwrap();
        prop_assert!(CornerTable::from_presentation(&p).is_involutive());
        prop_assert!(check_link(&p, &pair).passed());
    }

    #[test]
    fn trivial_development_is_the_join_ball(c in 1usize..5, radius in 0usize..4) {
        let pair = InterlacingPair::trivial(3, c).unwrap();
        let p = emit_lattice(&pair).unwrap();
        let dev = develop_ball(&p, radius, DEFAULT_DEVELOP_CAP).unwrap();
        let join_pres = RacgPresentation::from_complex(&expected_link(&pair));
        let ball = build_ball(&join_pres, radius).unwrap();
        prop_assert!(matches_davis_ball(&dev, &join_pres, &ball));
    }

    #[test]
    fn trivial_delta_portage_is_letterwise(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pair = InterlacingPair::trivial(3, 2).unwrap();
        let zeta = random_involution(&mut rng, 5);
        pair.set_zeta(0, zeta.clone());
        let king = KingBall::build(&RacgPresentation::from_complex(pair.odd().complex()), 2).unwrap();
        let (g, _) = portage_projection(&pair, &[0], &king, PortageMode::SpotCheck).unwrap();
        let h = letterwise_extension(&king, &pair.odd().vertex_permutation(&zeta)).unwrap();
        prop_assert_eq!(g.images(), h.images());
    }
}
