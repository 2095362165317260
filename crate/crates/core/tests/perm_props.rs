use std::collections::HashSet;

use num_bigint::BigUint;
use oddlattice::perm::{is_primitive, Permutation, PermutationGroup, Primitivity};
use proptest::prelude::*;

fn perm_strategy(n: usize) -> impl Strategy<Value = Permutation> {
    Just((0..n as u32).collect::<Vec<_>>())
        .prop_shuffle()
        .prop_map(|v| Permutation::from_images(v).unwrap())
}

fn gens_strategy() -> impl Strategy<Value = (usize, Vec<Permutation>)> {
    (1usize..=7).prop_flat_map(|n| (Just(n), prop::collection::vec(perm_strategy(n), 0..4)))
}

fn closure(n: usize, gens: &[Permutation]) -> HashSet<Permutation> {
    let mut seen = HashSet::new();
    let id = Permutation::identity(n);
    let mut stack = vec![id.clone()];
    seen.insert(id);
    while let Some(x) = stack.pop() {
        for g in gens {
            let y = g.compose(&x).unwrap();
            if seen.insert(y.clone()) {
                stack.push(y);
            }
        }
    }
    seen
}

fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    // restricted growth strings
    let mut out = Vec::new();
    let mut cur = vec![0usize; n];
    fn rec(i: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for c in 0..=max + 1 {
            cur[i] = c;
            rec(i + 1, max.max(c), cur, out);
        }
    }
    if n > 0 {
        rec(1, 0, &mut cur, &mut out);
    }
    out
}

fn brute_primitive(n: usize, gens: &[Permutation]) -> bool {
    for labels in set_partitions(n) {
        let k = labels.iter().max().unwrap() + 1;
        if k == 1 || k == n {
            continue;
        }
        let invariant = gens.iter().all(|g| {
            (0..n).all(|x| (0..n).all(|y| (labels[x] == labels[y]) == (labels[g.apply(x)] == labels[g.apply(y)])))
        });
        if invariant {
            return false;
        }
    }
    true
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn chain_order_matches_closure((n, gens) in gens_strategy()) {
        let g = PermutationGroup::new(n, gens.clone()).unwrap();
        let elems = closure(n, &gens);
        prop_assert_eq!(g.order(), BigUint::from(elems.len()));
        for e in &elems {
            prop_assert!(g.contains(e));
        }
    }

    #[test]
    fn membership_rejects_outsiders((n, gens) in gens_strategy(), probe in (1usize..=7).prop_flat_map(perm_strategy)) {
        prop_assume!(probe.degree() == n);
        let g = PermutationGroup::new(n, gens.clone()).unwrap();
        prop_assert_eq!(g.contains(&probe), closure(n, &gens).contains(&probe));
    }

    #[test]
    fn stabilizer_fixes_prefix((n, gens) in gens_strategy(), k in 0usize..3) {
        let k = k.min(n);
        let pts: Vec<usize> = (0..k).collect();
        let g = PermutationGroup::new(n, gens.clone()).unwrap();
        let st = g.pointwise_stabilizer(&pts);
        let expected = closure(n, &gens).into_iter().filter(|e| pts.iter().all(|&p| e.apply(p) == p)).count();
        prop_assert_eq!(st.order(), BigUint::from(expected));
    }

    #[test]
    fn inverse_and_cycles(q in (1usize..=9).prop_flat_map(perm_strategy)) {
        prop_assert!(q.compose(&q.inverse()).unwrap().is_identity());
        let back = Permutation::parse_cycles(&q.to_string(), q.degree()).unwrap();
        prop_assert_eq!(back, q);
    }

    #[test]
    fn primitivity_matches_partitions((n, gens) in gens_strategy()) {
        let fast = is_primitive(&gens, n).unwrap();
        let transitive = oddlattice::perm::orbit_of(n, &gens, 0).len() == n;
        let expect = transitive && brute_primitive(n, &gens);
        prop_assert_eq!(fast.is_primitive(), expect);
        if let Primitivity::Imprimitive { blocks } = fast {
            let mut label = vec![0; n];
            for (i, b) in blocks.iter().enumerate() { for &x in b { label[x] = i; } }
            for g in &gens {
                for x in 0..n { for y in 0..n {
                    prop_assert_eq!(label[x] == label[y], label[g.apply(x)] == label[g.apply(y)]);
                }}
            }
        }
    }
}
