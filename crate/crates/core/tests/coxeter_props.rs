use std::collections::{BTreeSet, HashSet, VecDeque};

use oddlattice::complexes::{build_odd, FlagComplex};
use oddlattice::coxeter::RacgPresentation;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn petersen() -> RacgPresentation {
    RacgPresentation::from_complex(build_odd(3).unwrap().complex())
}

/// Every word reachable by commuting adjacent edge-letters and deleting `aa`;
/// returns the lexicographically least among the shortest.
fn rewrite_oracle(p: &RacgPresentation, word: &[u32]) -> Vec<u32> {
    let mut seen: HashSet<Vec<u32>> = HashSet::new();
    let mut queue = VecDeque::from([word.to_vec()]);
    seen.insert(word.to_vec());
    let mut best: BTreeSet<(usize, Vec<u32>)> = BTreeSet::new();
    while let Some(w) = queue.pop_front() {
        best.insert((w.len(), w.clone()));
        for i in 0..w.len().saturating_sub(1) {
            let mut moves = Vec::new();
            if w[i] == w[i + 1] {
                let mut v = w.clone();
                v.drain(i..i + 2);
                moves.push(v);
            } else if p.commutes(w[i], w[i + 1]) {
                let mut v = w.clone();
                v.swap(i, i + 1);
                moves.push(v);
            }
            for v in moves {
                if seen.insert(v.clone()) {
                    queue.push_back(v);
                }
            }
        }
    }
    best.into_iter().next().unwrap().1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn normal_form_matches_rewriting(word in prop::collection::vec(0u32..10, 0..8)) {
        let p = petersen();
        prop_assert_eq!(p.normalize(&word).unwrap().word().to_vec(), rewrite_oracle(&p, &word));
    }

    #[test]
    fn normal_form_matches_rewriting_square(word in prop::collection::vec(0u32..4, 0..9)) {
        let p = RacgPresentation::from_complex(&FlagComplex::cycle(4));
        prop_assert_eq!(p.normalize(&word).unwrap().word().to_vec(), rewrite_oracle(&p, &word));
    }

    #[test]
    fn descents_shorten(word in prop::collection::vec(0u32..10, 0..10)) {
        let p = petersen();
        let u = p.normalize(&word).unwrap();
        for s in 0..10u32 {
            let shorter = p.mul_gen(&u, s).len() < u.len();
            prop_assert_eq!(p.right_descents(u.word()).contains(&s), shorter);
            let mut left = vec![s];
            left.extend_from_slice(u.word());
            let shorter_left = p.normalize(&left).unwrap().len() < u.len();
            prop_assert_eq!(p.left_descents(u.word()).contains(&s), shorter_left);
        }
    }
}

#[test]
fn confluence_on_random_words() {
    let p = petersen();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10_000 {
        let lu = rng.gen_range(0..12);
        let lv = rng.gen_range(0..12);
        let u: Vec<u32> = (0..lu).map(|_| rng.gen_range(0..10)).collect();
        let v: Vec<u32> = (0..lv).map(|_| rng.gen_range(0..10)).collect();
        let uv: Vec<u32> = u.iter().chain(v.iter()).copied().collect();
        let direct = p.normalize(&uv).unwrap();
        let staged = p.mul(&p.normalize(&u).unwrap(), &p.normalize(&v).unwrap());
        assert_eq!(direct, staged);
        let inv = p.inverse(&direct);
        assert!(p.mul(&direct, &inv).is_empty());
    }
}
