use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mso_core::composition::{glue, realized_patterns, random_scheme, ConstRef};
use mso_core::oracle::{random_sentence, satisfies};
use mso_core::structures::{
    apply_permutation, parse_structure, random_graph, random_permutation, random_structure, serialize_structure,
};
use mso_core::{compute_theory, transfer, Scheme, Structure, TheoryStore, Vocabulary};

fn mixed_vocab() -> Vocabulary {
    Vocabulary::new(vec![("P".into(), 1), ("E".into(), 2)], 0, 0).unwrap()
}

fn sample(seed: u64, tau: &Vocabulary, max_size: usize, consts: usize) -> Structure {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=max_size);
    let m = if tau.predicates().len() == 1 {
        random_graph(n, 0.5, &mut rng)
    } else {
        random_structure(tau, n, 0.35, &mut rng)
    };
    let c = (0..consts).map(|_| rng.gen_range(0..n)).collect();
    m.with_constants(c).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn structure_text_round_trips(seed in any::<u64>(), consts in 0usize..3, sets in 0usize..2) {
        let tau = mixed_vocab().with_consts(consts).with_sets(sets);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_structure(&tau, rng.gen_range(1..6), 0.4, &mut rng);
        prop_assert_eq!(parse_structure(&serialize_structure(&m)).unwrap(), m);
    }

    #[test]
    fn theory_is_isomorphism_invariant(seed in any::<u64>(), depth in 0usize..2, consts in 0usize..3) {
        let tau = mixed_vocab();
        let m = sample(seed, &tau, 5, consts);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.rotate_left(7));
        let p = apply_permutation(&m, &random_permutation(m.size(), &mut rng)).unwrap();
        let store = TheoryStore::new(&tau);
        prop_assert_eq!(compute_theory(&store, &m, depth).unwrap(), compute_theory(&store, &p, depth).unwrap());
    }

    #[test]
    fn transfer_matches_direct_theory(seed in any::<u64>(), depth in 0usize..2, shape in 0usize..5) {
        let tau = Vocabulary::graphs();
        let base = match shape {
            0 => Scheme::disjoint_union(&tau),
            1 => Scheme::plain_union(&tau, 1, 1, vec![(0, 0)], vec![ConstRef { part: 1, index: 0 }]).unwrap(),
            2 => Scheme::plain_union(&tau, 1, 1, vec![], vec![ConstRef { part: 2, index: 0 }]).unwrap(),
            3 => Scheme::plain_union(&tau, 2, 1, vec![(1, 0)], vec![ConstRef { part: 1, index: 0 }]).unwrap(),
            _ => Scheme::plain_union(&tau, 1, 2, vec![(0, 1)], vec![ConstRef { part: 2, index: 0 }]).unwrap(),
        };
        let m1 = sample(seed, &tau, 4, base.k1);
        let m2 = sample(seed ^ 0x5eed, &tau, 4, base.k2);
        prop_assume!(glue(&m1, &m2, &base).is_ok());
        let pool: Vec<_> = realized_patterns(&m1, &m2, &base).unwrap().into_iter().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let s = random_scheme(&tau, &base, &pool, &mut rng);
        let store = TheoryStore::new(&tau);
        let t1 = compute_theory(&store, &m1, depth).unwrap();
        let t2 = compute_theory(&store, &m2, depth).unwrap();
        let direct = compute_theory(&store, &glue(&m1, &m2, &s).unwrap(), depth).unwrap();
        prop_assert_eq!(transfer(&store, t1, t2, &s).unwrap(), direct);
    }

    #[test]
    fn equal_theories_agree_on_sentences(seed in any::<u64>()) {
        // theory equality is checked by the library; sentence truth by the evaluator
        let tau = Vocabulary::graphs();
        let store = TheoryStore::new(&tau);
        let a = sample(seed, &tau, 5, 0);
        let b = sample(seed ^ 0xb, &tau, 5, 0);
        let same = compute_theory(&store, &a, 1).unwrap() == compute_theory(&store, &b, 1).unwrap();
        for i in 0..10 {
            let f = random_sentence(&tau, 1, seed.wrapping_add(i));
            if same {
                prop_assert_eq!(satisfies(&a, &f).unwrap(), satisfies(&b, &f).unwrap(), "{}", f);
            }
        }
    }
}

#[test]
fn long_paths_share_depth0_theory() {
    // three-element diagrams see a vertex pair outside any edge only from P4 on
    let store = TheoryStore::new(&Vocabulary::graphs());
    let th = |n, d| compute_theory(&store, &Structure::path(n), d).unwrap();
    assert_eq!(th(7, 0), th(8, 0));
    assert_ne!(th(3, 0), th(4, 0));
}

#[test]
fn result_constant_merged_under_another_name() {
    // part 2 names one element twice; only the second name is identified
    let tau = Vocabulary::graphs();
    let m1 = Structure::path(2).with_constants(vec![1]).unwrap();
    let m2 = Structure::graph(1, &[]).unwrap().with_constants(vec![0, 0]).unwrap();
    let s = Scheme::plain_union(
        &tau,
        1,
        2,
        vec![(0, 1)],
        vec![ConstRef { part: 2, index: 0 }, ConstRef { part: 1, index: 0 }],
    )
    .unwrap();
    let store = TheoryStore::new(&tau);
    for depth in 0..2 {
        let t1 = compute_theory(&store, &m1, depth).unwrap();
        let t2 = compute_theory(&store, &m2, depth).unwrap();
        let direct = compute_theory(&store, &glue(&m1, &m2, &s).unwrap(), depth).unwrap();
        assert_eq!(transfer(&store, t1, t2, &s).unwrap(), direct);
    }
}
