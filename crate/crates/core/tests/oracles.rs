use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mso_core::classes::{marked_path, matching, matching_class, path_class, GeneratedClass};
use mso_core::closure::{close, replay_witness, structure_base, verify_witnesses, ClosureState};
use mso_core::composition::{
    count_schemes, enumerate_schemes, formal_patterns, glue, realized_patterns, TableDomain, DEFAULT_SCHEME_BUDGET,
};
use mso_core::decomp::{decompose, validate_split, DEFAULT_SEPARATOR_BUDGET};
use mso_core::oracle::{perfect_matching_sentence, satisfies, spectrum_bruteforce, DEFAULT_SEARCH_NODES};
use mso_core::spectra::{induce_system, union_spectrum};
use mso_core::structures::{enumerate_structures, random_graph};
use mso_core::theory::DEFAULT_FORMAL_BUDGET;
use mso_core::{compute_theory, ClosureRecords, Scheme, Structure, TheoryStore, Vocabulary};

fn closed(class: &GeneratedClass, depth: usize) -> (TheoryStore, ClosureState) {
    let store = TheoryStore::new(&Vocabulary::graphs());
    let base = structure_base(&store, &class.base, depth).unwrap();
    let st = close(&store, base, &class.schemes, depth, 64, 2).unwrap();
    (store, st)
}

fn spectrum_of(store: &TheoryStore, st: &ClosureState, k: usize, bound: usize) -> BTreeSet<usize> {
    let induced = induce_system(&ClosureRecords::from_state(store, st));
    let digests: Vec<String> = st.reachable[&k].iter().map(|&t| store.digest(t)).collect();
    union_spectrum(&induced, &digests, bound).unwrap()
}

#[test]
fn matching_closure_against_direct_unions() {
    let class = matching_class();
    for depth in 0..=1 {
        let (store, st) = closed(&class, depth);
        // completeness: every explicitly built union is present
        for n in 1..=5 {
            assert!(st.contains(compute_theory(&store, &matching(n), depth).unwrap()), "n={n} d={depth}");
        }
        // soundness: every reachable theory is realized by a matching
        for t in st.reachable_all() {
            let w = replay_witness(&st, &class.schemes, t).unwrap();
            assert_eq!(compute_theory(&store, &w, depth).unwrap(), t);
            assert!(w.degree_sequence(0).iter().all(|&d| d == 1));
            assert!(satisfies(&w, &perfect_matching_sentence()).unwrap());
        }
        let pm = spectrum_bruteforce(&perfect_matching_sentence(), &Vocabulary::graphs(), 8, DEFAULT_SEARCH_NODES).unwrap();
        assert_eq!(spectrum_of(&store, &st, 0, 8), pm);
    }
}

#[test]
fn path_closure_against_direct_paths() {
    let class = path_class();
    for depth in 0..=1 {
        let (store, st) = closed(&class, depth);
        assert_eq!(verify_witnesses(&store, &st, &class.schemes).unwrap(), st.reachable_all().len());
        let built: BTreeSet<_> = (2..=16).map(|n| compute_theory(&store, &marked_path(n), depth).unwrap()).collect();
        for t in &st.reachable[&1] {
            assert!(built.contains(t));
        }
        for t in &built {
            assert!(st.contains(*t));
        }
        assert_eq!(spectrum_of(&store, &st, 1, 20), (2..=20).collect());
    }
}

#[test]
fn unary_scheme_space_matches_realized_patterns() {
    let tau = Vocabulary::new(vec![("S".into(), 1)], 0, 0).unwrap();
    let du = Scheme::disjoint_union(&tau);
    let mut realized = BTreeSet::new();
    for n1 in 1..=2 {
        for n2 in 1..=2 {
            for m1 in enumerate_structures(&tau, n1, 8).unwrap() {
                for m2 in enumerate_structures(&tau, n2, 8).unwrap() {
                    realized.extend(realized_patterns(&m1, &m2, &du).unwrap().into_iter().map(|(_, p)| p));
                }
            }
        }
    }
    let formal: BTreeSet<_> = formal_patterns(&tau, 1, &du, DEFAULT_FORMAL_BUDGET).unwrap().into_iter().collect();
    assert_eq!(formal, realized);
    let count = count_schemes(&tau, 0, 0, 0, 0, TableDomain::Full, DEFAULT_SCHEME_BUDGET).unwrap();
    assert_eq!(count, 1u128 << realized.len());
    assert_eq!(count_schemes(&tau, 0, 0, 0, 0, TableDomain::MixedOnly, DEFAULT_SCHEME_BUDGET).unwrap(), 1);

    // every enumerated scheme glues one fixed pair differently
    let half = Structure::new(tau.clone(), 2, vec![[vec![0]].into()], vec![], vec![]).unwrap();
    let schemes = enumerate_schemes(&tau, 0, 0, 0, 0, TableDomain::Full, DEFAULT_SCHEME_BUDGET).unwrap();
    assert_eq!(schemes.len() as u128, count);
    let glued: BTreeSet<_> = schemes.iter().map(|s| format!("{:?}", glue(&half, &half, s).unwrap().relations())).collect();
    assert_eq!(glued.len(), schemes.len());
}

/// Weak decomposability by brute force over element-to-side assignments,
/// with adjacency as bitmasks.
fn naive_decomposable(g: &Structure, k: usize, m: usize) -> bool {
    let n = g.size();
    let edges: Vec<(usize, usize)> = g.relation(0).iter().map(|t| (t[0], t[1])).collect();
    // code digit 0: A1 only, 1: A2 only, 2: both
    (0..3usize.pow(n as u32)).any(|code| {
        let (mut only1, mut only2, mut both) = (0u32, 0u32, 0u32);
        let mut x = code;
        for e in 0..n {
            match x % 3 {
                0 => only1 |= 1 << e,
                1 => only2 |= 1 << e,
                _ => both |= 1 << e,
            }
            x /= 3;
        }
        let crossing = edges
            .iter()
            .any(|&(a, b)| (only1 >> a & 1 == 1 && only2 >> b & 1 == 1) || (only2 >> a & 1 == 1 && only1 >> b & 1 == 1));
        both.count_ones() as usize <= k
            && (only1 | both).count_ones() as usize >= m
            && (only2 | both).count_ones() as usize >= m
            && !crossing
    })
}

#[test]
fn decompose_against_naive_assignment_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..300 {
        let g = random_graph(rng.gen_range(1..8), rng.gen_range(0.1..0.7), &mut rng);
        let (k, m) = (rng.gen_range(0..3), rng.gen_range(0..6));
        let split = decompose(&g, k, m, DEFAULT_SEPARATOR_BUDGET).unwrap();
        assert_eq!(split.is_some(), naive_decomposable(&g, k, m), "sample {i}");
        if let Some(s) = split {
            validate_split(&g, &s, k, m).unwrap();
        }
    }
}
