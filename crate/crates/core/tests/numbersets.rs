use std::collections::BTreeSet;

use proptest::prelude::*;

use mso_core::numbersets::{
    find_period, find_pump, pump, rank_bound_holds, reach, validate_tree, verify_certificate, CertificateStatus,
    DerivationTree, QuadrupleSystem, Rule,
};

/// Plain fixpoint iteration over `[0, limit]`, sharing nothing with the
/// library's worklist saturation.
fn naive_reach(sys: &QuadrupleSystem, limit: usize) -> Vec<BTreeSet<usize>> {
    let mut sets: Vec<BTreeSet<usize>> = sys.base.iter().map(|b| b.range(..=limit).copied().collect()).collect();
    loop {
        let mut changed = false;
        for r in &sys.rules {
            let mut new = Vec::new();
            for &a in &sets[r.l1] {
                for &b in &sets[r.l2] {
                    if a + b >= r.j && a + b - r.j <= limit && !sets[r.l3].contains(&(a + b - r.j)) {
                        new.push(a + b - r.j);
                    }
                }
            }
            changed |= !new.is_empty();
            sets[r.l3].extend(new);
        }
        if !changed {
            return sets;
        }
    }
}

fn system() -> impl Strategy<Value = QuadrupleSystem> {
    (1usize..=3)
        .prop_flat_map(|m| {
            (
                Just(m),
                prop::collection::vec((0..m, 0..m, 0..m, 0usize..3), 0..4),
                prop::collection::vec(prop::collection::btree_set(1usize..9, 0..3), m),
            )
        })
        .prop_map(|(m, rules, base)| {
            let rules = rules.into_iter().map(|(l1, l2, l3, j)| Rule { l1, l2, l3, j }).collect();
            QuadrupleSystem::new(m, rules, base).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn reach_matches_naive_fixpoint(sys in system(), bound in 0usize..60) {
        let r = reach(&sys, bound, Some(40));
        let naive = naive_reach(&sys, bound + 40);
        for l in 0..sys.labels {
            let want: Vec<usize> = naive[l].range(..=bound).copied().collect();
            prop_assert_eq!(r.set(l), want);
        }
    }

    #[test]
    fn reach_is_monotone(sys in system(), bound in 1usize..50, extra in 1usize..9) {
        let small = reach(&sys, bound, None);
        let larger = reach(&sys, bound + 10, None);
        let mut more = sys.clone();
        more.base[0].insert(extra);
        let richer = reach(&more, bound, None);
        for l in 0..sys.labels {
            for n in small.set(l) {
                prop_assert!(larger.contains(l, n));
                prop_assert!(richer.contains(l, n));
            }
        }
    }

    #[test]
    fn every_member_has_a_valid_witness(sys in system()) {
        let r = reach(&sys, 50, None);
        for l in 0..sys.labels {
            for n in r.set(l) {
                let t = r.witness(&sys, l, n).unwrap();
                prop_assert_eq!(t.value, n);
                prop_assert!(validate_tree(&sys, &t).is_ok());
                prop_assert!(rank_bound_holds(&sys, &t));
            }
        }
    }

    #[test]
    fn pumping_adds_multiples_of_delta(sys in system(), pick in any::<prop::sample::Index>()) {
        let r = reach(&sys, 60, None);
        let trees: Vec<DerivationTree> = (0..sys.labels)
            .flat_map(|l| r.set(l).into_iter().map(move |n| (l, n)))
            .filter_map(|(l, n)| r.witness(&sys, l, n))
            .filter(|t| find_pump(t).is_some())
            .collect();
        if !trees.is_empty() {
            let t = pick.get(&trees);
            let p = find_pump(t).unwrap();
            for i in 0..=5 {
                let u = pump(&sys, t, &p.outer, &p.inner, i).unwrap();
                prop_assert!(validate_tree(&sys, &u).is_ok());
                prop_assert_eq!(u.value, t.value + i * p.delta);
                prop_assert!(rank_bound_holds(&sys, &u));
            }
        }
    }

    #[test]
    fn certificates_are_periodic(sys in system()) {
        let scan = 120;
        for l in 0..sys.labels {
            let Some(c) = find_period(&sys, l, scan, 8).unwrap() else { continue };
            prop_assert!(verify_certificate(&sys, &c));
            let naive = &naive_reach(&sys, scan + 40)[l];
            for x in c.threshold..=scan - c.period {
                prop_assert_eq!(naive.contains(&x), naive.contains(&(x + c.period)), "at {}", x);
            }
            if c.status == CertificateStatus::Finite {
                prop_assert!(naive.range(c.threshold..=scan).next().is_none());
            }
        }
    }
}

#[test]
fn single_label_certificates() {
    let cases = [
        (vec![0], vec![3], 3, 3, CertificateStatus::Certified),
        (vec![1], vec![2], 2, 1, CertificateStatus::Certified),
        (vec![0], vec![2], 2, 2, CertificateStatus::Certified),
        (vec![], vec![1, 2], 3, 1, CertificateStatus::Finite),
    ];
    for (js, base, t, p, status) in cases {
        let sys = QuadrupleSystem::single(&js, &base);
        let c = find_period(&sys, 0, 200, 16).unwrap().unwrap();
        assert_eq!((c.threshold, c.period, c.status), (t, p, status), "{js:?} {base:?}");
        assert!(verify_certificate(&sys, &c));
    }
}

#[test]
fn four_and_seven() {
    // the semigroup generated by 4 and 7 contains everything from 18 on
    let sys = QuadrupleSystem::single(&[0], &[4, 7]);
    let c = find_period(&sys, 0, 200, 16).unwrap().unwrap();
    assert_eq!((c.threshold, c.period), (18, 1));
    let naive = &naive_reach(&sys, 200)[0];
    assert!(!naive.contains(&17));
    assert!((18..=200).all(|n| naive.contains(&n)));
}
