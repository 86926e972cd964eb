//! A desk-scale run of the library's invariants with a deterministic report.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::classes::{marked_path, matching, matching_class, path_class, GeneratedClass};
use crate::closure::{close, structure_base, verify_witnesses, ClosureRecords, ClosureStatus};
use crate::composition::{glue, realized_patterns, random_scheme, transfer, ConstRef, Scheme};
use crate::decomp::{decompose, decompose_naive, validate_split, DEFAULT_SEPARATOR_BUDGET};
use crate::error::Result;
use crate::numbersets::{find_period, verify_certificate, QuadrupleSystem};
use crate::oracle::{perfect_matching_sentence, spectrum_bruteforce, theories_equal_on_sentences, DEFAULT_SEARCH_NODES};
use crate::spectra::{audit_gaps, induce_system, union_spectrum};
use crate::structures::{apply_permutation, incidence_graph, parse_structure, random_graph, random_permutation, random_structure, serialize_structure, Structure, Vocabulary};
use crate::theory::{compute_theory, TheoryStore};

#[derive(Clone, Copy, Debug)]
pub struct SelfcheckOptions {
    pub seed: u64,
    pub jobs: usize,
}

pub struct SelfcheckReport {
    pub text: String,
    pub failures: usize,
}

struct Reporter {
    text: String,
    failures: usize,
}

impl Reporter {
    fn record(&mut self, name: &str, outcome: Result<std::result::Result<String, String>>) {
        match outcome {
            Ok(Ok(detail)) => writeln!(self.text, "check {name}: ok {detail}").unwrap(),
            Ok(Err(detail)) => {
                self.failures += 1;
                writeln!(self.text, "check {name}: FAIL {detail}").unwrap();
            }
            Err(e) => {
                self.failures += 1;
                writeln!(self.text, "check {name}: FAIL error {e}").unwrap();
            }
        }
    }
}

type Outcome = Result<std::result::Result<String, String>>;

pub fn selfcheck(opts: SelfcheckOptions) -> SelfcheckReport {
    let mut r = Reporter {
        text: format!("selfcheck seed={}\n", opts.seed),
        failures: 0,
    };
    r.record("structure-round-trip", round_trip(opts.seed));
    r.record("isomorphism-invariance", isomorphism(opts.seed));
    r.record("addition-theorem", addition(opts.seed));
    for class in [path_class(), matching_class()] {
        for depth in 0..=1 {
            r.record(&format!("closure-{}-depth{depth}", class.name), closure_check(&class, depth, opts.jobs));
        }
    }
    r.record("number-sets", number_sets());
    r.record("decomposition", decomposition(opts.seed));
    r.record("oracle-spectrum", oracle_spectrum());
    r.record("sentence-agreement", sentence_agreement(opts.seed));
    writeln!(r.text, "failures {}", r.failures).unwrap();
    SelfcheckReport {
        text: r.text,
        failures: r.failures,
    }
}

fn round_trip(seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau = Vocabulary::new(vec![("P".into(), 1), ("E".into(), 2)], 2, 1)?;
    for i in 0..50 {
        let m = random_structure(&tau, rng.gen_range(2..6), 0.4, &mut rng);
        if parse_structure(&serialize_structure(&m))? != m {
            return Ok(Err(format!("sample {i} does not round-trip")));
        }
    }
    Ok(Ok("samples=50".into()))
}

fn isomorphism(seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x150);
    let store = TheoryStore::new(&Vocabulary::graphs());
    for i in 0..30 {
        let n = rng.gen_range(1..6);
        let m = random_graph(n, 0.5, &mut rng).with_constants(vec![rng.gen_range(0..n)])?;
        let p = apply_permutation(&m, &random_permutation(n, &mut rng))?;
        let depth = i % 2;
        if compute_theory(&store, &m, depth)? != compute_theory(&store, &p, depth)? {
            return Ok(Err(format!("sample {i} differs")));
        }
    }
    Ok(Ok(format!("samples=30 theories={}", store.theory_count())))
}

fn addition(seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xadd);
    let tau = Vocabulary::graphs();
    let store = TheoryStore::new(&tau);
    let shapes = [
        Scheme::disjoint_union(&tau),
        Scheme::plain_union(&tau, 1, 1, vec![(0, 0)], vec![ConstRef { part: 1, index: 0 }])?,
        Scheme::plain_union(&tau, 1, 1, vec![], vec![ConstRef { part: 2, index: 0 }])?,
    ];
    let mut checked = 0;
    for i in 0..40 {
        let base = &shapes[i % shapes.len()];
        let n1 = rng.gen_range(1..4);
        let n2 = rng.gen_range(1..4);
        let c1: Vec<usize> = (0..base.k1).map(|_| rng.gen_range(0..n1)).collect();
        let c2: Vec<usize> = (0..base.k2).map(|_| rng.gen_range(0..n2)).collect();
        let m1 = random_graph(n1, 0.5, &mut rng).with_constants(c1)?;
        let m2 = random_graph(n2, 0.5, &mut rng).with_constants(c2)?;
        let pool: Vec<_> = realized_patterns(&m1, &m2, base)?.into_iter().collect();
        let s = if i % 2 == 0 { base.clone() } else { random_scheme(&tau, base, &pool, &mut rng) };
        let depth = i % 2;
        let t1 = compute_theory(&store, &m1, depth)?;
        let t2 = compute_theory(&store, &m2, depth)?;
        let direct = compute_theory(&store, &glue(&m1, &m2, &s)?, depth)?;
        if transfer(&store, t1, t2, &s)? != direct {
            return Ok(Err(format!("sample {i} disagrees")));
        }
        checked += 1;
    }
    Ok(Ok(format!("samples={checked}")))
}

fn closure_check(class: &GeneratedClass, depth: usize, jobs: usize) -> Outcome {
    let store = TheoryStore::new(&Vocabulary::graphs());
    let base = structure_base(&store, &class.base, depth)?;
    let st = close(&store, base, &class.schemes, depth, 64, jobs)?;
    if st.status != ClosureStatus::Converged || !st.rescan_stable {
        return Ok(Err("no fixpoint".into()));
    }
    let replayed = verify_witnesses(&store, &st, &class.schemes)?;
    let members: Vec<Structure> = match class.name {
        "paths" => (2..=9).map(marked_path).collect(),
        _ => (1..=4).map(matching).collect(),
    };
    for m in &members {
        if !st.contains(compute_theory(&store, m, depth)?) {
            return Ok(Err(format!("missing a member of size {}", m.size())));
        }
    }
    let records = ClosureRecords::from_state(&store, &st);
    let induced = induce_system(&records);
    let digests: Vec<String> = st.reachable[&class.k].iter().map(|&t| store.digest(t)).collect();
    let sizes = union_spectrum(&induced, &digests, 12)?;
    let expected: BTreeSet<usize> = match class.name {
        "paths" => (2..=12).collect(),
        _ => (1..=6).map(|i| 2 * i).collect(),
    };
    if sizes != expected {
        return Ok(Err(format!("spectrum {sizes:?}")));
    }
    let audit = audit_gaps(&sizes, 2.0, 0)?;
    let mut digest_list = digests.clone();
    digest_list.sort();
    Ok(Ok(format!(
        "iterations={} theories={} facts={} replayed={} gaps={} first={}",
        st.iterations,
        st.reachable_all().len(),
        records.facts.len(),
        replayed,
        audit.violations.len(),
        &digest_list[0][..12]
    )))
}

fn number_sets() -> Outcome {
    let mut out = Vec::new();
    for (js, base, expect) in [(vec![0], vec![3], (3, 3)), (vec![1], vec![2], (2, 1)), (vec![0], vec![4, 7], (18, 1))] {
        let sys = QuadrupleSystem::single(&js, &base);
        let Some(c) = find_period(&sys, 0, 200, 16)? else {
            return Ok(Err("inconclusive".into()));
        };
        if (c.threshold, c.period) != expect || !verify_certificate(&sys, &c) {
            return Ok(Err(c.line()));
        }
        out.push(format!("{}/{}:{}", c.threshold, c.period, c.status.as_str()));
    }
    Ok(Ok(out.join(" ")))
}

fn decomposition(seed: u64) -> Outcome {
    for n in 3..=8 {
        let p = Structure::path(n);
        match decompose(&p, 1, 2, DEFAULT_SEPARATOR_BUDGET)? {
            Some(s) if validate_split(&p, &s, 1, 2).is_ok() => {}
            _ => return Ok(Err(format!("path {n} not split"))),
        }
    }
    if decompose(&incidence_graph(5)?, 2, 6, DEFAULT_SEPARATOR_BUDGET)?.is_some() {
        return Ok(Err("incidence graph split".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xdec);
    for i in 0..60 {
        let g = random_graph(rng.gen_range(1..7), 0.4, &mut rng);
        let (k, m) = (rng.gen_range(0..3), rng.gen_range(0..5));
        if decompose(&g, k, m, DEFAULT_SEPARATOR_BUDGET)?.is_some() != decompose_naive(&g, k, m) {
            return Ok(Err(format!("sample {i} disagrees with the naive search")));
        }
    }
    Ok(Ok("paths=6 naive-samples=60".into()))
}

fn oracle_spectrum() -> Outcome {
    let s = spectrum_bruteforce(&perfect_matching_sentence(), &Vocabulary::graphs(), 6, DEFAULT_SEARCH_NODES)?;
    let want: BTreeSet<usize> = [2, 4, 6].into();
    Ok(if s == want { Ok("sizes=2,4,6".into()) } else { Err(format!("{s:?}")) })
}

fn sentence_agreement(seed: u64) -> Outcome {
    let store = TheoryStore::new(&Vocabulary::graphs());
    // long marked paths share their depth-0 theory
    let a = marked_path(7);
    let b = marked_path(8);
    if compute_theory(&store, &a, 0)? != compute_theory(&store, &b, 0)? {
        return Ok(Err("expected equal theories".into()));
    }
    match theories_equal_on_sentences(&a, &b, 0, 100, seed)? {
        None => Ok(Ok("sentences=100".into())),
        Some(f) => Ok(Err(format!("disagree on {f}"))),
    }
}
