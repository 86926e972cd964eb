//! End-to-end acceptance checks. Each criterion prints one `PASS` or `FAIL`
//! line; the process fails only when a criterion outside `KNOWN_RED` fails.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mso_core::classes::{matching_class, path_class, GeneratedClass};
use mso_core::closure::{close, structure_base, verify_witnesses, ClosureState};
use mso_core::composition::{glue, random_scheme, realized_patterns, ConstRef, TuplePattern};
use mso_core::decomp::{decompose, validate_split, DEFAULT_SEPARATOR_BUDGET};
use mso_core::numbersets::{
    find_period, find_pump, pump, rank_bound_holds, reach, validate_tree, verify_certificate, DerivationTree,
    QuadrupleSystem, Rule,
};
use mso_core::oracle::{perfect_matching_sentence, random_sentence, satisfies, spectrum_bruteforce, DEFAULT_SEARCH_NODES};
use mso_core::spectra::{audit_gaps, induce_system, union_spectrum};
use mso_core::structures::{apply_permutation, incidence_graph, random_graph, random_permutation, random_structure};
use mso_core::{compute_theory, transfer, ClosureRecords, Scheme, Structure, TheoryStore, Vocabulary};

/// Criteria that cannot hold as stated; see the project notes.
const KNOWN_RED: &[usize] = &[6, 9];

type Verdict = Result<String, String>;

fn main() {
    let started = Instant::now();
    let spectra = class_spectra();
    let results: Vec<(usize, &str, Verdict)> = vec![
        (1, "addition theorem", addition()),
        (2, "isomorphism invariance", isomorphism()),
        (3, "theory and sentence agreement", sentence_agreement()),
        (4, "closure soundness and completeness", closure_classes()),
        (5, "spectra against the oracle", spectra_vs_oracle(&spectra)),
        (6, "number-set certificates", certificates()),
        (7, "pumping and rank bound", pumping()),
        (8, "decomposition", decomposition()),
        (9, "gap auditor", gaps(&spectra)),
        (10, "determinism", determinism()),
    ];
    let mut unexpected = Vec::new();
    for (n, name, verdict) in &results {
        match verdict {
            Ok(detail) => println!("criterion {n:>2} PASS {name}: {detail}"),
            Err(detail) => {
                let note = if KNOWN_RED.contains(n) { " (known red)" } else { "" };
                println!("criterion {n:>2} FAIL{note} {name}: {detail}");
                if !KNOWN_RED.contains(n) {
                    unexpected.push(*n);
                }
            }
        }
    }
    println!("acceptance finished in {:.1}s", started.elapsed().as_secs_f64());
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}

fn shapes(tau: &Vocabulary, sets: usize) -> Vec<Scheme> {
    let c = |part, index| ConstRef { part, index };
    let raw = [
        (0, 0, vec![], vec![]),
        (1, 1, vec![(0, 0)], vec![c(1, 0)]),
        (1, 1, vec![], vec![c(2, 0)]),
        (2, 1, vec![(1, 0)], vec![c(1, 0)]),
        (1, 2, vec![(0, 1)], vec![c(2, 0), c(1, 0)]),
        (2, 2, vec![(0, 0), (1, 1)], vec![c(1, 0), c(2, 1)]),
    ];
    raw.into_iter()
        .map(|(k1, k2, ident, result)| {
            let mut s = Scheme::plain_union(tau, k1, k2, ident, result).unwrap();
            s.sets = sets;
            s
        })
        .collect()
}

fn random_part(tau: &Vocabulary, sets: usize, consts: usize, max_size: usize, rng: &mut ChaCha8Rng) -> Structure {
    let n = rng.gen_range(1..=max_size);
    let base = if tau.predicates().len() == 1 {
        random_graph(n, rng.gen_range(0.2..0.8), rng)
    } else {
        random_structure(tau, n, rng.gen_range(0.2..0.6), rng)
    };
    let colors = (0..sets).map(|_| (0..n).filter(|_| rng.gen_bool(0.5)).collect()).collect();
    let consts = (0..consts).map(|_| rng.gen_range(0..n)).collect();
    base.with_sets(colors).unwrap().with_constants(consts).unwrap()
}

fn addition() -> Verdict {
    let started = Instant::now();
    let vocabs = [
        Vocabulary::graphs(),
        Vocabulary::new(vec![("P".into(), 1), ("E".into(), 2)], 0, 0).unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    // per (vocabulary, sets, shape): the plain union and 20 random tables
    let mut pools: HashMap<(usize, usize, usize), Vec<Scheme>> = HashMap::new();
    for (vi, tau) in vocabs.iter().enumerate() {
        for sets in 0..=1 {
            for (si, shape) in shapes(tau, sets).into_iter().enumerate() {
                let mut pool: BTreeSet<(usize, TuplePattern)> = BTreeSet::new();
                for _ in 0..30 {
                    let a = random_part(tau, sets, shape.k1, 4, &mut rng);
                    let b = random_part(tau, sets, shape.k2, 4, &mut rng);
                    if let Ok(found) = realized_patterns(&a, &b, &shape) {
                        pool.extend(found);
                    }
                }
                let pool: Vec<_> = pool.into_iter().collect();
                let mut schemes = vec![shape.clone()];
                schemes.extend((0..20).map(|_| random_scheme(tau, &shape, &pool, &mut rng)));
                pools.insert((vi, sets, si), schemes);
            }
        }
    }
    let stores = [TheoryStore::new(&vocabs[0]), TheoryStore::new(&vocabs[1])];
    let total = 540;
    let mut per_depth = [0usize; 3];
    for i in 0..total {
        let (vi, sets, depth, si) = (i % 2, i / 2 % 2, i / 4 % 3, i / 12 % 6);
        let schemes = &pools[&(vi, sets, si)];
        let s = &schemes[if rng.gen_bool(0.25) { 0 } else { rng.gen_range(1..schemes.len()) }];
        let max_size = if depth == 2 { 4 } else { 5 };
        // resample until the identified constants are consistent in both parts
        let (m1, m2) = loop {
            let m1 = random_part(&vocabs[vi], sets, s.k1, max_size, &mut rng);
            let m2 = random_part(&vocabs[vi], sets, s.k2, max_size, &mut rng);
            if glue(&m1, &m2, s).is_ok() {
                break (m1, m2);
            }
        };
        let store = &stores[vi];
        let run = || -> mso_core::Result<bool> {
            let t1 = compute_theory(store, &m1, depth)?;
            let t2 = compute_theory(store, &m2, depth)?;
            let direct = compute_theory(store, &glue(&m1, &m2, s)?, depth)?;
            Ok(transfer(store, t1, t2, s)? == direct)
        };
        match run() {
            Ok(true) => per_depth[depth] += 1,
            Ok(false) => return Err(format!("instance {i} (depth {depth}, shape {si}) disagrees")),
            Err(e) => return Err(format!("instance {i}: {e}")),
        }
    }
    let elapsed = started.elapsed();
    if elapsed > Duration::from_secs(300) {
        return Err(format!("{total} instances agree but took {elapsed:?}"));
    }
    Ok(format!(
        "{total} instances agree (depth 0/1/2: {}/{}/{}) in {:.1}s",
        per_depth[0],
        per_depth[1],
        per_depth[2],
        elapsed.as_secs_f64()
    ))
}

fn isomorphism() -> Verdict {
    let tau = Vocabulary::new(vec![("P".into(), 1), ("E".into(), 2)], 0, 0).unwrap();
    let store = TheoryStore::new(&tau);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for i in 0..200 {
        let depth = i % 3;
        let m = random_part(&tau, i % 2, rng.gen_range(0..=2), if depth == 2 { 5 } else { 6 }, &mut rng);
        let p = apply_permutation(&m, &random_permutation(m.size(), &mut rng)).unwrap();
        let a = compute_theory(&store, &m, depth).map_err(|e| e.to_string())?;
        let b = compute_theory(&store, &p, depth).map_err(|e| e.to_string())?;
        if a != b {
            return Err(format!("triple {i} differs"));
        }
    }
    Ok("200 triples, theories equal".into())
}

/// Pairs with equal depth-`d` theories: genuinely different graphs found by
/// bucketing random graphs, topped up with relabeled copies.
fn equal_pairs(store: &TheoryStore, depth: usize, want: usize, max_size: usize, seed: u64) -> (Vec<(Structure, Structure)>, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buckets: BTreeMap<_, Vec<Structure>> = BTreeMap::new();
    let mut pairs = Vec::new();
    for _ in 0..300 {
        if pairs.len() == want {
            break;
        }
        let n = rng.gen_range(1..=max_size);
        let g = random_graph(n, [0.0, 0.3, 0.6, 1.0][rng.gen_range(0..4)], &mut rng);
        let t = compute_theory(store, &g, depth).unwrap();
        let bucket = buckets.entry(t).or_default();
        let fresh = |h: &Structure| h.size() != g.size() || h.degree_sequence(0) != g.degree_sequence(0);
        if let Some(h) = bucket.iter().find(|h| fresh(h)) {
            pairs.push((h.clone(), g.clone()));
        }
        bucket.push(g);
    }
    let genuine = pairs.len();
    while pairs.len() < want {
        let g = random_graph(rng.gen_range(2..=max_size), 0.5, &mut rng);
        let p = apply_permutation(&g, &random_permutation(g.size(), &mut rng)).unwrap();
        pairs.push((g, p));
    }
    (pairs, genuine)
}

fn sentence_agreement() -> Verdict {
    let store = TheoryStore::new(&Vocabulary::graphs());
    let mut report = Vec::new();
    let mut total = 0;
    for (depth, want, max_size) in [(0, 10, 8), (1, 25, 8), (2, 15, 5)] {
        let (pairs, genuine) = equal_pairs(&store, depth, want, max_size, 30 + depth as u64);
        for (i, (a, b)) in pairs.iter().enumerate() {
            if compute_theory(&store, a, depth).unwrap() != compute_theory(&store, b, depth).unwrap() {
                return Err(format!("pair {i} at depth {depth} is not equal"));
            }
            for s in 0..100 {
                let f = random_sentence(a.vocab(), depth, (depth as u64) << 32 | (i as u64) << 8 | s);
                if satisfies(a, &f).map_err(|e| e.to_string())? != satisfies(b, &f).map_err(|e| e.to_string())? {
                    return Err(format!("depth {depth} pair {i} disagrees on {f}"));
                }
            }
            total += 1;
        }
        report.push(format!("d={depth}: {want} pairs ({genuine} non-isomorphic)"));
    }
    Ok(format!("{total} pairs x 100 sentences agree; {}", report.join(", ")))
}

fn closed(class: &GeneratedClass, depth: usize) -> (TheoryStore, ClosureState) {
    let store = TheoryStore::new(&Vocabulary::graphs());
    let base = structure_base(&store, &class.base, depth).unwrap();
    let st = close(&store, base, &class.schemes, depth, 64, 1).unwrap();
    (store, st)
}

/// Every structure built from the base by at most `rounds` scheme
/// applications, no larger than `max_size`.
fn compositions(class: &GeneratedClass, rounds: usize, max_size: usize) -> Vec<Structure> {
    let mut all: Vec<(Structure, usize)> = class.base.iter().map(|m| (m.clone(), 0)).collect();
    for _ in 0..rounds {
        let mut next = Vec::new();
        for (a, ua) in &all {
            for (b, ub) in &all {
                if ua + ub + 1 > rounds {
                    continue;
                }
                for s in &class.schemes {
                    if a.constants().len() != s.k1 || b.constants().len() != s.k2 {
                        continue;
                    }
                    let g = glue(a, b, s).unwrap();
                    if g.size() <= max_size {
                        next.push((g, ua + ub + 1));
                    }
                }
            }
        }
        for item in next {
            if !all.contains(&item) {
                all.push(item);
            }
        }
    }
    all.into_iter().map(|(m, _)| m).collect()
}

fn closure_classes() -> Verdict {
    let mut out = Vec::new();
    for class in [path_class(), matching_class()] {
        let built = compositions(&class, 3, 9);
        for depth in 0..=1 {
            let (store, st) = closed(&class, depth);
            if st.status != mso_core::ClosureStatus::Converged {
                return Err(format!("{} at depth {depth} did not converge", class.name));
            }
            for m in &built {
                if !st.contains(compute_theory(&store, m, depth).unwrap()) {
                    return Err(format!("{} depth {depth}: a size-{} composition is missing", class.name, m.size()));
                }
            }
            let replayed = verify_witnesses(&store, &st, &class.schemes).map_err(|e| e.to_string())?;
            if replayed != st.reachable_all().len() {
                return Err(format!("{} depth {depth}: only {replayed} witnesses replayed", class.name));
            }
            out.push(format!("{}/d{depth}: {} theories, {} compositions", class.name, replayed, built.len()));
        }
    }
    Ok(out.join("; "))
}

/// Compositional spectra at bound 8: (class name, depth) -> sizes.
fn class_spectra() -> Vec<(String, BTreeSet<usize>)> {
    let mut out = Vec::new();
    for class in [matching_class(), path_class()] {
        for depth in 0..=1 {
            let (store, st) = closed(&class, depth);
            let induced = induce_system(&ClosureRecords::from_state(&store, &st));
            let digests: Vec<String> = st.reachable[&class.k].iter().map(|&t| store.digest(t)).collect();
            out.push((format!("{}/d{depth}", class.name), union_spectrum(&induced, &digests, 8).unwrap()));
        }
    }
    out
}

fn spectra_vs_oracle(spectra: &[(String, BTreeSet<usize>)]) -> Verdict {
    let pm = spectrum_bruteforce(&perfect_matching_sentence(), &Vocabulary::graphs(), 8, DEFAULT_SEARCH_NODES)
        .map_err(|e| e.to_string())?;
    let evens: BTreeSet<usize> = [2, 4, 6, 8].into();
    if pm != evens {
        return Err(format!("brute-force matching spectrum {pm:?}"));
    }
    for (name, sizes) in spectra {
        let want = if name.starts_with("matchings") { pm.clone() } else { (2..=8).collect() };
        if *sizes != want {
            return Err(format!("{name}: {sizes:?} expected {want:?}"));
        }
    }
    Ok("matchings = {2,4,6,8} = brute force; paths = {2..8}".into())
}

/// Independent re-check of a certificate by a fresh naive fixpoint.
fn periodic_by_naive(sys: &QuadrupleSystem, t: usize, p: usize, to: usize) -> bool {
    let mut set: BTreeSet<usize> = sys.base[0].clone();
    loop {
        let mut new = Vec::new();
        for r in &sys.rules {
            for &a in &set {
                for &b in &set {
                    let Some(v) = (a + b).checked_sub(r.j) else { continue };
                    if v <= to + p && !set.contains(&v) {
                        new.push(v);
                    }
                }
            }
        }
        if new.is_empty() {
            break;
        }
        set.extend(new);
    }
    (t..=to).all(|x| set.contains(&x) == set.contains(&(x + p)))
}

fn certificates() -> Verdict {
    let cases: [(&[usize], &[usize], Option<usize>, usize); 3] =
        [(&[0], &[3], Some(3), 3), (&[1], &[2], Some(2), 1), (&[0], &[4, 7], None, 1)];
    let mut lines = Vec::new();
    let mut problems = Vec::new();
    for (js, base, want_t, want_p) in cases {
        let sys = QuadrupleSystem::single(js, base);
        let Some(c) = find_period(&sys, 0, 200, 16).map_err(|e| e.to_string())? else {
            return Err(format!("base {base:?}: inconclusive"));
        };
        let t_ok = match want_t {
            Some(t) => c.threshold == t,
            None => c.threshold <= 18,
        };
        if !t_ok || c.period != want_p || c.verified_to < 200 {
            return Err(c.line());
        }
        if !verify_certificate(&sys, &c) || !periodic_by_naive(&sys, c.threshold, c.period, c.verified_to) {
            return Err(format!("base {base:?}: re-verification failed"));
        }
        match &c.pump {
            Some((tree, pp)) => {
                let pumped = pump(&sys, tree, &pp.outer, &pp.inner, 3).map_err(|e| e.to_string())?;
                if validate_tree(&sys, tree).is_err()
                    || validate_tree(&sys, &pumped).is_err()
                    || pumped.value != tree.value + 3 * pp.delta
                    || c.period % pp.delta != 0
                {
                    return Err(format!("base {base:?}: invalid pump witness"));
                }
            }
            None => {
                // report the pumps that do exist, for the record
                let r = reach(&sys, 60, None);
                let deltas: BTreeSet<usize> =
                    r.set(0).iter().filter_map(|&n| r.witness(&sys, 0, n)).filter_map(|t| find_pump(&t)).map(|p| p.delta).collect();
                problems.push(format!(
                    "base {base:?}: T={} p={} re-verified, but no pump increment divides p (increments seen: {deltas:?})",
                    c.threshold, c.period
                ));
            }
        }
        lines.push(format!("T={} p={} {}", c.threshold, c.period, c.status.as_str()));
    }
    if problems.is_empty() {
        Ok(lines.join("; "))
    } else {
        Err(problems.join("; "))
    }
}

fn pumping() -> Verdict {
    let systems = [
        QuadrupleSystem::single(&[0], &[3]),
        QuadrupleSystem::single(&[1], &[2, 5]),
        QuadrupleSystem::single(&[0, 2], &[4, 7]),
        QuadrupleSystem::new(
            2,
            vec![Rule { l1: 0, l2: 1, l3: 1, j: 1 }, Rule { l1: 1, l2: 1, l3: 0, j: 0 }],
            vec![[2].into(), [3].into()],
        )
        .unwrap(),
    ];
    let mut trees: Vec<(&QuadrupleSystem, DerivationTree)> = Vec::new();
    let mut checked_rank = 0;
    for sys in &systems {
        let r = reach(sys, 80, None);
        for l in 0..sys.labels {
            for n in r.set(l) {
                let t = r.witness(sys, l, n).unwrap();
                if validate_tree(sys, &t).is_err() || !rank_bound_holds(sys, &t) {
                    return Err(format!("witness for {n} fails validation or the rank bound"));
                }
                checked_rank += 1;
                if find_pump(&t).is_some() && trees.iter().filter(|(s, _)| std::ptr::eq(*s, sys)).count() < 5 {
                    trees.push((sys, t));
                }
            }
        }
    }
    if trees.len() < 20 {
        return Err(format!("only {} pumpable trees", trees.len()));
    }
    for (sys, t) in &trees {
        let p = find_pump(t).unwrap();
        for i in 0..=5 {
            let u = pump(sys, t, &p.outer, &p.inner, i).map_err(|e| e.to_string())?;
            if validate_tree(sys, &u).is_err() || u.value != t.value + i * p.delta || !rank_bound_holds(sys, &u) {
                return Err(format!("pumping the tree of {} by {i} fails", t.value));
            }
        }
    }
    Ok(format!("{} trees pumped for i=0..5; rank bound on {} witnesses", trees.len(), checked_rank))
}

/// Undirected graphs on `n` vertices up to isomorphism, as edge bitmasks
/// over the pairs `(a, b)`, `a < b`.
fn graphs_up_to_iso(max_n: usize) -> Vec<(usize, u32)> {
    fn pair_index(n: usize, a: usize, b: usize) -> usize {
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        a * n - a * (a + 1) / 2 + (b - a - 1)
    }
    fn relabel(n: usize, mask: u32, perm: &[usize]) -> u32 {
        let mut out = 0;
        for a in 0..n {
            for b in a + 1..n {
                if mask >> pair_index(n, a, b) & 1 == 1 {
                    out |= 1 << pair_index(n, perm[a], perm[b]);
                }
            }
        }
        out
    }
    // minimum over relabelings that sort vertices by degree
    fn canonical(n: usize, mask: u32) -> u32 {
        let deg: Vec<usize> = (0..n)
            .map(|v| (0..n).filter(|&u| u != v && mask >> pair_index(n, u, v) & 1 == 1).count())
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&v| deg[v]);
        let mut best = u32::MAX;
        let mut cur = order.clone();
        permute_blocks(&mut cur, 0, &deg, &mut |ord| {
            let mut perm = vec![0; n];
            for (pos, &v) in ord.iter().enumerate() {
                perm[v] = pos;
            }
            best = best.min(relabel(n, mask, &perm));
        });
        best
    }
    fn permute_blocks(ord: &mut Vec<usize>, i: usize, deg: &[usize], f: &mut dyn FnMut(&[usize])) {
        if i == ord.len() {
            f(ord);
            return;
        }
        let mut j = i;
        while j < ord.len() && deg[ord[j]] == deg[ord[i]] {
            ord.swap(i, j);
            permute_blocks(ord, i + 1, deg, f);
            ord.swap(i, j);
            j += 1;
        }
    }
    let mut out = vec![(1, 0)];
    let mut prev: Vec<u32> = vec![0];
    for n in 2..=max_n {
        let mut seen = BTreeSet::new();
        for &g in &prev {
            // re-index the old pairs for n vertices, then add vertex n-1
            let mut lifted = 0u32;
            for a in 0..n - 1 {
                for b in a + 1..n - 1 {
                    if g >> pair_index(n - 1, a, b) & 1 == 1 {
                        lifted |= 1 << pair_index(n, a, b);
                    }
                }
            }
            for nb in 0u32..1 << (n - 1) {
                let mut h = lifted;
                for a in 0..n - 1 {
                    if nb >> a & 1 == 1 {
                        h |= 1 << pair_index(n, a, n - 1);
                    }
                }
                seen.insert(canonical(n, h));
            }
        }
        prev = seen.into_iter().collect();
        out.extend(prev.iter().map(|&g| (n, g)));
    }
    out
}

fn to_structure(n: usize, mask: u32) -> Structure {
    let mut edges = Vec::new();
    let mut idx = 0;
    for a in 0..n {
        for b in a + 1..n {
            if mask >> idx & 1 == 1 {
                edges.push((a, b));
            }
            idx += 1;
        }
    }
    Structure::graph(n, &edges).unwrap()
}

/// Brute force over assignments of each vertex to A1 only, A2 only or both.
fn naive_split_exists(n: usize, mask: u32, k: usize, m: usize) -> bool {
    let mut adj = vec![0u32; n];
    let mut idx = 0;
    for a in 0..n {
        for b in a + 1..n {
            if mask >> idx & 1 == 1 {
                adj[a] |= 1 << b;
                adj[b] |= 1 << a;
            }
            idx += 1;
        }
    }
    (0..3usize.pow(n as u32)).any(|code| {
        let (mut only1, mut only2, mut both) = (0u32, 0u32, 0u32);
        let mut x = code;
        for v in 0..n {
            match x % 3 {
                0 => only1 |= 1 << v,
                1 => only2 |= 1 << v,
                _ => both |= 1 << v,
            }
            x /= 3;
        }
        both.count_ones() as usize <= k
            && (only1 | both).count_ones() as usize >= m
            && (only2 | both).count_ones() as usize >= m
            && (0..n).all(|v| only1 >> v & 1 == 0 || adj[v] & only2 == 0)
    })
}

fn decomposition() -> Verdict {
    for n in 5..=7 {
        let g = incidence_graph(n).map_err(|e| e.to_string())?;
        if decompose(&g, 2, 6, DEFAULT_SEPARATOR_BUDGET).map_err(|e| e.to_string())?.is_some() {
            return Err(format!("incidence graph of K{n} splits"));
        }
    }
    for n in 3..=8 {
        let p = Structure::path(n);
        match decompose(&p, 1, 2, DEFAULT_SEPARATOR_BUDGET).map_err(|e| e.to_string())? {
            Some(s) if validate_split(&p, &s, 1, 2).is_ok() => {}
            _ => return Err(format!("P{n} has no valid split")),
        }
    }
    let graphs = graphs_up_to_iso(7);
    let mut cases = 0;
    for &(n, mask) in &graphs {
        let g = to_structure(n, mask);
        for k in 0..=3 {
            for m in 0..=n {
                let split = decompose(&g, k, m, DEFAULT_SEPARATOR_BUDGET).map_err(|e| e.to_string())?;
                if split.is_some() != naive_split_exists(n, mask, k, m) {
                    return Err(format!("disagreement on a {n}-vertex graph, k={k} m={m}"));
                }
                if let Some(s) = split {
                    validate_split(&g, &s, k, m)?;
                }
                cases += 1;
            }
        }
    }
    Ok(format!(
        "incidence 5..7 none, P3..P8 split, {} graphs up to iso ({cases} cases) agree with brute force",
        graphs.len()
    ))
}

fn gaps(spectra: &[(String, BTreeSet<usize>)]) -> Verdict {
    let mut bad = Vec::new();
    for (name, sizes) in spectra {
        let a = audit_gaps(sizes, 2.0, 0).map_err(|e| e.to_string())?;
        if !a.violations.is_empty() {
            bad.push(format!("{name} violations {:?} (least passing threshold {})", a.violations, a.least_passing));
        }
    }
    let synthetic = audit_gaps(&[4, 8].into(), 2.0, 0).map_err(|e| e.to_string())?;
    if synthetic.violations != vec![(4, 8)] {
        bad.push(format!("{{4,8}} gave {:?}", synthetic.violations));
    }
    if bad.is_empty() {
        Ok("no violations on class spectra; {4,8} flags (4,8)".into())
    } else {
        Err(bad.join("; "))
    }
}

fn determinism() -> Verdict {
    let run = |jobs: &str| -> Result<Vec<u8>, String> {
        let out = Command::new(env!("CARGO_BIN_EXE_mso"))
            .args(["selfcheck", "--seed", "7", "--jobs", jobs])
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("selfcheck --jobs {jobs} exited with {}", out.status));
        }
        Ok(out.stdout)
    };
    let a = run("1")?;
    let b = run("1")?;
    let c = run("4")?;
    if a != b || a != c {
        return Err("reports differ".into());
    }
    Ok(format!("three runs byte-identical ({} bytes)", a.len()))
}
