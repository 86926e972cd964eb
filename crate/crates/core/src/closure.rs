//! Fixpoint of the reachable theories of a class generated from base models
//! by gluing schemes, with every composition fact recorded.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::composition::{glue, Scheme, TransferEngine};
use crate::error::{Error, Result};
use crate::structures::Structure;
use crate::theory::{compute_theory, small_model_theories, TheoryId, TheoryStore};

/// A base theory with the sizes of base models realizing it and a smallest one.
#[derive(Clone, Debug)]
pub struct BaseTheory {
    pub theory: TheoryId,
    pub consts: usize,
    pub sizes: BTreeSet<usize>,
    pub witness: Structure,
}

/// `t = F(t1, t2, schemes[scheme])` with size deficit `j`, found in `round`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Fact {
    pub t1: TheoryId,
    pub t2: TheoryId,
    pub scheme: usize,
    pub t: TheoryId,
    pub j: usize,
    pub round: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClosureStatus {
    Converged,
    NotConverged,
}

/// How a theory was first obtained with minimal size.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Derivation {
    Base { size: usize },
    Fact { fact: usize, size: usize },
}

impl Derivation {
    pub fn size(&self) -> usize {
        match *self {
            Derivation::Base { size } | Derivation::Fact { size, .. } => size,
        }
    }
}

pub struct ClosureState {
    pub depth: usize,
    pub status: ClosureStatus,
    /// Number of rounds that added theories.
    pub iterations: usize,
    /// Whether one more full pass after convergence found nothing new.
    pub rescan_stable: bool,
    pub base: Vec<BaseTheory>,
    pub facts: Vec<Fact>,
    pub scheme_ids: Vec<String>,
    /// Reachable theories per constant count, in discovery order.
    pub reachable: BTreeMap<usize, Vec<TheoryId>>,
    /// Round in which each theory first appeared (0 for base theories).
    pub level: HashMap<TheoryId, usize>,
    pub witnesses: HashMap<TheoryId, Derivation>,
}

impl ClosureState {
    pub fn reachable_all(&self) -> Vec<TheoryId> {
        self.reachable.values().flatten().copied().collect()
    }

    pub fn contains(&self, t: TheoryId) -> bool {
        self.level.contains_key(&t)
    }
}

/// Base theories from the small models of every size up to `k_star`, for
/// each constant count in `consts`.
pub fn small_model_base(
    store: &TheoryStore,
    depth: usize,
    k_star: usize,
    consts: &[usize],
    enumeration_bits: usize,
) -> Result<Vec<BaseTheory>> {
    let mut out = Vec::new();
    for &k in consts {
        for s in small_model_theories(store, depth, k_star, k, false, enumeration_bits)? {
            out.push(BaseTheory {
                theory: s.theory,
                consts: k,
                sizes: s.sizes,
                witness: s.witness,
            });
        }
    }
    Ok(out)
}

/// Base theories of explicitly given models.
pub fn structure_base(store: &TheoryStore, models: &[Structure], depth: usize) -> Result<Vec<BaseTheory>> {
    let mut by_theory: BTreeMap<TheoryId, BaseTheory> = BTreeMap::new();
    let mut order = Vec::new();
    for m in models {
        let t = compute_theory(store, m, depth)?;
        let entry = by_theory.entry(t).or_insert_with(|| {
            order.push(t);
            BaseTheory {
                theory: t,
                consts: m.constants().len(),
                sizes: BTreeSet::new(),
                witness: m.clone(),
            }
        });
        entry.sizes.insert(m.size());
        if m.size() < entry.witness.size() {
            entry.witness = m.clone();
        }
    }
    Ok(order.into_iter().map(|t| by_theory.remove(&t).unwrap()).collect())
}

/// Close the base under the schemes: `T^{i+1}_k = T^i_k ∪ { F(t1, t2, s) }`
/// until nothing new appears or `max_iter` growth rounds have run.
pub fn close(
    store: &TheoryStore,
    base: Vec<BaseTheory>,
    schemes: &[Scheme],
    depth: usize,
    max_iter: usize,
    jobs: usize,
) -> Result<ClosureState> {
    if max_iter == 0 {
        return Err(Error::Invalid("max_iter must be at least 1".into()));
    }
    for b in &base {
        if store.depth(b.theory) != depth {
            return Err(Error::Signature("base theories and closure depth differ".into()));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    let tau = store.tau().clone();
    let mut engines: Vec<TransferEngine> = schemes.iter().cloned().map(TransferEngine::new).collect();
    let mut reachable: BTreeMap<usize, Vec<TheoryId>> = BTreeMap::new();
    let mut level: HashMap<TheoryId, usize> = HashMap::new();
    for b in &base {
        if !level.contains_key(&b.theory) {
            level.insert(b.theory, 0);
            reachable.entry(b.consts).or_default().push(b.theory);
        }
    }
    let mut facts = Vec::new();
    // theories known before the previous round started, per constant count
    let mut old: BTreeMap<usize, usize> = BTreeMap::new();
    let mut iterations = 0;
    let mut round = 0;
    let status = loop {
        round += 1;
        let snapshot = reachable.clone();
        let prev_old = old.clone();
        let results: Vec<Result<Vec<(TheoryId, TheoryId, TheoryId, usize)>>> = pool.install(|| {
            engines
                .par_iter_mut()
                .map(|engine| {
                    let s = engine.scheme().clone();
                    let l1 = snapshot.get(&s.k1).cloned().unwrap_or_default();
                    let l2 = snapshot.get(&s.k2).cloned().unwrap_or_default();
                    let o1 = prev_old.get(&s.k1).copied().unwrap_or(0);
                    let o2 = prev_old.get(&s.k2).copied().unwrap_or(0);
                    let mut out = Vec::new();
                    for (a, &t1) in l1.iter().enumerate() {
                        for (b, &t2) in l2.iter().enumerate() {
                            // pairs of old theories were tried in an earlier round
                            if a < o1 && b < o2 {
                                continue;
                            }
                            match engine.apply(store, t1, t2) {
                                Ok((t, j)) => out.push((t1, t2, t, j)),
                                Err(Error::NotApplicable(_)) => {}
                                Err(e) => return Err(e),
                            }
                        }
                    }
                    Ok(out)
                })
                .collect()
        });
        old = snapshot.iter().map(|(&k, v)| (k, v.len())).collect();
        let mut grew = false;
        for (si, res) in results.into_iter().enumerate() {
            for (t1, t2, t, j) in res? {
                facts.push(Fact {
                    t1,
                    t2,
                    scheme: si,
                    t,
                    j,
                    round,
                });
                if let std::collections::hash_map::Entry::Vacant(e) = level.entry(t) {
                    e.insert(round);
                    reachable.entry(schemes[si].k).or_default().push(t);
                    grew = true;
                }
            }
        }
        if !grew {
            break ClosureStatus::Converged;
        }
        iterations += 1;
        if iterations >= max_iter {
            break ClosureStatus::NotConverged;
        }
    };
    let rescan_stable = status == ClosureStatus::Converged && {
        let mut stable = true;
        for engine in engines.iter_mut() {
            let s = engine.scheme().clone();
            for &t1 in reachable.get(&s.k1).map(Vec::as_slice).unwrap_or(&[]) {
                for &t2 in reachable.get(&s.k2).map(Vec::as_slice).unwrap_or(&[]) {
                    if let Ok((t, _)) = engine.apply(store, t1, t2) {
                        stable &= level.contains_key(&t);
                    }
                }
            }
        }
        stable
    };
    let witnesses = minimal_derivations(&base, &facts, &level);
    Ok(ClosureState {
        depth,
        status,
        iterations,
        rescan_stable,
        base,
        facts,
        scheme_ids: schemes.iter().map(|s| s.id(&tau)).collect(),
        reachable,
        level,
        witnesses,
    })
}

/// Smallest-size derivation of every theory using only theories of
/// strictly lower level, so the derivations are well founded. Ties go to
/// the base, then to the earliest fact.
fn minimal_derivations(base: &[BaseTheory], facts: &[Fact], level: &HashMap<TheoryId, usize>) -> HashMap<TheoryId, Derivation> {
    let mut best: HashMap<TheoryId, Derivation> = HashMap::new();
    for b in base {
        let size = *b.sizes.iter().next().expect("base theory has a size");
        let better = best.get(&b.theory).is_none_or(|d| size < d.size());
        if better {
            best.insert(b.theory, Derivation::Base { size });
        }
    }
    let max_level = level.values().copied().max().unwrap_or(0);
    let mut by_level: Vec<Vec<usize>> = vec![Vec::new(); max_level + 1];
    for (i, f) in facts.iter().enumerate() {
        by_level[level[&f.t]].push(i);
    }
    for fact_ids in by_level.iter().skip(1) {
        for &i in fact_ids {
            let f = facts[i];
            let lt = level[&f.t];
            if level[&f.t1] >= lt || level[&f.t2] >= lt {
                continue;
            }
            let (Some(d1), Some(d2)) = (best.get(&f.t1), best.get(&f.t2)) else {
                continue;
            };
            let size = d1.size() + d2.size() - f.j;
            if best.get(&f.t).is_none_or(|d| size < d.size()) {
                best.insert(f.t, Derivation::Fact { fact: i, size });
            }
        }
    }
    best
}

/// Rebuild a model of `t` by replaying its stored derivation.
pub fn replay_witness(state: &ClosureState, schemes: &[Scheme], t: TheoryId) -> Result<Structure> {
    match state.witnesses.get(&t) {
        None => Err(Error::Invalid("theory is not reachable".into())),
        Some(Derivation::Base { .. }) => Ok(state
            .base
            .iter()
            .find(|b| b.theory == t)
            .map(|b| b.witness.clone())
            .expect("base witness")),
        Some(&Derivation::Fact { fact, .. }) => {
            let f = state.facts[fact];
            let m1 = replay_witness(state, schemes, f.t1)?;
            let m2 = replay_witness(state, schemes, f.t2)?;
            glue(&m1, &m2, &schemes[f.scheme])
        }
    }
}

/// Replay every witness and recompute its theory. Returns the number of
/// theories checked, or the first mismatch.
pub fn verify_witnesses(store: &TheoryStore, state: &ClosureState, schemes: &[Scheme]) -> Result<usize> {
    let mut checked = 0;
    for t in state.reachable_all() {
        let w = replay_witness(state, schemes, t)?;
        let expected = state.witnesses[&t].size();
        if w.size() != expected {
            return Err(Error::Invalid(format!(
                "witness for {} has size {}, derivation says {expected}",
                store.digest(t),
                w.size()
            )));
        }
        if compute_theory(store, &w, state.depth)? != t {
            return Err(Error::Invalid(format!("witness for {} has a different theory", store.digest(t))));
        }
        checked += 1;
    }
    Ok(checked)
}

/// A composition fact with theories named by digest.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FactRecord {
    pub t1: String,
    pub t2: String,
    pub scheme: String,
    pub t: String,
    pub j: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BaseRecord {
    pub t: String,
    pub size: usize,
    pub k: usize,
}

/// The portable result of a closure: everything spectra need.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ClosureRecords {
    pub base: Vec<BaseRecord>,
    pub facts: Vec<FactRecord>,
}

impl ClosureRecords {
    pub fn from_state(store: &TheoryStore, state: &ClosureState) -> Self {
        let mut base: Vec<BaseRecord> = state
            .base
            .iter()
            .flat_map(|b| {
                let d = store.digest(b.theory);
                b.sizes.iter().map(move |&size| BaseRecord {
                    t: d.clone(),
                    size,
                    k: b.consts,
                })
            })
            .collect();
        base.sort();
        base.dedup();
        let mut facts: Vec<FactRecord> = state
            .facts
            .iter()
            .map(|f| FactRecord {
                t1: store.digest(f.t1),
                t2: store.digest(f.t2),
                scheme: state.scheme_ids[f.scheme].clone(),
                t: store.digest(f.t),
                j: f.j,
            })
            .collect();
        facts.sort();
        facts.dedup();
        ClosureRecords { base, facts }
    }

    pub fn base_text(&self) -> String {
        let mut out = String::new();
        for b in &self.base {
            writeln!(out, "base t={} size={} k={}", b.t, b.size, b.k).unwrap();
        }
        out
    }

    pub fn facts_text(&self) -> String {
        let mut out = String::new();
        for f in &self.facts {
            writeln!(out, "fact t1={} t2={} scheme={} t={} j={}", f.t1, f.t2, f.scheme, f.t, f.j).unwrap();
        }
        out
    }

    /// Parse base and fact lines (from one or two files).
    pub fn parse(base_text: &str, facts_text: &str) -> Result<Self> {
        let mut rec = ClosureRecords::default();
        for (text, want) in [(base_text, "base"), (facts_text, "fact")] {
            for (no, raw) in text.lines().enumerate() {
                let line = raw.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let perr = |m: &str| Error::parse(no + 1, m.to_string());
                let mut toks = line.split_whitespace();
                let kind = toks.next().unwrap();
                if kind != want {
                    return Err(perr(&format!("expected `{want}` line")));
                }
                let mut fields = HashMap::new();
                for tok in toks {
                    let (k, v) = tok.split_once('=').ok_or_else(|| perr("expected key=value"))?;
                    fields.insert(k, v);
                }
                let get = |k: &str| fields.get(k).map(|s| s.to_string()).ok_or_else(|| perr(&format!("missing {k}")));
                let num = |k: &str| -> Result<usize> { get(k)?.parse().map_err(|_| perr(&format!("bad {k}"))) };
                if kind == "base" {
                    rec.base.push(BaseRecord {
                        t: get("t")?,
                        size: num("size")?,
                        k: num("k")?,
                    });
                } else {
                    rec.facts.push(FactRecord {
                        t1: get("t1")?,
                        t2: get("t2")?,
                        scheme: get("scheme")?,
                        t: get("t")?,
                        j: num("j")?,
                    });
                }
            }
        }
        rec.base.sort();
        rec.facts.sort();
        Ok(rec)
    }

    /// Every theory digest mentioned, sorted.
    pub fn digests(&self) -> Vec<String> {
        let mut all: HashSet<&str> = HashSet::new();
        for b in &self.base {
            all.insert(&b.t);
        }
        for f in &self.facts {
            all.insert(&f.t1);
            all.insert(&f.t2);
            all.insert(&f.t);
        }
        let mut v: Vec<String> = all.into_iter().map(String::from).collect();
        v.sort();
        v
    }
}
