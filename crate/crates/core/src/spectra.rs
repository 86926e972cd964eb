//! Size spectra of reachable theories via the induced number-set system,
//! and a gap auditor for spectra.

use std::collections::{BTreeMap, BTreeSet};

use crate::closure::{replay_witness, ClosureRecords, ClosureState};
use crate::composition::Scheme;
use crate::error::{Error, Result};
use crate::numbersets::{find_period, reach, PeriodicityCertificate, QuadrupleSystem, Rule};
use crate::oracle::{satisfies, Formula};
use crate::theory::TheoryStore;

/// The quadruple system induced by a closure: one label per theory digest
/// (sorted), one rule per fact, base sets from the base sizes.
#[derive(Clone, Debug)]
pub struct InducedSystem {
    pub system: QuadrupleSystem,
    pub labels: Vec<String>,
}

impl InducedSystem {
    pub fn label(&self, digest: &str) -> Option<usize> {
        self.labels.binary_search_by(|d| d.as_str().cmp(digest)).ok()
    }
}

pub fn induce_system(records: &ClosureRecords) -> InducedSystem {
    let labels = records.digests();
    let index: BTreeMap<&str, usize> = labels.iter().enumerate().map(|(i, d)| (d.as_str(), i)).collect();
    let mut base = vec![BTreeSet::new(); labels.len()];
    for b in &records.base {
        base[index[b.t.as_str()]].insert(b.size);
    }
    let mut rules: Vec<Rule> = records
        .facts
        .iter()
        .map(|f| Rule {
            l1: index[f.t1.as_str()],
            l2: index[f.t2.as_str()],
            l3: index[f.t.as_str()],
            j: f.j,
        })
        .collect();
    rules.sort();
    rules.dedup();
    let system = QuadrupleSystem::new(labels.len(), rules, base).expect("labels in range");
    InducedSystem { system, labels }
}

#[derive(Clone, Copy, Debug)]
pub struct SpectrumOptions {
    pub bound: usize,
    pub scan: usize,
    pub window: usize,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions {
            bound: 50,
            scan: 200,
            window: 16,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SpectrumReport {
    pub digest: String,
    pub bound: usize,
    pub sizes: Vec<usize>,
    pub slack_stable: bool,
    /// `None` when no period fits the scan window.
    pub certificate: Option<PeriodicityCertificate>,
}

impl SpectrumReport {
    pub fn render(&self) -> String {
        let sizes: Vec<String> = self.sizes.iter().map(|n| n.to_string()).collect();
        let cert = match &self.certificate {
            Some(c) => c.line(),
            None => "periodicity inconclusive".to_string(),
        };
        format!("spectrum t={} bound={} sizes={}\n{cert}\n", self.digest, self.bound, sizes.join(","))
    }
}

/// `Sp_t` up to the bound, with a periodicity certificate.
pub fn spectrum(induced: &InducedSystem, digest: &str, opts: SpectrumOptions) -> Result<SpectrumReport> {
    let label = induced
        .label(digest)
        .ok_or_else(|| Error::UnknownDigest(digest.to_string()))?;
    let r = reach(&induced.system, opts.bound, None);
    let certificate = find_period(&induced.system, label, opts.scan.max(2 * opts.window), opts.window)?;
    Ok(SpectrumReport {
        digest: digest.to_string(),
        bound: opts.bound,
        sizes: r.set(label),
        slack_stable: r.slack_stable,
        certificate,
    })
}

/// Union of `Sp_t` over the given theories, up to the bound.
pub fn union_spectrum(induced: &InducedSystem, digests: &[String], bound: usize) -> Result<BTreeSet<usize>> {
    let r = reach(&induced.system, bound, None);
    let mut out = BTreeSet::new();
    for d in digests {
        let l = induced.label(d).ok_or_else(|| Error::UnknownDigest(d.clone()))?;
        out.extend(r.set(l));
    }
    Ok(out)
}

/// `Sp(ψ)` restricted to one constant count: the union of `Sp_t` over the
/// reachable theories with `k` constants whose witness satisfies ψ. The
/// closure depth must be at least the quantifier depth of ψ, since only
/// then does the theory decide ψ.
pub fn sentence_spectrum(
    store: &TheoryStore,
    state: &ClosureState,
    schemes: &[Scheme],
    k: usize,
    sentence: &Formula,
    bound: usize,
) -> Result<BTreeSet<usize>> {
    let qd = sentence.quantifier_depth();
    if qd > state.depth {
        return Err(Error::Invalid(format!(
            "sentence has quantifier depth {qd}, closure depth is {}",
            state.depth
        )));
    }
    let induced = induce_system(&ClosureRecords::from_state(store, state));
    let mut chosen = Vec::new();
    for &t in state.reachable.get(&k).map(Vec::as_slice).unwrap_or(&[]) {
        let w = replay_witness(state, schemes, t)?;
        if satisfies(&w, sentence)? {
            chosen.push(store.digest(t));
        }
    }
    union_spectrum(&induced, &chosen, bound)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GapAudit {
    pub ratio: f64,
    pub threshold: usize,
    /// Successive members `(n1, n2)` with `n1 > threshold` and `n2 ≥ ratio·n1`.
    pub violations: Vec<(usize, usize)>,
    /// Least threshold for which the audit passes.
    pub least_passing: usize,
}

pub fn audit_gaps(sizes: &BTreeSet<usize>, ratio: f64, threshold: usize) -> Result<GapAudit> {
    if ratio.is_nan() || ratio <= 1.0 {
        return Err(Error::Invalid(format!("ratio must exceed 1, got {ratio}")));
    }
    let v: Vec<usize> = sizes.iter().copied().collect();
    let mut violations = Vec::new();
    let mut least_passing = 0;
    for w in v.windows(2) {
        let (n1, n2) = (w[0], w[1]);
        if n2 as f64 >= ratio * n1 as f64 {
            least_passing = least_passing.max(n1);
            if n1 > threshold {
                violations.push((n1, n2));
            }
        }
    }
    Ok(GapAudit {
        ratio,
        threshold,
        violations,
        least_passing,
    })
}

/// Sizes from a comma or whitespace separated list.
pub fn parse_sizes(text: &str) -> Result<BTreeSet<usize>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::parse(0, format!("bad size `{s}`"))))
        .collect()
}
