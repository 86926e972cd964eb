//! Weak decomposability of single structures: splits into two large
//! submodels with a small overlap whose relations cover the whole, and the
//! search for small models with the same theory.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::structures::{enumerate_structures, Structure};
use crate::theory::{compute_theory, TheoryStore};

/// Default limit on the number of separators examined.
pub const DEFAULT_SEPARATOR_BUDGET: u128 = 1_000_000;

/// Two submodels: universes `a1`, `a2` and the relation tuples of each.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub a1: BTreeSet<usize>,
    pub a2: BTreeSet<usize>,
    pub rel1: Vec<BTreeSet<Vec<usize>>>,
    pub rel2: Vec<BTreeSet<Vec<usize>>>,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |s: &BTreeSet<usize>| s.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(",");
        write!(f, "SPLIT A1={{{}}} A2={{{}}}", show(&self.a1), show(&self.a2))
    }
}

/// Check a split against the definition: the universes cover `M`, overlap in
/// at most `k` elements, both have at least `m` elements, each part's
/// tuples live inside its universe, and the parts' relations union to `M`'s.
pub fn validate_split(model: &Structure, split: &Split, k: usize, m: usize) -> std::result::Result<(), String> {
    let universe: BTreeSet<usize> = (0..model.size()).collect();
    let union: BTreeSet<usize> = split.a1.union(&split.a2).copied().collect();
    if union != universe {
        return Err("A1 ∪ A2 is not the universe".into());
    }
    let overlap = split.a1.intersection(&split.a2).count();
    if overlap > k {
        return Err(format!("overlap {overlap} exceeds {k}"));
    }
    if split.a1.len() < m || split.a2.len() < m {
        return Err(format!("part sizes {} and {} below {m}", split.a1.len(), split.a2.len()));
    }
    let preds = model.relations().len();
    if split.rel1.len() != preds || split.rel2.len() != preds {
        return Err("wrong number of relations".into());
    }
    for p in 0..preds {
        for (rel, a, name) in [(&split.rel1[p], &split.a1, "M1"), (&split.rel2[p], &split.a2, "M2")] {
            for t in rel {
                if !t.iter().all(|e| a.contains(e)) {
                    return Err(format!("tuple {t:?} of {name} leaves its universe"));
                }
                if !model.relation(p).contains(t) {
                    return Err(format!("tuple {t:?} of {name} is not in M"));
                }
            }
        }
        let covered: BTreeSet<&Vec<usize>> = split.rel1[p].iter().chain(&split.rel2[p]).collect();
        if covered.len() != model.relation(p).len() {
            return Err("the parts do not cover every relation tuple".into());
        }
    }
    Ok(())
}

fn binomial(n: usize, r: usize) -> u128 {
    if r > n {
        return 0;
    }
    (0..r).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Number of separators of size at most `k` among `n` elements.
pub fn separator_count(n: usize, k: usize) -> u128 {
    (0..=k.min(n)).map(|c| binomial(n, c)).sum()
}

/// A split with overlap ≤ `k` and parts of size ≥ `m`, if one exists.
///
/// For every candidate overlap `C`, the elements outside `C` fall into
/// connected components of the tuples not inside `C`; each component must go
/// wholly to one side, so a split over `C` exists iff the component sizes
/// can be divided with both sides reaching `m - |C|`.
pub fn decompose(model: &Structure, k: usize, m: usize, separator_budget: u128) -> Result<Option<Split>> {
    let n = model.size();
    let required = separator_count(n, k);
    if required > separator_budget {
        return Err(Error::budget("separators", required, separator_budget));
    }
    let tuples: Vec<&Vec<usize>> = model.relations().iter().flatten().collect();
    for c in 0..=k.min(n) {
        let mut sep: Vec<usize> = (0..c).collect();
        loop {
            if let Some(split) = split_over(model, &tuples, &sep, m) {
                return Ok(Some(split));
            }
            if !next_combination(&mut sep, n) {
                break;
            }
        }
    }
    Ok(None)
}

fn next_combination(comb: &mut [usize], n: usize) -> bool {
    let r = comb.len();
    let mut i = r;
    while i > 0 {
        i -= 1;
        if comb[i] < n - r + i {
            comb[i] += 1;
            for j in i + 1..r {
                comb[j] = comb[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    let mut x = x;
    while parent[x] != r {
        let next = parent[x];
        parent[x] = r;
        x = next;
    }
    r
}

fn split_over(model: &Structure, tuples: &[&Vec<usize>], sep: &[usize], m: usize) -> Option<Split> {
    let n = model.size();
    let mut in_sep = vec![false; n];
    for &s in sep {
        in_sep[s] = true;
    }
    let mut parent: Vec<usize> = (0..n).collect();
    for t in tuples {
        let mut outside = t.iter().copied().filter(|&e| !in_sep[e]);
        if let Some(first) = outside.next() {
            for e in outside {
                let (a, b) = (find(&mut parent, first), find(&mut parent, e));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    // components in order of their smallest element
    let mut comp_of = vec![usize::MAX; n];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    for e in 0..n {
        if in_sep[e] {
            continue;
        }
        let r = find(&mut parent, e);
        if comp_of[r] == usize::MAX {
            comp_of[r] = comps.len();
            comps.push(Vec::new());
        }
        comp_of[e] = comp_of[r];
        comps[comp_of[e]].push(e);
    }
    let need = m.saturating_sub(sep.len());
    let total: usize = comps.iter().map(Vec::len).sum();
    if total < 2 * need {
        return None;
    }
    // reach[i][s]: sum s attainable from the first i components
    let mut reach = vec![vec![false; total + 1]; comps.len() + 1];
    reach[0][0] = true;
    for (i, comp) in comps.iter().enumerate() {
        for s in 0..=total {
            if reach[i][s] {
                reach[i + 1][s] = true;
                reach[i + 1][s + comp.len()] = true;
            }
        }
    }
    let target = (need..=total - need).find(|&s| reach[comps.len()][s])?;
    let mut side1 = vec![false; comps.len()];
    let mut s = target;
    for i in (0..comps.len()).rev() {
        if !reach[i][s] {
            side1[i] = true;
            s -= comps[i].len();
        }
    }
    let mut a1: BTreeSet<usize> = sep.iter().copied().collect();
    let mut a2 = a1.clone();
    for (i, comp) in comps.iter().enumerate() {
        if side1[i] {
            a1.extend(comp);
        } else {
            a2.extend(comp);
        }
    }
    let preds = model.relations().len();
    let mut rel1 = vec![BTreeSet::new(); preds];
    let mut rel2 = vec![BTreeSet::new(); preds];
    for (p, rel) in model.relations().iter().enumerate() {
        for t in rel {
            // tuples inside the separator go to the first part
            match t.iter().find(|&&e| !in_sep[e]) {
                Some(&e) if !side1[comp_of[e]] => rel2[p].insert(t.clone()),
                _ => rel1[p].insert(t.clone()),
            };
        }
    }
    Some(Split { a1, a2, rel1, rel2 })
}

/// The definition read literally: try every assignment of each element to
/// part 1, part 2 or both. Exponential; for cross-checking only.
pub fn decompose_naive(model: &Structure, k: usize, m: usize) -> bool {
    let n = model.size();
    let tuples: Vec<&Vec<usize>> = model.relations().iter().flatten().collect();
    let mut side = vec![0u8; n];
    loop {
        let both = side.iter().filter(|&&s| s == 2).count();
        let s1 = side.iter().filter(|&&s| s != 1).count();
        let s2 = side.iter().filter(|&&s| s != 0).count();
        if both <= k
            && s1 >= m
            && s2 >= m
            && tuples
                .iter()
                .all(|t| t.iter().all(|&e| side[e] != 1) || t.iter().all(|&e| side[e] != 0))
        {
            return true;
        }
        // side 0: only A1, 1: only A2, 2: both
        let mut i = 0;
        loop {
            if i == n {
                return false;
            }
            side[i] += 1;
            if side[i] < 3 {
                break;
            }
            side[i] = 0;
            i += 1;
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProfileRow {
    pub size: usize,
    pub split: Option<Split>,
}

pub fn decomposability_profile(family: &[Structure], k: usize, m: usize, separator_budget: u128) -> Result<Vec<ProfileRow>> {
    family
        .iter()
        .map(|s| {
            Ok(ProfileRow {
                size: s.size(),
                split: decompose(s, k, m, separator_budget)?,
            })
        })
        .collect()
}

/// A structure with more elements than constants and at most `size_max`
/// elements having the same depth-`d` theory as `model`; the model itself
/// when it already qualifies, else the first hit of an exhaustive search
/// by increasing size.
pub fn find_small_equivalent(
    store: &TheoryStore,
    model: &Structure,
    depth: usize,
    size_max: usize,
    enumeration_bits: usize,
) -> Result<Option<Structure>> {
    let k = model.constants().len();
    if model.size() > k && model.size() <= size_max {
        return Ok(Some(model.clone()));
    }
    let target = compute_theory(store, model, depth)?;
    for size in k + 1..=size_max {
        for cand in enumerate_structures(model.vocab(), size, enumeration_bits)? {
            if compute_theory(store, &cand, depth)? == target {
                return Ok(Some(cand));
            }
        }
    }
    Ok(None)
}
