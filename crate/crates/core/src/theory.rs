//! Depth-n monadic theories `Th^n(M, U_0..U_{m-1}, c_0..c_{k-1})`.
//!
//! Depth 0 is the set of complete diagrams realized by tuples of length
//! `arity(τ)+1`, together with the diagram of the constants. Depth `n+1` is
//! the set of depth-`n` theories of all expansions by one more set. Values
//! are hash-consed in a [`TheoryStore`]; equal theories get equal ids.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::sync::RwLock;

use rustc_hash::FxHashMap as HashMap;
use sha2::{Digest, Sha256};

use crate::diagram::{Diagram, Term, MAX_TERMS};
use crate::error::{Error, Result};
use crate::structures::{all_tuples, enumerate_structures, Structure, Vocabulary};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TheoryId(pub(crate) u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DiagramId(pub(crate) u32);

impl TheoryId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// One interned theory value. For depth 0 `members` are [`DiagramId`]s of
/// realized tuple diagrams, otherwise [`TheoryId`]s of depth `depth-1`
/// theories over `sets+1` sets. Members are sorted.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TheoryNode {
    pub depth: u8,
    pub sets: u8,
    pub consts: u8,
    pub const_diagram: DiagramId,
    pub members: Vec<u32>,
}

#[derive(Default)]
struct Inner {
    diagrams: Vec<Diagram>,
    diagram_digests: Vec<[u8; 32]>,
    diagram_index: HashMap<Diagram, DiagramId>,
    nodes: Vec<TheoryNode>,
    node_digests: Vec<[u8; 32]>,
    node_index: HashMap<TheoryNode, TheoryId>,
    by_digest: HashMap<[u8; 32], TheoryId>,
}

/// Append-only interner for diagrams and theories over one vocabulary `τ`.
/// Lookups and inserts are atomic get-or-insert operations, so the store
/// can be shared between threads.
pub struct TheoryStore {
    tau: Vocabulary,
    arities: Vec<usize>,
    inner: RwLock<Inner>,
}

impl TheoryStore {
    pub fn new(tau: &Vocabulary) -> Self {
        let tau = tau.with_consts(0).with_sets(0);
        TheoryStore {
            arities: tau.arities(),
            tau,
            inner: RwLock::new(Inner::default()),
        }
    }

    pub fn tau(&self) -> &Vocabulary {
        &self.tau
    }

    pub fn arities(&self) -> &[usize] {
        &self.arities
    }

    /// Tuple length of the depth-0 layer: `arity(τ)+1`.
    pub fn tuple_len(&self) -> usize {
        self.tau.arity() + 1
    }

    pub fn intern_diagram(&self, d: Diagram) -> DiagramId {
        if let Some(&id) = self.inner.read().unwrap().diagram_index.get(&d) {
            return id;
        }
        let mut inner = self.inner.write().unwrap();
        if let Some(&id) = inner.diagram_index.get(&d) {
            return id;
        }
        let id = DiagramId(inner.diagrams.len() as u32);
        let digest: [u8; 32] = Sha256::digest(d.canonical_bytes()).into();
        inner.diagrams.push(d.clone());
        inner.diagram_digests.push(digest);
        inner.diagram_index.insert(d, id);
        id
    }

    pub fn diagram(&self, id: DiagramId) -> Diagram {
        self.inner.read().unwrap().diagrams[id.0 as usize].clone()
    }

    /// Intern a node whose members are already interned. Members are sorted
    /// and deduplicated here.
    pub(crate) fn intern_node(&self, mut node: TheoryNode) -> TheoryId {
        node.members.sort_unstable();
        node.members.dedup();
        if let Some(&id) = self.inner.read().unwrap().node_index.get(&node) {
            return id;
        }
        let mut inner = self.inner.write().unwrap();
        if let Some(&id) = inner.node_index.get(&node) {
            return id;
        }
        let digest = self.node_digest(&inner, &node);
        let id = TheoryId(inner.nodes.len() as u32);
        inner.nodes.push(node.clone());
        inner.node_digests.push(digest);
        inner.node_index.insert(node, id);
        inner.by_digest.entry(digest).or_insert(id);
        id
    }

    fn node_digest(&self, inner: &Inner, node: &TheoryNode) -> [u8; 32] {
        let mut children: Vec<[u8; 32]> = if node.depth == 0 {
            node.members.iter().map(|&d| inner.diagram_digests[d as usize]).collect()
        } else {
            node.members.iter().map(|&t| inner.node_digests[t as usize]).collect()
        };
        children.sort_unstable();
        let mut h = Sha256::new();
        h.update(b"theory\0");
        h.update(self.tau.tau_signature().as_bytes());
        h.update([0, node.depth, node.sets, node.consts]);
        h.update(inner.diagram_digests[node.const_diagram.0 as usize]);
        h.update((children.len() as u64).to_le_bytes());
        for c in &children {
            h.update(c);
        }
        h.finalize().into()
    }

    pub fn node(&self, t: TheoryId) -> TheoryNode {
        self.inner.read().unwrap().nodes[t.index()].clone()
    }

    pub fn depth(&self, t: TheoryId) -> usize {
        self.inner.read().unwrap().nodes[t.index()].depth as usize
    }

    pub fn sets(&self, t: TheoryId) -> usize {
        self.inner.read().unwrap().nodes[t.index()].sets as usize
    }

    pub fn consts(&self, t: TheoryId) -> usize {
        self.inner.read().unwrap().nodes[t.index()].consts as usize
    }

    /// Member theories of a theory of positive depth.
    pub fn members(&self, t: TheoryId) -> Vec<TheoryId> {
        let inner = self.inner.read().unwrap();
        let node = &inner.nodes[t.index()];
        assert!(node.depth > 0, "depth-0 theories have diagrams, not member theories");
        node.members.iter().map(|&x| TheoryId(x)).collect()
    }

    /// Realized tuple diagrams of a depth-0 theory.
    pub fn realized(&self, t: TheoryId) -> Vec<Diagram> {
        let inner = self.inner.read().unwrap();
        let node = &inner.nodes[t.index()];
        assert_eq!(node.depth, 0, "only depth-0 theories carry realized diagrams");
        node.members.iter().map(|&d| inner.diagrams[d as usize].clone()).collect()
    }

    pub fn const_diagram(&self, t: TheoryId) -> Diagram {
        let inner = self.inner.read().unwrap();
        inner.diagrams[inner.nodes[t.index()].const_diagram.0 as usize].clone()
    }

    pub fn digest(&self, t: TheoryId) -> String {
        hex::encode(self.inner.read().unwrap().node_digests[t.index()])
    }

    pub fn diagram_digest(&self, d: DiagramId) -> String {
        hex::encode(self.inner.read().unwrap().diagram_digests[d.0 as usize])
    }

    pub fn find(&self, digest: &str) -> Result<TheoryId> {
        let bytes: [u8; 32] = hex::decode(digest)
            .ok()
            .and_then(|b| b.try_into().ok())
            .ok_or_else(|| Error::UnknownDigest(digest.to_string()))?;
        self.inner
            .read()
            .unwrap()
            .by_digest
            .get(&bytes)
            .copied()
            .ok_or_else(|| Error::UnknownDigest(digest.to_string()))
    }

    pub fn theory_count(&self) -> usize {
        self.inner.read().unwrap().nodes.len()
    }

    pub fn diagram_count(&self) -> usize {
        self.inner.read().unwrap().diagrams.len()
    }

    pub fn header(&self, t: TheoryId) -> String {
        let node = self.node(t);
        format!(
            "theory depth={} tau={} m={} k={} digest={}",
            node.depth,
            self.tau.tau_signature(),
            node.sets,
            node.consts,
            self.digest(t)
        )
    }

    /// Full dump: header, constant diagram, nested member braces (members
    /// named by digest prefix, sorted) and a legend of the realized diagrams.
    pub fn dump(&self, t: TheoryId) -> String {
        let vocab = self.tau.clone();
        let mut out = self.header(t);
        out.push('\n');
        writeln!(out, "const {}", self.const_diagram(t).render(&vocab)).unwrap();
        let mut legend = BTreeSet::new();
        let body = self.dump_body(t, &mut legend);
        out.push_str(&body);
        out.push('\n');
        for (key, text) in legend {
            writeln!(out, "{key} {text}").unwrap();
        }
        out
    }

    fn dump_body(&self, t: TheoryId, legend: &mut BTreeSet<(String, String)>) -> String {
        let node = self.node(t);
        let mut parts: Vec<String> = if node.depth == 0 {
            node.members
                .iter()
                .map(|&d| {
                    let key = format!("d:{}", &self.diagram_digest(DiagramId(d))[..12]);
                    legend.insert((key.clone(), self.diagram(DiagramId(d)).render(&self.tau)));
                    key
                })
                .collect()
        } else {
            node.members
                .iter()
                .map(|&c| self.dump_body(TheoryId(c), legend))
                .collect()
        };
        parts.sort();
        format!("{{{}}}", parts.join(" "))
    }
}

/// Guards for [`compute_theory`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TheoryBudget {
    pub max_depth: usize,
    /// Largest universe accepted at depth ≥ 2.
    pub deep_size_max: usize,
    /// Bound on `size · depth`, the log of the number of leaf expansions.
    pub leaf_bits: usize,
}

impl Default for TheoryBudget {
    fn default() -> Self {
        TheoryBudget {
            max_depth: 3,
            deep_size_max: 8,
            leaf_bits: 24,
        }
    }
}

impl TheoryBudget {
    pub fn check(&self, size: usize, depth: usize) -> Result<()> {
        if depth > self.max_depth {
            return Err(Error::budget("theory-depth", depth, self.max_depth));
        }
        if depth >= 2 && size > self.deep_size_max {
            return Err(Error::budget(
                "theory-size",
                format!("{size} elements at depth {depth}"),
                self.deep_size_max,
            ));
        }
        if size * depth > self.leaf_bits {
            return Err(Error::budget(
                "theory-leaves",
                format!("2^{}", size * depth),
                format!("2^{}", self.leaf_bits),
            ));
        }
        Ok(())
    }
}

pub fn compute_theory(store: &TheoryStore, m: &Structure, depth: usize) -> Result<TheoryId> {
    compute_theory_with(store, m, depth, &TheoryBudget::default())
}

pub fn compute_theory_with(
    store: &TheoryStore,
    m: &Structure,
    depth: usize,
    budget: &TheoryBudget,
) -> Result<TheoryId> {
    if !m.vocab().same_tau(store.tau()) {
        return Err(Error::Signature(format!(
            "structure over {} given to a store over {}",
            m.vocab().tau_signature(),
            store.tau().tau_signature()
        )));
    }
    budget.check(m.size(), depth)?;
    let comp = Computation::new(store, m, depth)?;
    let mut masks: Vec<u64> = m
        .sets()
        .iter()
        .map(|s| s.iter().fold(0u64, |acc, &e| acc | 1 << e))
        .collect();
    let mut cache = HashMap::default();
    Ok(comp.rec(depth, &mut masks, &mut cache))
}

type LeafKey = (u64, Vec<(u32, u64)>);

/// Per-structure precomputation: every tuple's colorless diagram and the
/// elements representing its classes. Leaves then only recolor.
struct Computation<'a> {
    store: &'a TheoryStore,
    size: usize,
    consts: usize,
    total_sets: usize,
    bases: Vec<Diagram>,
    entries: Vec<(u32, Vec<u8>)>,
    const_base: Diagram,
    const_reps: Vec<u8>,
}

impl<'a> Computation<'a> {
    fn new(store: &'a TheoryStore, m: &Structure, depth: usize) -> Result<Self> {
        let r = store.tuple_len();
        let k = m.constants().len();
        if r + k > MAX_TERMS {
            return Err(Error::budget("diagram-terms", r + k, MAX_TERMS));
        }
        let total_sets = m.vocab().sets() + depth;
        if (r + k) * total_sets > 64 || total_sets > 32 || m.size() > 64 {
            return Err(Error::budget(
                "color-packing",
                format!("{} bits", (r + k) * total_sets),
                "64 bits",
            ));
        }
        let arities = store.arities();
        let mut bases = Vec::new();
        let mut base_index: HashMap<Diagram, u32> = HashMap::default();
        let mut entries = Vec::new();
        let mut keys = Vec::with_capacity(r + k);
        for t in all_tuples(m.size(), r) {
            keys.clear();
            keys.extend_from_slice(&t);
            keys.extend_from_slice(m.constants());
            let d = Diagram::build(r, &keys, arities, |p, tup| m.holds(p, tup), |_| 0);
            let (_, reps) = crate::diagram::rgs(&keys);
            let reps: Vec<u8> = reps.iter().map(|&i| keys[i] as u8).collect();
            let next = bases.len() as u32;
            let idx = *base_index.entry(d.clone()).or_insert_with(|| {
                bases.push(d);
                next
            });
            entries.push((idx, reps));
        }
        let const_base = Diagram::build(0, m.constants(), arities, |p, tup| m.holds(p, tup), |_| 0);
        let (_, reps) = crate::diagram::rgs(m.constants());
        let const_reps = reps.iter().map(|&i| m.constants()[i] as u8).collect();
        Ok(Computation {
            store,
            size: m.size(),
            consts: k,
            total_sets,
            bases,
            entries,
            const_base,
            const_reps,
        })
    }

    fn colors(&self, masks: &[u64]) -> Vec<u32> {
        (0..self.size)
            .map(|e| {
                masks
                    .iter()
                    .enumerate()
                    .fold(0u32, |acc, (j, &u)| acc | ((u >> e & 1) as u32) << j)
            })
            .collect()
    }

    fn pack(col: &[u32], reps: &[u8], width: usize) -> u64 {
        reps.iter()
            .enumerate()
            .fold(0u64, |acc, (c, &e)| acc | (col[e as usize] as u64) << (c * width))
    }

    fn unpack(packed: u64, classes: usize, width: usize) -> Vec<u32> {
        let mask = if width == 0 { 0 } else { (1u64 << width) - 1 };
        (0..classes)
            .map(|c| if width == 0 { 0 } else { (packed >> (c * width) & mask) as u32 })
            .collect()
    }

    fn const_diagram(&self, masks: &[u64]) -> DiagramId {
        let col = self.colors(masks);
        let width = masks.len();
        let packed = Self::pack(&col, &self.const_reps, width);
        let colors = Self::unpack(packed, self.const_reps.len(), width);
        self.store.intern_diagram(self.const_base.with_colors(colors))
    }

    fn rec(&self, remaining: usize, masks: &mut Vec<u64>, cache: &mut HashMap<LeafKey, TheoryId>) -> TheoryId {
        if remaining == 0 {
            return self.leaf(masks, cache);
        }
        let mut members = Vec::new();
        for u in 0..(1u64 << self.size) {
            masks.push(u);
            members.push(self.rec(remaining - 1, masks, cache).0);
            masks.pop();
        }
        let const_diagram = self.const_diagram(masks);
        self.store.intern_node(TheoryNode {
            depth: remaining as u8,
            sets: masks.len() as u8,
            consts: self.consts as u8,
            const_diagram,
            members,
        })
    }

    fn leaf(&self, masks: &[u64], cache: &mut HashMap<LeafKey, TheoryId>) -> TheoryId {
        debug_assert!(masks.len() <= self.total_sets);
        let width = masks.len();
        let col = self.colors(masks);
        let mut keys: Vec<(u32, u64)> = self
            .entries
            .iter()
            .map(|(b, reps)| (*b, Self::pack(&col, reps, width)))
            .collect();
        keys.sort_unstable();
        keys.dedup();
        let ckey = Self::pack(&col, &self.const_reps, width);
        let key = (ckey, keys);
        if let Some(&t) = cache.get(&key) {
            return t;
        }
        let members = key
            .1
            .iter()
            .map(|&(b, packed)| {
                let base = &self.bases[b as usize];
                let colors = Self::unpack(packed, base.class_count(), width);
                self.store.intern_diagram(base.with_colors(colors)).0
            })
            .collect();
        let const_diagram = self.const_diagram(masks);
        let t = self.store.intern_node(TheoryNode {
            depth: 0,
            sets: width as u8,
            consts: self.consts as u8,
            const_diagram,
            members,
        });
        cache.insert(key, t);
        t
    }
}

/// The space `TH^n(τ_{m,k})` of formally possible theories.
#[derive(Debug)]
pub struct FormalTheorySpace {
    pub depth: usize,
    pub sets: usize,
    pub consts: usize,
    members: FormalMembers,
}

#[derive(Debug)]
enum FormalMembers {
    /// Sorted ids of every formal depth-0 theory.
    Explicit(Vec<TheoryId>),
    /// All subsets of the space one level down.
    Powerset(Box<FormalTheorySpace>),
}

impl FormalTheorySpace {
    pub fn cardinality(&self) -> u128 {
        match &self.members {
            FormalMembers::Explicit(v) => v.len() as u128,
            FormalMembers::Powerset(base) => 1u128
                .checked_shl(base.cardinality() as u32)
                .unwrap_or(u128::MAX),
        }
    }

    /// Depth-0 members; `None` for spaces built by the powerset rule.
    pub fn explicit_members(&self) -> Option<&[TheoryId]> {
        match &self.members {
            FormalMembers::Explicit(v) => Some(v),
            FormalMembers::Powerset(_) => None,
        }
    }

    pub fn base(&self) -> Option<&FormalTheorySpace> {
        match &self.members {
            FormalMembers::Explicit(_) => None,
            FormalMembers::Powerset(b) => Some(b),
        }
    }

    pub fn contains(&self, store: &TheoryStore, t: TheoryId) -> bool {
        let node = store.node(t);
        if node.depth as usize != self.depth || node.sets as usize != self.sets || node.consts as usize != self.consts {
            return false;
        }
        match &self.members {
            FormalMembers::Explicit(v) => v.binary_search(&t).is_ok(),
            FormalMembers::Powerset(base) => store.members(t).into_iter().all(|c| base.contains(store, c)),
        }
    }
}

pub const DEFAULT_FORMAL_BUDGET: u128 = 1 << 20;

/// Enumerate `TH^n(τ_{m,k})`. Depth 0 is the set of all sets of tuple
/// diagrams closed under variable substitution (every tuple obtained by
/// repeating, reordering or replacing entries by constants is realized too)
/// and sharing one constant diagram; nonempty when `k ≥ 1`. Depth `n+1` is
/// the powerset of depth `n` over `m+1` sets.
pub fn enumerate_formal(
    store: &TheoryStore,
    depth: usize,
    sets: usize,
    consts: usize,
    budget: u128,
) -> Result<FormalTheorySpace> {
    if depth == 0 {
        return enumerate_formal_base(store, sets, consts, budget);
    }
    let base = enumerate_formal(store, depth - 1, sets + 1, consts, budget)?;
    let card = base.cardinality();
    if card >= 127 || (1u128 << card) > budget {
        return Err(Error::budget("formal-space", format!("2^{card}"), budget));
    }
    Ok(FormalTheorySpace {
        depth,
        sets,
        consts,
        members: FormalMembers::Powerset(Box::new(base)),
    })
}

fn substitution_picks(r: usize, k: usize) -> Vec<Vec<Term>> {
    let terms: Vec<Term> = (0..r as u8)
        .map(Term::Var)
        .chain((0..k as u8).map(Term::Const))
        .collect();
    let mut out = Vec::new();
    let mut idx = vec![0usize; r];
    loop {
        out.push(idx.iter().map(|&i| terms[i]).collect());
        let mut i = r;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            idx[i] += 1;
            if idx[i] < terms.len() {
                break;
            }
            idx[i] = 0;
        }
    }
}

fn enumerate_formal_base(store: &TheoryStore, sets: usize, consts: usize, budget: u128) -> Result<FormalTheorySpace> {
    let r = store.tuple_len();
    let arities = store.arities().to_vec();
    if r + consts > MAX_TERMS {
        return Err(Error::budget("diagram-terms", r + consts, MAX_TERMS));
    }
    let total = Diagram::count(r, consts, &arities, sets, false);
    // every diagram is a formal theory by itself (its substitution closure),
    // so the diagram count bounds the space from below
    if total > budget.min(1 << 16) {
        return Err(Error::budget("formal-space", format!("more than {total}"), budget));
    }
    let all = Diagram::enumerate(r, consts, &arities, sets, false);
    let mut groups: HashMap<Diagram, Vec<Diagram>> = HashMap::default();
    for d in all {
        groups.entry(d.const_part(&arities)).or_default().push(d);
    }
    let mut groups: Vec<(Diagram, Vec<Diagram>)> = groups.into_iter().collect();
    groups.sort();
    let picks = substitution_picks(r, consts);
    let mut out = Vec::new();
    let mut count: u128 = 0;
    for (cdiag, cands) in groups {
        let index: HashMap<&Diagram, usize> = cands.iter().enumerate().map(|(i, d)| (d, i)).collect();
        let images: Vec<BTreeSet<usize>> = cands
            .iter()
            .map(|d| picks.iter().map(|p| index[&d.project(p, &arities)]).collect())
            .collect();
        // mutually reachable diagrams (variable permutations) must be taken together
        let mut class_of = vec![usize::MAX; cands.len()];
        let mut classes: Vec<Vec<usize>> = Vec::new();
        for i in 0..cands.len() {
            if class_of[i] != usize::MAX {
                continue;
            }
            let cls: Vec<usize> = images[i].iter().copied().filter(|&j| images[j].contains(&i)).collect();
            for &j in &cls {
                class_of[j] = classes.len();
            }
            classes.push(cls);
        }
        // classes of diagrams whose variables are pairwise distinct and differ
        // from every constant form an antichain, so each subset is a downset
        let antichain = classes
            .iter()
            .filter(|cls| {
                let d = &cands[cls[0]];
                let vc: BTreeSet<usize> = (0..r).map(|i| d.var_class(i)).collect();
                vc.len() == r && (0..consts).all(|c| !vc.contains(&d.const_class(c)))
            })
            .count();
        if antichain >= 127 || count + (1u128 << antichain) > budget {
            return Err(Error::budget(
                "formal-space",
                format!("at least 2^{antichain}"),
                budget,
            ));
        }
        let mut order: Vec<usize> = (0..classes.len()).collect();
        order.sort_by_key(|&c| (images[classes[c][0]].len(), c));
        let needs: Vec<Vec<usize>> = (0..classes.len())
            .map(|c| {
                let mut v: Vec<usize> = images[classes[c][0]]
                    .iter()
                    .map(|&j| class_of[j])
                    .filter(|&x| x != c)
                    .collect();
                v.sort_unstable();
                v.dedup();
                v
            })
            .collect();
        let cid = store.intern_diagram(cdiag);
        let mut chosen = vec![false; classes.len()];
        let mut err = None;
        downsets(&order, &needs, 0, &mut chosen, &mut |chosen| {
            if err.is_some() {
                return false;
            }
            if consts > 0 && !chosen.iter().any(|&b| b) {
                return true;
            }
            count += 1;
            if count > budget {
                err = Some(Error::budget("formal-space", format!("more than {budget}"), budget));
                return false;
            }
            let members = (0..classes.len())
                .filter(|&c| chosen[c])
                .flat_map(|c| classes[c].iter().map(|&i| store.intern_diagram(cands[i].clone()).0))
                .collect();
            out.push(store.intern_node(TheoryNode {
                depth: 0,
                sets: sets as u8,
                consts: consts as u8,
                const_diagram: cid,
                members,
            }));
            true
        });
        if let Some(e) = err {
            return Err(e);
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(FormalTheorySpace {
        depth: 0,
        sets,
        consts,
        members: FormalMembers::Explicit(out),
    })
}

/// Backtracking over a linear extension; `visit` returns false to stop.
fn downsets(
    order: &[usize],
    needs: &[Vec<usize>],
    pos: usize,
    chosen: &mut Vec<bool>,
    visit: &mut dyn FnMut(&[bool]) -> bool,
) -> bool {
    if pos == order.len() {
        return visit(chosen);
    }
    let c = order[pos];
    if !downsets(order, needs, pos + 1, chosen, visit) {
        return false;
    }
    if needs[c].iter().all(|&x| chosen[x]) {
        chosen[c] = true;
        let go_on = downsets(order, needs, pos + 1, chosen, visit);
        chosen[c] = false;
        return go_on;
    }
    true
}

/// Direct check of the local consistency rules, independent of enumeration.
pub fn is_locally_consistent(store: &TheoryStore, t: TheoryId) -> bool {
    let node = store.node(t);
    if node.depth > 0 {
        let cd = store.const_diagram(t);
        return store.members(t).into_iter().all(|c| {
            store.const_diagram(c).restrict_sets(node.sets as usize) == cd && is_locally_consistent(store, c)
        });
    }
    let arities = store.arities();
    let realized: BTreeSet<Diagram> = store.realized(t).into_iter().collect();
    let cd = store.const_diagram(t);
    if node.consts > 0 && realized.is_empty() {
        return false;
    }
    let picks = substitution_picks(store.tuple_len(), node.consts as usize);
    realized.iter().all(|d| {
        d.const_part(arities) == cd && picks.iter().all(|p| realized.contains(&d.project(p, arities)))
    })
}

/// A theory realized by small models, with all sizes realizing it and a
/// smallest witness.
#[derive(Clone, Debug)]
pub struct SmallModelTheory {
    pub theory: TheoryId,
    pub sizes: BTreeSet<usize>,
    pub witness: Structure,
}

/// `{ Th^n(M, c̄) : ‖M‖ ≤ k* }` over `τ` with `k` constants, sorted by digest.
/// The empty model is included only when `include_empty` and `k = 0`.
pub fn small_model_theories(
    store: &TheoryStore,
    depth: usize,
    k_star: usize,
    consts: usize,
    include_empty: bool,
    enumeration_bits: usize,
) -> Result<Vec<SmallModelTheory>> {
    let vocab = store.tau().with_consts(consts);
    let mut found: HashMap<TheoryId, SmallModelTheory> = HashMap::default();
    let start = if include_empty && consts == 0 { 0 } else { 1 };
    for size in start..=k_star {
        for m in enumerate_structures(&vocab, size, enumeration_bits)? {
            let t = compute_theory(store, &m, depth)?;
            found
                .entry(t)
                .or_insert_with(|| SmallModelTheory {
                    theory: t,
                    sizes: BTreeSet::new(),
                    witness: m,
                })
                .sizes
                .insert(size);
        }
    }
    let mut out: Vec<SmallModelTheory> = found.into_values().collect();
    out.sort_by_cached_key(|s| store.digest(s.theory));
    Ok(out)
}
