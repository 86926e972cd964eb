//! Finite relational structures over the universe `{0..size-1}` with named
//! constants and distinguished unary sets `P_0..P_{m-1}`.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

/// Default guard for [`enumerate_structures`]: total number of free bits.
pub const DEFAULT_ENUMERATION_BITS: usize = 24;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Predicate {
    pub name: String,
    pub arity: usize,
}

/// A relational vocabulary `τ` together with the number of constants `k`
/// and the number of distinguished set predicates `m`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Vocabulary {
    predicates: Vec<Predicate>,
    consts: usize,
    sets: usize,
}

impl Vocabulary {
    pub fn new(predicates: Vec<(String, usize)>, consts: usize, sets: usize) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut preds = Vec::with_capacity(predicates.len());
        for (name, arity) in predicates {
            if arity == 0 {
                return Err(Error::Invalid(format!("predicate {name} has arity 0")));
            }
            if arity > 6 {
                return Err(Error::Invalid(format!(
                    "predicate {name} has arity {arity}; at most 6 is supported"
                )));
            }
            if !is_identifier(&name) || is_reserved(&name) {
                return Err(Error::Invalid(format!("bad predicate name `{name}`")));
            }
            if !seen.insert(name.clone()) {
                return Err(Error::Invalid(format!("duplicate predicate {name}")));
            }
            preds.push(Predicate { name, arity });
        }
        Ok(Vocabulary {
            predicates: preds,
            consts,
            sets,
        })
    }

    /// Undirected/directed graphs: a single binary predicate `E`.
    pub fn graphs() -> Self {
        Vocabulary::new(vec![("E".into(), 2)], 0, 0).unwrap()
    }

    pub fn predicates(&self) -> &[Predicate] {
        &self.predicates
    }

    pub fn consts(&self) -> usize {
        self.consts
    }

    pub fn sets(&self) -> usize {
        self.sets
    }

    pub fn arities(&self) -> Vec<usize> {
        self.predicates.iter().map(|p| p.arity).collect()
    }

    /// `max(1, max arity)`.
    pub fn arity(&self) -> usize {
        self.predicates.iter().map(|p| p.arity).max().unwrap_or(0).max(1)
    }

    pub fn predicate_index(&self, name: &str) -> Option<usize> {
        self.predicates.iter().position(|p| p.name == name)
    }

    pub fn with_consts(&self, consts: usize) -> Self {
        Vocabulary {
            consts,
            ..self.clone()
        }
    }

    pub fn with_sets(&self, sets: usize) -> Self {
        Vocabulary {
            sets,
            ..self.clone()
        }
    }

    /// Same predicates (names and arities) regardless of constants and sets.
    pub fn same_tau(&self, other: &Vocabulary) -> bool {
        self.predicates == other.predicates
    }

    /// Compact rendering of the predicate part, e.g. `E/2,S/1`.
    pub fn tau_signature(&self) -> String {
        if self.predicates.is_empty() {
            return "-".into();
        }
        self.predicates
            .iter()
            .map(|p| format!("{}/{}", p.name, p.arity))
            .collect::<Vec<_>>()
            .join(",")
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Names that collide with set predicates or constants in formulas.
pub(crate) fn is_reserved(s: &str) -> bool {
    let digits_after = |prefix: char| {
        s.len() > 1 && s.starts_with(prefix) && s[1..].chars().all(|c| c.is_ascii_digit())
    };
    digits_after('P') || digits_after('c')
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Structure {
    vocab: Vocabulary,
    size: usize,
    relations: Vec<BTreeSet<Vec<usize>>>,
    constants: Vec<usize>,
    sets: Vec<BTreeSet<usize>>,
}

impl Structure {
    pub fn new(
        vocab: Vocabulary,
        size: usize,
        relations: Vec<BTreeSet<Vec<usize>>>,
        constants: Vec<usize>,
        sets: Vec<BTreeSet<usize>>,
    ) -> Result<Self> {
        if relations.len() != vocab.predicates.len() {
            return Err(Error::Invalid(format!(
                "expected {} relations, got {}",
                vocab.predicates.len(),
                relations.len()
            )));
        }
        if constants.len() != vocab.consts {
            return Err(Error::Invalid(format!(
                "expected {} constants, got {}",
                vocab.consts,
                constants.len()
            )));
        }
        if sets.len() != vocab.sets {
            return Err(Error::Invalid(format!(
                "expected {} sets, got {}",
                vocab.sets,
                sets.len()
            )));
        }
        if size == 0 && vocab.consts > 0 {
            return Err(Error::Invalid(
                "the empty structure cannot interpret constants".into(),
            ));
        }
        for (p, rel) in vocab.predicates.iter().zip(&relations) {
            for t in rel {
                if t.len() != p.arity {
                    return Err(Error::Invalid(format!(
                        "tuple {t:?} has length {} but {} has arity {}",
                        t.len(),
                        p.name,
                        p.arity
                    )));
                }
                if let Some(e) = t.iter().find(|&&e| e >= size) {
                    return Err(Error::Invalid(format!(
                        "element {e} of {}{t:?} out of range (size {size})",
                        p.name
                    )));
                }
            }
        }
        if let Some(c) = constants.iter().find(|&&c| c >= size) {
            return Err(Error::Invalid(format!("constant {c} out of range")));
        }
        for s in &sets {
            if let Some(e) = s.iter().find(|&&e| e >= size) {
                return Err(Error::Invalid(format!("set member {e} out of range")));
            }
        }
        Ok(Structure {
            vocab,
            size,
            relations,
            constants,
            sets,
        })
    }

    /// A structure with no relation tuples, constants or set members.
    pub fn empty_of(vocab: &Vocabulary, size: usize) -> Self {
        Structure {
            vocab: vocab.with_consts(0).with_sets(0),
            size,
            relations: vec![BTreeSet::new(); vocab.predicates.len()],
            constants: vec![],
            sets: vec![],
        }
    }

    /// Undirected graph from an edge list; both ordered pairs are stored.
    pub fn graph(size: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut rel = BTreeSet::new();
        for &(a, b) in edges {
            rel.insert(vec![a, b]);
            rel.insert(vec![b, a]);
        }
        Structure::new(Vocabulary::graphs(), size, vec![rel], vec![], vec![])
    }

    /// Path with `n ≥ 1` vertices `0 - 1 - ... - n-1`.
    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Structure::graph(n, &edges).unwrap()
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn relations(&self) -> &[BTreeSet<Vec<usize>>] {
        &self.relations
    }

    pub fn relation(&self, pred: usize) -> &BTreeSet<Vec<usize>> {
        &self.relations[pred]
    }

    pub fn constants(&self) -> &[usize] {
        &self.constants
    }

    pub fn sets(&self) -> &[BTreeSet<usize>] {
        &self.sets
    }

    pub fn holds(&self, pred: usize, tuple: &[usize]) -> bool {
        self.relations[pred].contains(tuple)
    }

    pub fn in_set(&self, set: usize, e: usize) -> bool {
        self.sets[set].contains(&e)
    }

    /// Replace the constants (the vocabulary's `k` follows).
    pub fn with_constants(&self, constants: Vec<usize>) -> Result<Self> {
        Structure::new(
            self.vocab.with_consts(constants.len()),
            self.size,
            self.relations.clone(),
            constants,
            self.sets.clone(),
        )
    }

    /// Replace the distinguished sets (the vocabulary's `m` follows).
    pub fn with_sets(&self, sets: Vec<BTreeSet<usize>>) -> Result<Self> {
        Structure::new(
            self.vocab.with_sets(sets.len()),
            self.size,
            self.relations.clone(),
            self.constants.clone(),
            sets,
        )
    }

    pub fn tuple_count(&self) -> usize {
        self.relations.iter().map(BTreeSet::len).sum()
    }

    /// Number of undirected edges of a symmetric binary relation.
    pub fn undirected_edge_count(&self, pred: usize) -> usize {
        self.relations[pred]
            .iter()
            .filter(|t| t.len() == 2 && t[0] <= t[1])
            .count()
    }

    pub fn degree_sequence(&self, pred: usize) -> Vec<usize> {
        let mut deg = vec![0; self.size];
        for t in &self.relations[pred] {
            if t.len() == 2 && t[0] != t[1] && t[0] < t[1] {
                deg[t[0]] += 1;
                deg[t[1]] += 1;
            }
        }
        deg.sort_unstable();
        deg
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_structure(self))
    }
}

pub fn serialize_structure(m: &Structure) -> String {
    let mut out = String::new();
    out.push_str("vocab");
    for p in &m.vocab.predicates {
        out.push_str(&format!(" {}/{}", p.name, p.arity));
    }
    out.push('\n');
    out.push_str(&format!("consts {}\n", m.vocab.consts));
    out.push_str(&format!("sets {}\n", m.vocab.sets));
    out.push_str(&format!("size {}\n", m.size));
    for (i, c) in m.constants.iter().enumerate() {
        out.push_str(&format!("const {i} = {c}\n"));
    }
    for (p, rel) in m.vocab.predicates.iter().zip(&m.relations) {
        if rel.is_empty() {
            continue;
        }
        out.push_str(&format!("rel {}:", p.name));
        for t in rel {
            let inner: Vec<String> = t.iter().map(|e| e.to_string()).collect();
            out.push_str(&format!(" ({})", inner.join(",")));
        }
        out.push('\n');
    }
    for (j, s) in m.sets.iter().enumerate() {
        if s.is_empty() {
            continue;
        }
        out.push_str(&format!("set {j}:"));
        for e in s {
            out.push_str(&format!(" {e}"));
        }
        out.push('\n');
    }
    out
}

fn parse_usize(tok: &str, line: usize) -> Result<usize> {
    tok.trim()
        .parse::<usize>()
        .map_err(|_| Error::parse(line, format!("expected a number, found `{tok}`")))
}

pub fn parse_structure(text: &str) -> Result<Structure> {
    let mut vocab: Option<Vec<(String, usize)>> = None;
    let mut consts: Option<usize> = None;
    let mut sets: Option<usize> = None;
    let mut size: Option<usize> = None;
    let mut const_vals: Vec<Option<usize>> = Vec::new();
    let mut rels: Vec<BTreeSet<Vec<usize>>> = Vec::new();
    let mut set_vals: Vec<BTreeSet<usize>> = Vec::new();
    let mut names: Vec<(String, usize)> = Vec::new();

    let header_done = |line: usize,
                       vocab: &Option<Vec<(String, usize)>>,
                       consts: &Option<usize>,
                       sets: &Option<usize>,
                       size: &Option<usize>|
     -> Result<()> {
        if vocab.is_none() || consts.is_none() || sets.is_none() || size.is_none() {
            return Err(Error::parse(
                line,
                "header lines `vocab`, `consts`, `sets`, `size` must come first",
            ));
        }
        Ok(())
    };

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (keyword, rest) = match content.split_once(char::is_whitespace) {
            Some((k, r)) => (k, r.trim()),
            None => (content, ""),
        };
        match keyword {
            "vocab" => {
                if vocab.is_some() {
                    return Err(Error::parse(line, "duplicate `vocab` line"));
                }
                let mut preds = Vec::new();
                for tok in rest.split_whitespace() {
                    let (name, ar) = tok
                        .split_once('/')
                        .ok_or_else(|| Error::parse(line, format!("expected Name/arity, got `{tok}`")))?;
                    preds.push((name.to_string(), parse_usize(ar, line)?));
                }
                names = preds.clone();
                rels = vec![BTreeSet::new(); preds.len()];
                vocab = Some(preds);
            }
            "consts" => {
                if vocab.is_none() || consts.is_some() {
                    return Err(Error::parse(line, "`consts` must follow `vocab` once"));
                }
                let k = parse_usize(rest, line)?;
                const_vals = vec![None; k];
                consts = Some(k);
            }
            "sets" => {
                if consts.is_none() || sets.is_some() {
                    return Err(Error::parse(line, "`sets` must follow `consts` once"));
                }
                let m = parse_usize(rest, line)?;
                set_vals = vec![BTreeSet::new(); m];
                sets = Some(m);
            }
            "size" => {
                if sets.is_none() || size.is_some() {
                    return Err(Error::parse(line, "`size` must follow `sets` once"));
                }
                size = Some(parse_usize(rest, line)?);
            }
            "const" => {
                header_done(line, &vocab, &consts, &sets, &size)?;
                let (i, e) = rest
                    .split_once('=')
                    .ok_or_else(|| Error::parse(line, "expected `const <i> = <element>`"))?;
                let i = parse_usize(i, line)?;
                let e = parse_usize(e, line)?;
                if i >= const_vals.len() {
                    return Err(Error::parse(line, format!("constant index {i} out of range")));
                }
                if e >= size.unwrap() {
                    return Err(Error::parse(line, format!("element {e} out of range")));
                }
                const_vals[i] = Some(e);
            }
            "rel" => {
                header_done(line, &vocab, &consts, &sets, &size)?;
                let (name, tuples) = rest
                    .split_once(':')
                    .ok_or_else(|| Error::parse(line, "expected `rel <Name>: (...) ...`"))?;
                let name = name.trim();
                let pi = names
                    .iter()
                    .position(|(n, _)| n == name)
                    .ok_or_else(|| Error::parse(line, format!("unknown predicate `{name}`")))?;
                let arity = names[pi].1;
                let mut rest = tuples.trim();
                while !rest.is_empty() {
                    if !rest.starts_with('(') {
                        return Err(Error::parse(line, format!("expected `(`, found `{rest}`")));
                    }
                    let close = rest
                        .find(')')
                        .ok_or_else(|| Error::parse(line, "unterminated tuple"))?;
                    let inner = &rest[1..close];
                    let tuple = inner
                        .split(',')
                        .map(|t| parse_usize(t, line))
                        .collect::<Result<Vec<_>>>()?;
                    if tuple.len() != arity {
                        return Err(Error::parse(
                            line,
                            format!("arity mismatch: {name} has arity {arity}, tuple has {}", tuple.len()),
                        ));
                    }
                    if let Some(e) = tuple.iter().find(|&&e| e >= size.unwrap()) {
                        return Err(Error::parse(line, format!("element {e} out of range")));
                    }
                    rels[pi].insert(tuple);
                    rest = rest[close + 1..].trim_start();
                }
            }
            "set" => {
                header_done(line, &vocab, &consts, &sets, &size)?;
                let (j, members) = rest
                    .split_once(':')
                    .ok_or_else(|| Error::parse(line, "expected `set <j>: <e> ...`"))?;
                let j = parse_usize(j, line)?;
                if j >= set_vals.len() {
                    return Err(Error::parse(line, format!("set index {j} out of range")));
                }
                for tok in members.split_whitespace() {
                    let e = parse_usize(tok, line)?;
                    if e >= size.unwrap() {
                        return Err(Error::parse(line, format!("element {e} out of range")));
                    }
                    set_vals[j].insert(e);
                }
            }
            other => return Err(Error::parse(line, format!("unknown keyword `{other}`"))),
        }
    }
    let last = text.lines().count().max(1);
    header_done(last, &vocab, &consts, &sets, &size)?;
    let constants = const_vals
        .iter()
        .enumerate()
        .map(|(i, c)| c.ok_or_else(|| Error::parse(last, format!("constant {i} not assigned"))))
        .collect::<Result<Vec<_>>>()?;
    let vocab = Vocabulary::new(vocab.unwrap(), consts.unwrap(), sets.unwrap())
        .map_err(|e| Error::parse(1, e.to_string()))?;
    Structure::new(vocab, size.unwrap(), rels, constants, set_vals)
        .map_err(|e| Error::parse(last, e.to_string()))
}

/// Incidence graph of the complete graph `K_n`: nodes `b_1..b_n` are
/// elements `0..n-1`, the edge nodes `c_{i,j}` follow in lexicographic order.
pub fn incidence_graph(n: usize) -> Result<Structure> {
    if n < 2 {
        return Err(Error::Invalid(format!("incidence graph needs n >= 2, got {n}")));
    }
    let mut edges = Vec::new();
    let mut next = n;
    for i in 0..n {
        for j in i + 1..n {
            edges.push((i, next));
            edges.push((j, next));
            next += 1;
        }
    }
    Structure::graph(next, &edges)
}

/// Relabel every element `e` as `perm[e]`.
pub fn apply_permutation(m: &Structure, perm: &[usize]) -> Result<Structure> {
    if perm.len() != m.size {
        return Err(Error::Invalid(format!(
            "permutation has length {}, structure has size {}",
            perm.len(),
            m.size
        )));
    }
    let mut seen = vec![false; m.size];
    for &p in perm {
        if p >= m.size || seen[p] {
            return Err(Error::Invalid("permutation is not a bijection".into()));
        }
        seen[p] = true;
    }
    let relations = m
        .relations
        .iter()
        .map(|rel| rel.iter().map(|t| t.iter().map(|&e| perm[e]).collect()).collect())
        .collect();
    let constants = m.constants.iter().map(|&c| perm[c]).collect();
    let sets = m
        .sets
        .iter()
        .map(|s| s.iter().map(|&e| perm[e]).collect())
        .collect();
    Structure::new(m.vocab.clone(), m.size, relations, constants, sets)
}

/// Number of labeled structures [`enumerate_structures`] yields, if it fits in `u128`.
pub fn structure_count(vocab: &Vocabulary, size: usize) -> Option<u128> {
    let bits = free_bits(vocab, size)?;
    let mut total: u128 = 1u128.checked_shl(u32::try_from(bits).ok()?)?;
    for _ in 0..vocab.consts {
        total = total.checked_mul(size as u128)?;
    }
    Some(total)
}

fn free_bits(vocab: &Vocabulary, size: usize) -> Option<usize> {
    let mut bits = size.checked_mul(vocab.sets)?;
    for p in &vocab.predicates {
        bits = bits.checked_add(size.checked_pow(p.arity as u32)?)?;
    }
    Some(bits)
}

/// Every labeled structure of the given size, in a fixed order.
pub fn enumerate_structures(
    vocab: &Vocabulary,
    size: usize,
    max_bits: usize,
) -> Result<StructureEnumerator> {
    let bits = free_bits(vocab, size).unwrap_or(usize::MAX);
    if bits > max_bits || bits >= 64 {
        return Err(Error::budget("structure-enumeration", format!("{bits} bits"), format!("{max_bits} bits")));
    }
    let mut tuples = Vec::with_capacity(vocab.predicates.len());
    for p in &vocab.predicates {
        tuples.push(all_tuples(size, p.arity));
    }
    let remaining = if size == 0 && vocab.consts > 0 { 0 } else { 1 };
    Ok(StructureEnumerator {
        vocab: vocab.clone(),
        size,
        tuples,
        bits,
        mask: 0,
        consts: vec![0; vocab.consts],
        done: remaining == 0,
    })
}

/// All tuples of the given arity over `{0..size-1}`, lexicographic.
pub fn all_tuples(size: usize, arity: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if arity == 0 {
        out.push(vec![]);
        return out;
    }
    if size == 0 {
        return out;
    }
    let mut cur = vec![0; arity];
    loop {
        out.push(cur.clone());
        let mut i = arity;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            cur[i] += 1;
            if cur[i] < size {
                break;
            }
            cur[i] = 0;
        }
    }
}

pub struct StructureEnumerator {
    vocab: Vocabulary,
    size: usize,
    tuples: Vec<Vec<Vec<usize>>>,
    bits: usize,
    mask: u64,
    consts: Vec<usize>,
    done: bool,
}

impl StructureEnumerator {
    fn build(&self) -> Structure {
        let mut bit = 0;
        let mut relations = Vec::with_capacity(self.tuples.len());
        for ts in &self.tuples {
            let mut rel = BTreeSet::new();
            for t in ts {
                if self.mask >> bit & 1 == 1 {
                    rel.insert(t.clone());
                }
                bit += 1;
            }
            relations.push(rel);
        }
        let mut sets = Vec::with_capacity(self.vocab.sets);
        for _ in 0..self.vocab.sets {
            let mut s = BTreeSet::new();
            for e in 0..self.size {
                if self.mask >> bit & 1 == 1 {
                    s.insert(e);
                }
                bit += 1;
            }
            sets.push(s);
        }
        Structure {
            vocab: self.vocab.clone(),
            size: self.size,
            relations,
            constants: self.consts.clone(),
            sets,
        }
    }

    fn advance(&mut self) {
        // constants are the fastest-varying component
        for c in self.consts.iter_mut() {
            *c += 1;
            if *c < self.size {
                return;
            }
            *c = 0;
        }
        self.mask += 1;
        if self.mask >> self.bits != 0 {
            self.done = true;
        }
    }
}

impl Iterator for StructureEnumerator {
    type Item = Structure;

    fn next(&mut self) -> Option<Structure> {
        if self.done {
            return None;
        }
        let s = self.build();
        self.advance();
        Some(s)
    }
}

/// A random structure; each possible tuple is present with probability `density`.
pub fn random_structure<R: Rng>(
    vocab: &Vocabulary,
    size: usize,
    density: f64,
    rng: &mut R,
) -> Structure {
    let relations = vocab
        .predicates
        .iter()
        .map(|p| {
            all_tuples(size, p.arity)
                .into_iter()
                .filter(|_| rng.gen_bool(density))
                .collect()
        })
        .collect();
    let constants = (0..vocab.consts).map(|_| rng.gen_range(0..size)).collect();
    let sets = (0..vocab.sets)
        .map(|_| (0..size).filter(|_| rng.gen_bool(0.5)).collect())
        .collect();
    Structure::new(vocab.clone(), size, relations, constants, sets).expect("generated structure is valid")
}

/// A random undirected loopless graph.
pub fn random_graph<R: Rng>(size: usize, density: f64, rng: &mut R) -> Structure {
    let mut edges = Vec::new();
    for a in 0..size {
        for b in a + 1..size {
            if rng.gen_bool(density) {
                edges.push((a, b));
            }
        }
    }
    Structure::graph(size, &edges).unwrap()
}

pub fn random_permutation<R: Rng>(size: usize, rng: &mut R) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut p: Vec<usize> = (0..size).collect();
    p.shuffle(rng);
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn k2() -> Structure {
        Structure::graph(2, &[(0, 1)]).unwrap()
    }

    #[test]
    fn parse_single_vertex() {
        let m = parse_structure("vocab E/2\nconsts 0\nsets 0\nsize 1\n").unwrap();
        assert_eq!(m.size(), 1);
        assert!(m.relation(0).is_empty());
    }

    #[test]
    fn parse_k2() {
        let text = "# K2\nvocab E/2\nconsts 0\nsets 0\nsize 2\nrel E: (0,1) (1,0)\n";
        let m = parse_structure(text).unwrap();
        assert_eq!(m, k2());
        assert_eq!(serialize_structure(&m), text.trim_start_matches("# K2\n"));
    }

    #[test]
    fn parse_out_of_range() {
        let err = parse_structure("vocab E/2\nconsts 0\nsets 0\nsize 3\nrel E: (0,5)\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 5, .. }), "{err}");
    }

    #[test]
    fn parse_arity_mismatch() {
        let err = parse_structure("vocab E/2\nconsts 0\nsets 0\nsize 3\nrel E: (0,1,2)\n").unwrap_err();
        assert!(err.to_string().contains("arity mismatch"));
    }

    #[test]
    fn parse_syntax_error_reports_line() {
        let err = parse_structure("vocab E/2\nconsts 0\nsets 0\nsize 3\nfoo bar\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 5, .. }));
    }

    #[test]
    fn round_trip_with_constants_and_sets() {
        let text = "vocab E/2 S/1\nconsts 2\nsets 1\nsize 3\nconst 0 = 2\nconst 1 = 0\nrel E: (0,1) (2,2)\nrel S: (1)\nset 0: 0 2\n";
        let m = parse_structure(text).unwrap();
        assert_eq!(serialize_structure(&m), text);
    }

    #[test]
    fn empty_universe_needs_no_constants() {
        let v = Vocabulary::graphs().with_consts(1);
        assert!(Structure::new(v, 0, vec![BTreeSet::new()], vec![0], vec![]).is_err());
        assert!(Structure::new(Vocabulary::graphs(), 0, vec![BTreeSet::new()], vec![], vec![]).is_ok());
    }

    #[test]
    fn incidence_graph_counts() {
        assert!(incidence_graph(1).is_err());
        let g2 = incidence_graph(2).unwrap();
        assert_eq!(g2.size(), 3);
        assert_eq!(g2.relation(0).len(), 4);
        // n=3: C(3,2) edge-nodes, each with two incident undirected edges
        let g3 = incidence_graph(3).unwrap();
        assert_eq!(g3.size(), 6);
        assert_eq!(g3.undirected_edge_count(0), 6);
        let g5 = incidence_graph(5).unwrap();
        assert_eq!(g5.size(), 15);
        assert_eq!(g5.undirected_edge_count(0), 20);
    }

    #[test]
    fn permutations() {
        let m = k2();
        assert_eq!(apply_permutation(&m, &[0, 1]).unwrap(), m);
        assert_eq!(apply_permutation(&m, &[1, 0]).unwrap(), m);
        let p3 = Structure::path(3);
        let q = apply_permutation(&p3, &[1, 0, 2]).unwrap();
        assert_ne!(q, p3);
        assert_eq!(q.degree_sequence(0), p3.degree_sequence(0));
        assert!(apply_permutation(&p3, &[0, 0, 1]).is_err());
    }

    #[test]
    fn enumeration_counts() {
        let g = Vocabulary::graphs();
        assert_eq!(enumerate_structures(&g, 1, 24).unwrap().count(), 2);
        assert_eq!(enumerate_structures(&g, 2, 24).unwrap().count(), 16);
        assert_eq!(enumerate_structures(&g.with_consts(1), 1, 24).unwrap().count(), 2);
        assert_eq!(enumerate_structures(&g, 0, 24).unwrap().count(), 1);
        assert_eq!(enumerate_structures(&g.with_consts(1), 0, 24).unwrap().count(), 0);
        let v = Vocabulary::new(vec![("S".into(), 1)], 2, 1).unwrap();
        let all: Vec<_> = enumerate_structures(&v, 3, 24).unwrap().collect();
        assert_eq!(all.len() as u128, structure_count(&v, 3).unwrap());
        assert_eq!(all.len(), 8 * 9 * 8);
        let distinct: BTreeSet<String> = all.iter().map(serialize_structure).collect();
        assert_eq!(distinct.len(), all.len());
    }

    #[test]
    fn enumeration_budget_refuses() {
        let err = enumerate_structures(&Vocabulary::graphs(), 5, 24).err().unwrap();
        assert!(err.is_budget());
        assert!(err.to_string().contains("25 bits"));
    }

    #[test]
    fn random_structures_are_valid() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let v = Vocabulary::new(vec![("E".into(), 2), ("S".into(), 1)], 2, 1).unwrap();
        for size in 1..6 {
            let m = random_structure(&v, size, 0.4, &mut rng);
            assert_eq!(parse_structure(&serialize_structure(&m)).unwrap(), m);
        }
    }
}
