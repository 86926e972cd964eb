//! Gluing schemes, the glue operation on structures, and the transfer
//! function `F^n` computing the theory of a glued structure from the
//! theories of its parts.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::sync::Arc;

use rustc_hash::FxHashMap as HashMap;
use sha2::{Digest, Sha256};

use crate::diagram::{rgs, Diagram, Term, MAX_TERMS};
use crate::error::{Error, Result};
use crate::structures::{all_tuples, Structure, Vocabulary};
use crate::theory::{DiagramId, TheoryId, TheoryNode, TheoryStore};

/// Where an element of a glued structure comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    /// A surviving element of part 1 not identified with anything in part 2.
    One,
    Two,
    /// An element obtained by identifying constants of both parts.
    Both,
}

impl Side {
    fn code(self) -> char {
        match self {
            Side::One => '1',
            Side::Two => '2',
            Side::Both => 'b',
        }
    }

    fn from_code(c: &str) -> Option<Side> {
        match c {
            "1" => Some(Side::One),
            "2" => Some(Side::Two),
            "b" => Some(Side::Both),
            _ => None,
        }
    }

    fn in_one(self) -> bool {
        self != Side::Two
    }

    fn in_two(self) -> bool {
        self != Side::One
    }
}

/// The abstract pattern of a relation tuple of a glued structure: equality
/// of positions, origin of each class, and the quantifier-free type of the
/// classes in each part (with that part's constants and the observed sets).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TuplePattern {
    pub eq: Vec<u8>,
    pub sides: Vec<Side>,
    pub part1: Diagram,
    pub part2: Diagram,
}

impl TuplePattern {
    pub fn arity(&self) -> usize {
        self.eq.len()
    }

    /// True if the tuple has elements private to each part.
    pub fn is_mixed(&self) -> bool {
        self.sides.contains(&Side::One) && self.sides.contains(&Side::Two)
    }

    /// Membership in `R^{M1} ∪ R^{M2}`.
    pub fn union_value(&self, pred: usize) -> bool {
        let in_part = |part: &Diagram, on: fn(Side) -> bool| -> bool {
            if !self.sides.iter().all(|&s| on(s)) {
                return false;
            }
            let mut var_of = vec![0u8; self.sides.len()];
            let mut v = 0;
            for (c, &s) in self.sides.iter().enumerate() {
                if on(s) {
                    var_of[c] = v;
                    v += 1;
                }
            }
            let classes: Vec<u8> = self
                .eq
                .iter()
                .map(|&c| part.var_class(var_of[c as usize] as usize) as u8)
                .collect();
            part.has_fact(pred, &classes)
        };
        in_part(&self.part1, Side::in_one) || in_part(&self.part2, Side::in_two)
    }

    pub fn render(&self, tau: &Vocabulary) -> String {
        let eq: Vec<String> = self.eq.iter().map(|c| c.to_string()).collect();
        let sides: String = self.sides.iter().map(|s| s.code().to_string()).collect::<Vec<_>>().join(".");
        format!(
            "eq={} side={} p1[{}] p2[{}]",
            eq.join("."),
            sides,
            self.part1.render(tau),
            self.part2.render(tau)
        )
    }

    pub fn parse(text: &str, tau: &Vocabulary) -> Result<TuplePattern> {
        let bad = |m: &str| Error::Invalid(format!("pattern `{text}`: {m}"));
        let text = text.trim();
        let (head, rest) = text.split_once(" p1[").ok_or_else(|| bad("missing p1[...]"))?;
        let (p1, rest) = rest.split_once("] p2[").ok_or_else(|| bad("missing p2[...]"))?;
        let p2 = rest.strip_suffix(']').ok_or_else(|| bad("unterminated p2"))?;
        let mut toks = head.split_whitespace();
        let eq: Vec<u8> = toks
            .next()
            .and_then(|t| t.strip_prefix("eq="))
            .ok_or_else(|| bad("expected eq="))?
            .split('.')
            .map(|x| x.parse::<u8>().map_err(|_| bad("bad eq")))
            .collect::<Result<_>>()?;
        let sides: Vec<Side> = toks
            .next()
            .and_then(|t| t.strip_prefix("side="))
            .ok_or_else(|| bad("expected side="))?
            .split('.')
            .map(|x| Side::from_code(x).ok_or_else(|| bad("bad side")))
            .collect::<Result<_>>()?;
        if toks.next().is_some() {
            return Err(bad("trailing tokens"));
        }
        let part1 = Diagram::parse(p1, tau)?;
        let part2 = Diagram::parse(p2, tau)?;
        let classes = eq.iter().map(|&c| c as usize + 1).max().unwrap_or(0);
        if rgs(&eq).0 != eq || sides.len() != classes {
            return Err(bad("equality pattern and sides do not match"));
        }
        let q1 = sides.iter().filter(|s| s.in_one()).count();
        let q2 = sides.iter().filter(|s| s.in_two()).count();
        if part1.vars() != q1 || part2.vars() != q2 {
            return Err(bad("part types have the wrong number of variables"));
        }
        let distinct = |d: &Diagram| (0..d.vars()).map(|v| d.var_class(v)).collect::<BTreeSet<_>>().len() == d.vars();
        if !distinct(&part1) || !distinct(&part2) {
            return Err(bad("distinct classes must be distinct elements"));
        }
        Ok(TuplePattern {
            eq,
            sides,
            part1,
            part2,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConstRef {
    /// 1 or 2.
    pub part: u8,
    pub index: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TableDefault {
    Union,
    False,
    True,
}

/// Truth table of one predicate on the glued structure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelTable {
    pub default: TableDefault,
    pub overrides: BTreeMap<TuplePattern, bool>,
}

impl RelTable {
    pub fn union() -> Self {
        RelTable {
            default: TableDefault::Union,
            overrides: BTreeMap::new(),
        }
    }

    pub fn value(&self, pred: usize, pattern: &TuplePattern) -> bool {
        if let Some(&v) = self.overrides.get(pattern) {
            return v;
        }
        match self.default {
            TableDefault::Union => pattern.union_value(pred),
            TableDefault::False => false,
            TableDefault::True => true,
        }
    }
}

/// A binary gluing recipe.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scheme {
    pub name: Option<String>,
    pub k1: usize,
    pub k2: usize,
    pub k: usize,
    /// Set predicates `P_0..P_{sets-1}` visible to the relation tables.
    pub sets: usize,
    /// Identified constant pairs `(i, j)`: `c_i` of part 1 with `c_j` of part 2.
    pub ident: Vec<(usize, usize)>,
    pub drop1: BTreeSet<usize>,
    pub drop2: BTreeSet<usize>,
    pub result: Vec<ConstRef>,
    pub tables: Vec<RelTable>,
}

impl Scheme {
    /// `R = R^{M1} ∪ R^{M2}` for every predicate, nothing dropped.
    pub fn plain_union(tau: &Vocabulary, k1: usize, k2: usize, ident: Vec<(usize, usize)>, result: Vec<ConstRef>) -> Result<Scheme> {
        let s = Scheme {
            name: None,
            k1,
            k2,
            k: result.len(),
            sets: 0,
            ident,
            drop1: BTreeSet::new(),
            drop2: BTreeSet::new(),
            result,
            tables: tau.predicates().iter().map(|_| RelTable::union()).collect(),
        };
        s.validate(tau)?;
        Ok(s)
    }

    /// Disjoint union without constants.
    pub fn disjoint_union(tau: &Vocabulary) -> Scheme {
        Scheme::plain_union(tau, 0, 0, vec![], vec![]).expect("disjoint union is valid")
    }

    pub fn with_name(mut self, name: &str) -> Scheme {
        self.name = Some(name.to_string());
        self
    }

    /// The name if given, otherwise a digest of the canonical text.
    pub fn id(&self, tau: &Vocabulary) -> String {
        match &self.name {
            Some(n) => n.clone(),
            None => {
                let mut anon = self.clone();
                anon.name = None;
                let h = Sha256::digest(serialize_scheme(&anon, tau).as_bytes());
                format!("h{}", &hex::encode(h)[..12])
            }
        }
    }

    fn partner1(&self, i: usize) -> Option<usize> {
        self.ident.iter().find(|p| p.0 == i).map(|p| p.1)
    }

    fn partner2(&self, j: usize) -> Option<usize> {
        self.ident.iter().find(|p| p.1 == j).map(|p| p.0)
    }

    /// Whether part-1 constant `i` is dropped (jointly with its partner).
    pub fn dropped1(&self, i: usize) -> bool {
        self.drop1.contains(&i) || self.partner1(i).is_some_and(|j| self.drop2.contains(&j))
    }

    pub fn dropped2(&self, j: usize) -> bool {
        self.drop2.contains(&j) || self.partner2(j).is_some_and(|i| self.drop1.contains(&i))
    }

    pub fn table_value(&self, pred: usize, pattern: &TuplePattern) -> bool {
        self.tables[pred].value(pred, pattern)
    }

    pub fn validate(&self, tau: &Vocabulary) -> Result<()> {
        let bad = |m: String| Err(Error::Invalid(format!("scheme: {m}")));
        if self.tables.len() != tau.predicates().len() {
            return bad(format!("{} tables for {} predicates", self.tables.len(), tau.predicates().len()));
        }
        let mut seen1 = BTreeSet::new();
        let mut seen2 = BTreeSet::new();
        for &(i, j) in &self.ident {
            if i >= self.k1 || j >= self.k2 {
                return bad(format!("identification {i}~{j} out of range"));
            }
            if !seen1.insert(i) || !seen2.insert(j) {
                return bad(format!("identification {i}~{j} is not a matching"));
            }
        }
        if self.drop1.iter().any(|&i| i >= self.k1) || self.drop2.iter().any(|&j| j >= self.k2) {
            return bad("dropped constant out of range".into());
        }
        if self.result.len() != self.k {
            return bad(format!("{} result constants, expected {}", self.result.len(), self.k));
        }
        for r in &self.result {
            let ok = match r.part {
                1 => r.index < self.k1 && !self.dropped1(r.index),
                2 => r.index < self.k2 && !self.dropped2(r.index),
                _ => false,
            };
            if !ok {
                return bad(format!("result constant {}.{} is not a kept constant", r.part, r.index));
            }
        }
        for (p, table) in self.tables.iter().enumerate() {
            let arity = tau.predicates()[p].arity;
            for pat in table.overrides.keys() {
                if pat.arity() != arity
                    || pat.part1.consts() != self.k1
                    || pat.part2.consts() != self.k2
                    || pat.part1.color_bits() > self.sets
                    || pat.part2.color_bits() > self.sets
                {
                    return bad(format!("pattern for {} does not fit the scheme", tau.predicates()[p].name));
                }
            }
        }
        Ok(())
    }
}

pub fn serialize_scheme(s: &Scheme, tau: &Vocabulary) -> String {
    let mut out = format!("scheme k1={} k2={} k={} sets={}", s.k1, s.k2, s.k, s.sets);
    if let Some(n) = &s.name {
        write!(out, " name={n}").unwrap();
    }
    out.push('\n');
    if !s.ident.is_empty() {
        let v: Vec<String> = s.ident.iter().map(|(i, j)| format!("{i}~{j}")).collect();
        writeln!(out, "ident {}", v.join(" ")).unwrap();
    }
    for (key, set) in [("drop1", &s.drop1), ("drop2", &s.drop2)] {
        if !set.is_empty() {
            let v: Vec<String> = set.iter().map(|i| i.to_string()).collect();
            writeln!(out, "{key} {}", v.join(" ")).unwrap();
        }
    }
    if !s.result.is_empty() {
        let v: Vec<String> = s
            .result
            .iter()
            .enumerate()
            .map(|(c, r)| format!("{c}={}.{}", r.part, r.index))
            .collect();
        writeln!(out, "result {}", v.join(" ")).unwrap();
    }
    for (p, table) in s.tables.iter().enumerate() {
        let name = &tau.predicates()[p].name;
        let d = match table.default {
            TableDefault::Union => "union",
            TableDefault::False => "false",
            TableDefault::True => "true",
        };
        writeln!(out, "table {name} default={d}").unwrap();
        for (pat, &v) in &table.overrides {
            writeln!(out, "table {name} pattern \"{}\" = {}", pat.render(tau), v as u8).unwrap();
        }
    }
    out
}

pub fn parse_scheme(text: &str, tau: &Vocabulary) -> Result<Scheme> {
    let mut scheme: Option<Scheme> = None;
    for (no, raw) in text.lines().enumerate() {
        let line_no = no + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let perr = |m: &str| Error::parse(line_no, m.to_string());
        let (key, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        if key == "scheme" {
            if scheme.is_some() {
                return Err(perr("duplicate scheme header"));
            }
            let mut fields: BTreeMap<&str, &str> = BTreeMap::new();
            for tok in rest.split_whitespace() {
                let (k, v) = tok.split_once('=').ok_or_else(|| perr("expected key=value"))?;
                fields.insert(k, v);
            }
            let num = |k: &str, default: Option<usize>| -> Result<usize> {
                match fields.get(k) {
                    Some(v) => v.parse().map_err(|_| perr(&format!("bad {k}"))),
                    None => default.ok_or_else(|| perr(&format!("missing {k}"))),
                }
            };
            let k1 = num("k1", None)?;
            let k2 = num("k2", None)?;
            let k = num("k", None)?;
            let sets = num("sets", Some(0))?;
            if let Some(unknown) = fields.keys().find(|k| !["k1", "k2", "k", "sets", "name"].contains(k)) {
                return Err(perr(&format!("unknown header field {unknown}")));
            }
            scheme = Some(Scheme {
                name: fields.get("name").map(|s| s.to_string()),
                k1,
                k2,
                k,
                sets,
                ident: vec![],
                drop1: BTreeSet::new(),
                drop2: BTreeSet::new(),
                result: vec![],
                tables: tau.predicates().iter().map(|_| RelTable::union()).collect(),
            });
            continue;
        }
        let s = scheme.as_mut().ok_or_else(|| perr("expected `scheme` header first"))?;
        match key {
            "ident" => {
                for tok in rest.split_whitespace() {
                    let (i, j) = tok.split_once('~').ok_or_else(|| perr("expected i~j"))?;
                    let i = i.parse().map_err(|_| perr("bad index"))?;
                    let j = j.parse().map_err(|_| perr("bad index"))?;
                    s.ident.push((i, j));
                }
            }
            "drop1" | "drop2" => {
                for tok in rest.split_whitespace() {
                    let i: usize = tok.parse().map_err(|_| perr("bad index"))?;
                    if key == "drop1" {
                        s.drop1.insert(i);
                    } else {
                        s.drop2.insert(i);
                    }
                }
            }
            "result" => {
                let mut refs = BTreeMap::new();
                for tok in rest.split_whitespace() {
                    let (c, r) = tok.split_once('=').ok_or_else(|| perr("expected c=part.index"))?;
                    let (part, idx) = r.split_once('.').ok_or_else(|| perr("expected part.index"))?;
                    let c: usize = c.parse().map_err(|_| perr("bad constant"))?;
                    let part: u8 = part.parse().map_err(|_| perr("bad part"))?;
                    let index: usize = idx.parse().map_err(|_| perr("bad index"))?;
                    refs.insert(c, ConstRef { part, index });
                }
                if refs.keys().copied().ne(0..refs.len()) {
                    return Err(perr("result constants must be numbered 0..k-1"));
                }
                s.result = refs.into_values().collect();
            }
            "table" => {
                let (pred, spec) = rest.split_once(char::is_whitespace).ok_or_else(|| perr("expected table <Pred> ..."))?;
                let p = tau
                    .predicate_index(pred)
                    .ok_or_else(|| perr(&format!("unknown predicate {pred}")))?;
                let spec = spec.trim();
                if let Some(d) = spec.strip_prefix("default=") {
                    s.tables[p].default = match d {
                        "union" => TableDefault::Union,
                        "false" => TableDefault::False,
                        "true" => TableDefault::True,
                        _ => return Err(perr("default must be union, false or true")),
                    };
                } else if let Some(q) = spec.strip_prefix("pattern") {
                    let q = q.trim().strip_prefix('"').ok_or_else(|| perr("expected quoted pattern"))?;
                    let (pat, val) = q.split_once('"').ok_or_else(|| perr("unterminated pattern"))?;
                    let val = val.trim().strip_prefix('=').ok_or_else(|| perr("expected = 0|1"))?.trim();
                    let v = match val {
                        "0" => false,
                        "1" => true,
                        _ => return Err(perr("value must be 0 or 1")),
                    };
                    let pat = TuplePattern::parse(pat, tau).map_err(|e| perr(&e.to_string()))?;
                    s.tables[p].overrides.insert(pat, v);
                } else {
                    return Err(perr("expected default= or pattern"));
                }
            }
            _ => return Err(perr(&format!("unknown keyword `{key}`"))),
        }
    }
    let mut s = scheme.ok_or_else(|| Error::parse(0, "empty scheme file"))?;
    s.ident.sort_unstable();
    s.validate(tau)?;
    Ok(s)
}

/// A glued structure with the origin of every element.
#[derive(Clone, Debug)]
pub struct Glued {
    pub structure: Structure,
    /// Per new element: its part-1 and part-2 preimages.
    pub origin: Vec<(Option<usize>, Option<usize>)>,
    pub deficit: usize,
}

pub fn glue(m1: &Structure, m2: &Structure, s: &Scheme) -> Result<Structure> {
    glue_detailed(m1, m2, s).map(|g| g.structure)
}

pub fn glue_detailed(m1: &Structure, m2: &Structure, s: &Scheme) -> Result<Glued> {
    let tau = m1.vocab();
    if !tau.same_tau(m2.vocab()) || s.tables.len() != tau.predicates().len() {
        return Err(Error::Signature("parts and scheme use different vocabularies".into()));
    }
    if m1.constants().len() != s.k1 || m2.constants().len() != s.k2 {
        return Err(Error::Signature(format!(
            "scheme expects {} and {} constants, parts have {} and {}",
            s.k1,
            s.k2,
            m1.constants().len(),
            m2.constants().len()
        )));
    }
    let m = tau.sets();
    if m2.vocab().sets() != m || s.sets > m {
        return Err(Error::Signature("parts must have the same sets, at least as many as the scheme observes".into()));
    }
    let (s1, s2) = (m1.size(), m2.size());
    let mut partner1: Vec<Option<usize>> = vec![None; s1];
    let mut partner2: Vec<Option<usize>> = vec![None; s2];
    for &(i, j) in &s.ident {
        let (a, b) = (m1.constants()[i], m2.constants()[j]);
        if partner1[a].is_some_and(|x| x != b) || partner2[b].is_some_and(|x| x != a) {
            return Err(Error::NotApplicable("identification merges distinct elements of one part".into()));
        }
        partner1[a] = Some(b);
        partner2[b] = Some(a);
        if (0..m).any(|q| m1.in_set(q, a) != m2.in_set(q, b)) {
            return Err(Error::NotApplicable(format!("identified constants {i}~{j} disagree on a set")));
        }
    }
    // an element named by constants survives if one of its names is kept
    let mut named1 = vec![false; s1];
    let mut kept1 = vec![false; s1];
    let mut named2 = vec![false; s2];
    let mut kept2 = vec![false; s2];
    for (i, &e) in m1.constants().iter().enumerate() {
        named1[e] = true;
        kept1[e] |= !s.dropped1(i);
    }
    for (j, &e) in m2.constants().iter().enumerate() {
        named2[e] = true;
        kept2[e] |= !s.dropped2(j);
    }
    let survives1 = |e: usize| !named1[e] || kept1[e] || partner1[e].is_some_and(|b| kept2[b]);
    let survives2 = |e: usize| !named2[e] || kept2[e] || partner2[e].is_some_and(|a| kept1[a]);
    let mut map1 = vec![None; s1];
    let mut map2 = vec![None; s2];
    let mut origin = Vec::new();
    for e in 0..s1 {
        if survives1(e) {
            map1[e] = Some(origin.len());
            if let Some(b) = partner1[e] {
                map2[b] = Some(origin.len());
            }
            origin.push((Some(e), partner1[e]));
        }
    }
    for e in 0..s2 {
        if partner2[e].is_none() && survives2(e) {
            map2[e] = Some(origin.len());
            origin.push((None, Some(e)));
        }
    }
    let size = origin.len();
    let constants = s
        .result
        .iter()
        .map(|r| match r.part {
            1 => map1[m1.constants()[r.index]],
            _ => map2[m2.constants()[r.index]],
        })
        .collect::<Option<Vec<usize>>>()
        .ok_or_else(|| Error::Invalid("result constant names a removed element".into()))?;
    let sets = (0..m)
        .map(|q| {
            let mut set: BTreeSet<usize> = m1.sets()[q].iter().filter_map(|&e| map1[e]).collect();
            set.extend(m2.sets()[q].iter().filter_map(|&e| map2[e]));
            set
        })
        .collect();
    let pattern_of = |t: &[usize]| pattern_with_origin(m1, m2, s, &origin, t);
    let relations = tau
        .predicates()
        .iter()
        .enumerate()
        .map(|(p, pred)| {
            all_tuples(size, pred.arity)
                .into_iter()
                .filter(|t| s.table_value(p, &pattern_of(t)))
                .collect()
        })
        .collect();
    let vocab = tau.with_consts(s.k);
    let structure = Structure::new(vocab, size, relations, constants, sets)?;
    Ok(Glued {
        structure,
        origin,
        deficit: s1 + s2 - size,
    })
}

/// The pattern of a tuple of a glued structure, computed from the parts.
pub fn glued_pattern(m1: &Structure, m2: &Structure, s: &Scheme, glued: &Glued, tuple: &[usize]) -> TuplePattern {
    pattern_with_origin(m1, m2, s, &glued.origin, tuple)
}

fn part_type(part: &Structure, elems: &[usize], sets: usize) -> Diagram {
    let mut keys = elems.to_vec();
    keys.extend_from_slice(part.constants());
    Diagram::build(
        elems.len(),
        &keys,
        &part.vocab().arities(),
        |p, t| part.holds(p, t),
        |e| (0..sets).fold(0u32, |acc, q| acc | (part.in_set(q, e) as u32) << q),
    )
}

fn pattern_with_origin(
    m1: &Structure,
    m2: &Structure,
    s: &Scheme,
    origin: &[(Option<usize>, Option<usize>)],
    tuple: &[usize],
) -> TuplePattern {
    let (eq, reps) = rgs(tuple);
    let mut sides = Vec::with_capacity(reps.len());
    let (mut e1, mut e2) = (Vec::new(), Vec::new());
    for &r in &reps {
        let (a, b) = origin[tuple[r]];
        sides.push(match (a, b) {
            (Some(_), Some(_)) => Side::Both,
            (Some(_), None) => Side::One,
            _ => Side::Two,
        });
        e1.extend(a);
        e2.extend(b);
    }
    TuplePattern {
        eq,
        sides,
        part1: part_type(m1, &e1, s.sets),
        part2: part_type(m2, &e2, s.sets),
    }
}

/// How the constants of two parts combine under a scheme, read from the
/// constant diagrams of the parts.
struct ConstView<'a> {
    s: &'a Scheme,
    c1: &'a Diagram,
    c2: &'a Diagram,
}

impl ConstView<'_> {
    fn check_applicable(&self) -> Result<()> {
        for &(i, j) in &self.s.ident {
            for &(i2, j2) in &self.s.ident {
                if (self.c1.const_class(i) == self.c1.const_class(i2)) != (self.c2.const_class(j) == self.c2.const_class(j2)) {
                    return Err(Error::NotApplicable("identification merges distinct elements of one part".into()));
                }
            }
            if self.c1.color(self.c1.const_class(i)) != self.c2.color(self.c2.const_class(j)) {
                return Err(Error::NotApplicable(format!("identified constants {i}~{j} disagree on a set")));
            }
        }
        Ok(())
    }

    /// Part-2 class merged with part-1 class `c` (in a diagram `d1` whose
    /// constants agree with `c1`), if any.
    fn partner(&self, d1: &Diagram, c: usize, d2: &Diagram) -> Option<usize> {
        self.s
            .ident
            .iter()
            .find(|&&(i, _)| d1.const_class(i) == c)
            .map(|&(_, j)| d2.const_class(j))
    }

    /// Part-1 class merged with part-2 class `c`, if any.
    fn partner_of2(&self, d1: &Diagram, d2: &Diagram, c: usize) -> Option<usize> {
        self.s
            .ident
            .iter()
            .find(|&&(_, j)| d2.const_class(j) == c)
            .map(|&(i, _)| d1.const_class(i))
    }

    fn merged2(&self, d2: &Diagram, c: usize) -> bool {
        self.s.ident.iter().any(|&(_, j)| d2.const_class(j) == c)
    }

    /// Survival of the element given by part-1 class `a` and/or part-2 class `b`.
    fn survives(&self, d1: &Diagram, a: Option<usize>, d2: &Diagram, b: Option<usize>) -> bool {
        let named1: Vec<usize> = a.map(|c| d1.consts_in_class(c).collect()).unwrap_or_default();
        let named2: Vec<usize> = b.map(|c| d2.consts_in_class(c).collect()).unwrap_or_default();
        (named1.is_empty() && named2.is_empty())
            || named1.iter().any(|&i| !self.s.dropped1(i))
            || named2.iter().any(|&j| !self.s.dropped2(j))
    }

    /// `‖M1‖ + ‖M2‖ − ‖glue‖`: constant elements merged away or removed.
    fn deficit(&self) -> usize {
        let (n1, n2) = (self.c1.class_count(), self.c2.class_count());
        let mut surviving = 0;
        for a in 0..n1 {
            let b = self.partner(self.c1, a, self.c2);
            surviving += self.survives(self.c1, Some(a), self.c2, b) as usize;
        }
        for b in 0..n2 {
            if !self.merged2(self.c2, b) {
                surviving += self.survives(self.c1, None, self.c2, Some(b)) as usize;
            }
        }
        n1 + n2 - surviving
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Key {
    P1(u8),
    P2(u8),
}

/// Evaluates `F^n` for one scheme, memoizing on theory pairs.
pub struct TransferEngine {
    scheme: Scheme,
    memo: HashMap<(TheoryId, TheoryId), TheoryId>,
    combos: HashMap<(u32, DiagramId, DiagramId), Option<DiagramId>>,
    prefixes: HashMap<(TheoryId, usize), Arc<Vec<(DiagramId, Diagram)>>>,
    /// Per predicate, the `(eq, sides)` shapes that some override mentions.
    shapes: Vec<HashSet<(Vec<u8>, Vec<Side>)>>,
}

impl TransferEngine {
    pub fn new(scheme: Scheme) -> Self {
        let shapes = scheme
            .tables
            .iter()
            .map(|t| t.overrides.keys().map(|pat| (pat.eq.clone(), pat.sides.clone())).collect())
            .collect();
        TransferEngine {
            scheme,
            shapes,
            memo: HashMap::default(),
            combos: HashMap::default(),
            prefixes: HashMap::default(),
        }
    }

    pub fn scheme(&self) -> &Scheme {
        &self.scheme
    }

    /// `F^n(t1, t2)` together with the size deficit `j`.
    pub fn apply(&mut self, store: &TheoryStore, t1: TheoryId, t2: TheoryId) -> Result<(TheoryId, usize)> {
        let (n1, n2) = (store.node(t1), store.node(t2));
        if n1.depth != n2.depth || n1.sets != n2.sets {
            return Err(Error::Signature("theories differ in depth or number of sets".into()));
        }
        if n1.consts as usize != self.scheme.k1 || n2.consts as usize != self.scheme.k2 {
            return Err(Error::Signature(format!(
                "scheme expects {} and {} constants, theories have {} and {}",
                self.scheme.k1, self.scheme.k2, n1.consts, n2.consts
            )));
        }
        if (n1.sets as usize) < self.scheme.sets {
            return Err(Error::Signature("theories have fewer sets than the scheme observes".into()));
        }
        let (c1, c2) = (store.const_diagram(t1), store.const_diagram(t2));
        let view = ConstView {
            s: &self.scheme,
            c1: &c1,
            c2: &c2,
        };
        view.check_applicable()?;
        let j = view.deficit();
        Ok((self.rec(store, t1, t2), j))
    }

    fn rec(&mut self, store: &TheoryStore, t1: TheoryId, t2: TheoryId) -> TheoryId {
        if let Some(&t) = self.memo.get(&(t1, t2)) {
            return t;
        }
        let n1 = store.node(t1);
        let (c1, c2) = (store.const_diagram(t1), store.const_diagram(t2));
        let const_diagram = {
            let d = self.combine(store, &[], &c1, &c2).expect("applicable constants combine");
            store.intern_diagram(d)
        };
        let members = if n1.depth == 0 {
            self.base_members(store, t1, t2)
        } else {
            let newest = n1.sets as usize;
            let m1 = store.members(t1);
            let m2 = store.members(t2);
            let cd2: Vec<Diagram> = m2.iter().map(|&b| store.const_diagram(b)).collect();
            let mut out = Vec::new();
            for &a in &m1 {
                let ca = store.const_diagram(a);
                for (&b, cb) in m2.iter().zip(&cd2) {
                    if self.compatible(&ca, cb, newest) {
                        out.push(self.rec(store, a, b).0);
                    }
                }
            }
            out
        };
        let t = store.intern_node(TheoryNode {
            depth: n1.depth,
            sets: n1.sets,
            consts: self.scheme.k as u8,
            const_diagram,
            members,
        });
        self.memo.insert((t1, t2), t);
        t
    }

    /// Whether expansions by a new set `P_newest` with these constant
    /// diagrams come from a set of the glued structure.
    fn compatible(&self, ca: &Diagram, cb: &Diagram, newest: usize) -> bool {
        let view = ConstView {
            s: &self.scheme,
            c1: ca,
            c2: cb,
        };
        for &(i, j) in &self.scheme.ident {
            if ca.in_set(ca.const_class(i), newest) != cb.in_set(cb.const_class(j), newest) {
                return false;
            }
        }
        for a in 0..ca.class_count() {
            let b = view.partner(ca, a, cb);
            if ca.in_set(a, newest) && !view.survives(ca, Some(a), cb, b) {
                return false;
            }
        }
        for b in 0..cb.class_count() {
            if cb.in_set(b, newest) && !view.merged2(cb, b) && !view.survives(ca, None, cb, Some(b)) {
                return false;
            }
        }
        true
    }

    fn prefixes(&mut self, store: &TheoryStore, t: TheoryId, q: usize) -> Arc<Vec<(DiagramId, Diagram)>> {
        if let Some(v) = self.prefixes.get(&(t, q)) {
            return Arc::clone(v);
        }
        let v: Vec<(DiagramId, Diagram)> = if q == 0 {
            let d = store.const_diagram(t);
            vec![(store.intern_diagram(d.clone()), d)]
        } else {
            let set: BTreeSet<Diagram> = store
                .realized(t)
                .iter()
                .map(|d| d.prefix(q, store.arities()))
                .collect();
            set.into_iter().map(|d| (store.intern_diagram(d.clone()), d)).collect()
        };
        let v = Arc::new(v);
        self.prefixes.insert((t, q), Arc::clone(&v));
        v
    }

    fn base_members(&mut self, store: &TheoryStore, t1: TheoryId, t2: TheoryId) -> Vec<u32> {
        let r = store.tuple_len();
        let choices: &[Side] = if self.scheme.ident.is_empty() {
            &[Side::One, Side::Two]
        } else {
            &[Side::One, Side::Two, Side::Both]
        };
        let mut out = BTreeSet::new();
        let mut sides = vec![Side::One; r];
        let total = choices.len().pow(r as u32);
        for code in 0..total {
            let mut x = code;
            for s in sides.iter_mut() {
                *s = choices[x % choices.len()];
                x /= choices.len();
            }
            let key_code = sides.iter().fold(0u32, |acc, s| acc * 3 + *s as u32);
            let q1 = sides.iter().filter(|s| s.in_one()).count();
            let q2 = sides.iter().filter(|s| s.in_two()).count();
            let l1 = self.prefixes(store, t1, q1);
            let l2 = self.prefixes(store, t2, q2);
            for (id1, d1) in l1.iter() {
                for (id2, d2) in l2.iter() {
                    let key = (key_code, *id1, *id2);
                    let res = match self.combos.get(&key) {
                        Some(&r) => r,
                        None => {
                            let r = self.combine(store, &sides, d1, d2).map(|d| store.intern_diagram(d));
                            self.combos.insert(key, r);
                            r
                        }
                    };
                    if let Some(d) = res {
                        out.insert(d.0);
                    }
                }
            }
        }
        out.into_iter().collect()
    }

    /// The diagram of a glued tuple whose positions have the given sides,
    /// where `d1` (`d2`) is the diagram of the positions lying in part 1
    /// (part 2), in order. `None` if the combination cannot occur.
    fn combine(&self, store: &TheoryStore, sides: &[Side], d1: &Diagram, d2: &Diagram) -> Option<Diagram> {
        let s = &self.scheme;
        let view = ConstView { s, c1: d1, c2: d2 };
        let (mut v1, mut v2) = (0, 0);
        let mut keys = Vec::with_capacity(sides.len() + s.k);
        for &side in sides {
            match side {
                Side::One => {
                    let c = d1.var_class(v1);
                    v1 += 1;
                    if view.partner(d1, c, d2).is_some() || !view.survives(d1, Some(c), d2, None) {
                        return None;
                    }
                    keys.push(Key::P1(c as u8));
                }
                Side::Two => {
                    let c = d2.var_class(v2);
                    v2 += 1;
                    if view.merged2(d2, c) || !view.survives(d1, None, d2, Some(c)) {
                        return None;
                    }
                    keys.push(Key::P2(c as u8));
                }
                Side::Both => {
                    let (a, b) = (d1.var_class(v1), d2.var_class(v2));
                    v1 += 1;
                    v2 += 1;
                    if view.partner(d1, a, d2) != Some(b) || !view.survives(d1, Some(a), d2, Some(b)) {
                        return None;
                    }
                    keys.push(Key::P1(a as u8));
                }
            }
        }
        for r in &s.result {
            keys.push(match r.part {
                1 => Key::P1(d1.const_class(r.index) as u8),
                // the constant's element may be merged through another name
                _ => match view.partner_of2(d1, d2, d2.const_class(r.index)) {
                    Some(a) => Key::P1(a as u8),
                    None => Key::P2(d2.const_class(r.index) as u8),
                },
            });
        }
        let arities = store.arities();
        let term_of = |d: &Diagram, c: usize| -> Term {
            (0..d.vars())
                .find(|&v| d.var_class(v) == c)
                .map(|v| Term::Var(v as u8))
                .or_else(|| (0..d.consts()).find(|&i| d.const_class(i) == c).map(|i| Term::Const(i as u8)))
                .expect("class has a term")
        };
        let mut pattern_cache: Vec<(Vec<(bool, u8)>, usize, bool)> = Vec::new();
        let d = Diagram::build(
            sides.len(),
            &keys,
            arities,
            |p, tuple| {
                let table = &s.tables[p];
                if table.overrides.is_empty() {
                    return default_value(table.default, p, tuple, &view, d1, d2);
                }
                let flat: Vec<(bool, u8)> = tuple
                    .iter()
                    .map(|k| match *k {
                        Key::P1(c) => (true, c),
                        Key::P2(c) => (false, c),
                    })
                    .collect();
                if let Some(hit) = pattern_cache.iter().find(|(t, q, _)| *q == p && *t == flat) {
                    return hit.2;
                }
                let (eq, reps) = rgs(tuple);
                let pattern_sides: Vec<Side> = reps
                    .iter()
                    .map(|&rep| match tuple[rep] {
                        Key::P1(c) if view.partner(d1, c as usize, d2).is_some() => Side::Both,
                        Key::P1(_) => Side::One,
                        Key::P2(_) => Side::Two,
                    })
                    .collect();
                let shape = (eq, pattern_sides);
                if !self.shapes[p].contains(&shape) {
                    let v = default_value(table.default, p, tuple, &view, d1, d2);
                    pattern_cache.push((flat, p, v));
                    return v;
                }
                let (eq, pattern_sides) = shape;
                let (mut picks1, mut picks2) = (Vec::new(), Vec::new());
                for &rep in &reps {
                    match tuple[rep] {
                        Key::P1(c) => {
                            picks1.push(term_of(d1, c as usize));
                            if let Some(b) = view.partner(d1, c as usize, d2) {
                                picks2.push(term_of(d2, b));
                            }
                        }
                        Key::P2(c) => picks2.push(term_of(d2, c as usize)),
                    }
                }
                let pattern = TuplePattern {
                    eq,
                    sides: pattern_sides,
                    part1: d1.project(&picks1, arities).restrict_sets(s.sets),
                    part2: d2.project(&picks2, arities).restrict_sets(s.sets),
                };
                let v = s.table_value(p, &pattern);
                pattern_cache.push((flat, p, v));
                v
            },
            |k| match k {
                Key::P1(c) => d1.color(c as usize),
                Key::P2(c) => d2.color(c as usize),
            },
        );
        Some(d)
    }
}

/// A table default evaluated straight from the part diagrams. Agrees with
/// [`TuplePattern::union_value`] on the pattern of `tuple`.
fn default_value(default: TableDefault, p: usize, tuple: &[Key], view: &ConstView, d1: &Diagram, d2: &Diagram) -> bool {
    match default {
        TableDefault::False => false,
        TableDefault::True => true,
        TableDefault::Union => {
            let mut buf = [0u8; MAX_TERMS];
            let cls = &mut buf[..tuple.len()];
            let mut in1 = true;
            for (x, k) in cls.iter_mut().zip(tuple) {
                match *k {
                    Key::P1(c) => *x = c,
                    Key::P2(_) => in1 = false,
                }
            }
            if in1 && d1.has_fact(p, cls) {
                return true;
            }
            for (x, k) in cls.iter_mut().zip(tuple) {
                *x = match *k {
                    Key::P2(c) => c,
                    Key::P1(c) => match view.partner(d1, c as usize, d2) {
                        Some(b) => b as u8,
                        None => return false,
                    },
                };
            }
            d2.has_fact(p, cls)
        }
    }
}

/// `F^n(t1, t2, s)`.
pub fn transfer(store: &TheoryStore, t1: TheoryId, t2: TheoryId, s: &Scheme) -> Result<TheoryId> {
    TransferEngine::new(s.clone()).apply(store, t1, t2).map(|(t, _)| t)
}

/// Patterns (with their predicate) of every tuple of `glue(m1, m2, s)`.
pub fn realized_patterns(m1: &Structure, m2: &Structure, s: &Scheme) -> Result<BTreeSet<(usize, TuplePattern)>> {
    let g = glue_detailed(m1, m2, s)?;
    let mut out = BTreeSet::new();
    for (p, pred) in m1.vocab().predicates().iter().enumerate() {
        for t in all_tuples(g.structure.size(), pred.arity) {
            out.insert((p, glued_pattern(m1, m2, s, &g, &t)));
        }
    }
    Ok(out)
}

/// A scheme with the given constant shape and a random truth table: a
/// random default plus random overrides on patterns drawn from `pool`.
/// Patterns in the pool that do not fit the shape are ignored.
pub fn random_scheme<R: rand::Rng>(
    tau: &Vocabulary,
    base: &Scheme,
    pool: &[(usize, TuplePattern)],
    rng: &mut R,
) -> Scheme {
    let mut s = base.clone();
    s.name = None;
    for (p, table) in s.tables.iter_mut().enumerate() {
        table.default = match rng.gen_range(0..4) {
            0 => TableDefault::False,
            1 => TableDefault::True,
            _ => TableDefault::Union,
        };
        table.overrides.clear();
        for (q, pat) in pool {
            if *q == p && pat.arity() == tau.predicates()[p].arity && rng.gen_bool(0.3) {
                table.overrides.insert(pat.clone(), rng.gen_bool(0.5));
            }
        }
    }
    s
}

/// Which patterns of a table may differ from the union default.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableDomain {
    Full,
    /// Only patterns with elements private to both parts.
    MixedOnly,
}

pub const DEFAULT_SCHEME_BUDGET: u128 = 1 << 16;

/// All formally possible patterns of one predicate for a given
/// identification and drop choice: part types with pairwise distinct
/// class elements, identified classes matched across parts, constant
/// identifications consistent, removed elements absent.
pub fn formal_patterns(
    tau: &Vocabulary,
    arity: usize,
    s: &Scheme,
    diagram_budget: u128,
) -> Result<Vec<TuplePattern>> {
    let arities = tau.arities();
    let mut lists: HashMap<usize, (Vec<Diagram>, Vec<Diagram>)> = HashMap::default();
    let mut out = Vec::new();
    for eq in crate::diagram::all_rgs(arity) {
        let classes = eq.iter().map(|&c| c as usize + 1).max().unwrap_or(0);
        let choices: usize = if s.ident.is_empty() { 2 } else { 3 };
        for code in 0..choices.pow(classes as u32) {
            let mut x = code;
            let sides: Vec<Side> = (0..classes)
                .map(|_| {
                    let side = [Side::One, Side::Two, Side::Both][x % choices];
                    x /= choices;
                    side
                })
                .collect();
            let q1 = sides.iter().filter(|s| s.in_one()).count();
            let q2 = sides.iter().filter(|s| s.in_two()).count();
            for q in [q1, q2] {
                if lists.contains_key(&q) {
                    continue;
                }
                let n1 = Diagram::count(q, s.k1, &arities, s.sets, true);
                let n2 = Diagram::count(q, s.k2, &arities, s.sets, true);
                if n1.max(n2) > diagram_budget {
                    return Err(Error::budget("pattern-space", format!("{} part types", n1.max(n2)), diagram_budget));
                }
                lists.insert(
                    q,
                    (
                        Diagram::enumerate(q, s.k1, &arities, s.sets, true),
                        Diagram::enumerate(q, s.k2, &arities, s.sets, true),
                    ),
                );
            }
            let ones: Vec<usize> = (0..classes).filter(|&c| sides[c].in_one()).collect();
            let twos: Vec<usize> = (0..classes).filter(|&c| sides[c].in_two()).collect();
            for d1 in &lists[&q1].0 {
                for d2 in &lists[&q2].1 {
                    let view = ConstView { s, c1: d1, c2: d2 };
                    if view.check_applicable().is_err() {
                        continue;
                    }
                    let ok = (0..classes).all(|c| {
                        let a = ones.iter().position(|&x| x == c).map(|v| d1.var_class(v));
                        let b = twos.iter().position(|&x| x == c).map(|v| d2.var_class(v));
                        match sides[c] {
                            Side::One => {
                                let a = a.unwrap();
                                view.partner(d1, a, d2).is_none() && view.survives(d1, Some(a), d2, None)
                            }
                            Side::Two => {
                                let b = b.unwrap();
                                !view.merged2(d2, b) && view.survives(d1, None, d2, Some(b))
                            }
                            Side::Both => {
                                let (a, b) = (a.unwrap(), b.unwrap());
                                view.partner(d1, a, d2) == Some(b) && view.survives(d1, Some(a), d2, Some(b))
                            }
                        }
                    });
                    if ok {
                        out.push(TuplePattern {
                            eq: eq.clone(),
                            sides: sides.clone(),
                            part1: d1.clone(),
                            part2: d2.clone(),
                        });
                    }
                }
            }
        }
    }
    out.sort();
    Ok(out)
}

fn matchings(k1: usize, k2: usize) -> Vec<Vec<(usize, usize)>> {
    fn go(i: usize, k1: usize, k2: usize, used: &mut Vec<bool>, cur: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        if i == k1 {
            out.push(cur.clone());
            return;
        }
        go(i + 1, k1, k2, used, cur, out);
        for j in 0..k2 {
            if !used[j] {
                used[j] = true;
                cur.push((i, j));
                go(i + 1, k1, k2, used, cur, out);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(0, k1, k2, &mut vec![false; k2], &mut Vec::new(), &mut out);
    out
}

/// One identification/keep choice with its kept references and free patterns.
struct SchemeFrame {
    base: Scheme,
    kept: Vec<ConstRef>,
    free: Vec<(usize, TuplePattern)>,
}

fn scheme_frames(tau: &Vocabulary, k1: usize, k2: usize, k: usize, sets: usize, domain: TableDomain, budget: u128) -> Result<Vec<SchemeFrame>> {
    let mut frames = Vec::new();
    for ident in matchings(k1, k2) {
        let un1: Vec<usize> = (0..k1).filter(|i| !ident.iter().any(|p| p.0 == *i)).collect();
        let un2: Vec<usize> = (0..k2).filter(|j| !ident.iter().any(|p| p.1 == *j)).collect();
        let units = ident.len() + un1.len() + un2.len();
        for flags in 0u64..(1 << units) {
            let dropped = |u: usize| flags >> u & 1 == 1;
            let mut drop1 = BTreeSet::new();
            let mut drop2 = BTreeSet::new();
            let mut kept = Vec::new();
            for (u, &(i, _)) in ident.iter().enumerate() {
                if dropped(u) {
                    drop1.insert(i);
                } else {
                    kept.push(ConstRef { part: 1, index: i });
                }
            }
            for (u, &i) in un1.iter().enumerate() {
                if dropped(ident.len() + u) {
                    drop1.insert(i);
                } else {
                    kept.push(ConstRef { part: 1, index: i });
                }
            }
            for (u, &j) in un2.iter().enumerate() {
                if dropped(ident.len() + un1.len() + u) {
                    drop2.insert(j);
                } else {
                    kept.push(ConstRef { part: 2, index: j });
                }
            }
            kept.sort();
            let base = Scheme {
                name: None,
                k1,
                k2,
                k,
                sets,
                ident: ident.clone(),
                drop1,
                drop2,
                result: vec![],
                tables: tau.predicates().iter().map(|_| RelTable::union()).collect(),
            };
            let mut free = Vec::new();
            for (p, pred) in tau.predicates().iter().enumerate() {
                for pat in formal_patterns(tau, pred.arity, &base, budget)? {
                    if domain == TableDomain::Full || pat.is_mixed() {
                        free.push((p, pat));
                    }
                }
            }
            frames.push(SchemeFrame { base, kept, free });
        }
    }
    Ok(frames)
}

fn frame_count(f: &SchemeFrame, k: usize) -> u128 {
    let results = (f.kept.len() as u128).checked_pow(k as u32).unwrap_or(u128::MAX);
    if results == 0 {
        return 0;
    }
    if f.free.len() >= 120 {
        return u128::MAX;
    }
    results.saturating_mul(1u128 << f.free.len())
}

/// Number of schemes [`enumerate_schemes`] would produce.
pub fn count_schemes(tau: &Vocabulary, k1: usize, k2: usize, k: usize, sets: usize, domain: TableDomain, budget: u128) -> Result<u128> {
    Ok(scheme_frames(tau, k1, k2, k, sets, domain, budget)?
        .iter()
        .map(|f| frame_count(f, k))
        .fold(0u128, |a, b| a.saturating_add(b)))
}

/// Every scheme with the given constant counts: all identifications, keep
/// flags, result selections and truth tables over the formal patterns.
/// Table entries equal to the union value are left to the default, so the
/// all-union table is the plain union scheme.
pub fn enumerate_schemes(
    tau: &Vocabulary,
    k1: usize,
    k2: usize,
    k: usize,
    sets: usize,
    domain: TableDomain,
    budget: u128,
) -> Result<Vec<Scheme>> {
    let frames = scheme_frames(tau, k1, k2, k, sets, domain, budget)?;
    let total = frames.iter().map(|f| frame_count(f, k)).fold(0u128, |a, b| a.saturating_add(b));
    if total > budget {
        return Err(Error::budget("scheme-count", total, budget));
    }
    let mut out = Vec::with_capacity(total as usize);
    for f in &frames {
        let results = (f.kept.len() as u128).pow(k as u32);
        for sel in 0..results {
            let mut x = sel;
            let result: Vec<ConstRef> = (0..k)
                .map(|_| {
                    let r = f.kept[(x % f.kept.len() as u128) as usize];
                    x /= f.kept.len() as u128;
                    r
                })
                .collect();
            for bits in 0u128..(1u128 << f.free.len()) {
                let mut s = f.base.clone();
                s.result = result.clone();
                for (b, (p, pat)) in f.free.iter().enumerate() {
                    let v = bits >> b & 1 == 1;
                    if v != pat.union_value(*p) {
                        s.tables[*p].overrides.insert(pat.clone(), v);
                    }
                }
                s.name = Some(format!("e{}", out.len()));
                out.push(s);
            }
        }
    }
    Ok(out)
}
