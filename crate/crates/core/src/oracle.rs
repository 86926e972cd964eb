//! Brute-force ground truth: MSO formulas, their evaluation on finite
//! structures, spectra by exhaustive model search and random sentences.
//!
//! Formula syntax (prefix, parenthesized):
//!
//! ```text
//! f := true | false
//!    | (R t...)            relation by predicate name
//!    | (= t t)
//!    | (in S t)            S a set variable or P<j> for a given set
//!    | (not f) | (and f...) | (or f...) | (imp f f) | (iff f f)
//!    | (exists x f) | (forall x f) | (existsS X f) | (forallS X f)
//! t := c<k> (constant) | identifier (first-order variable)
//! ```

use std::collections::BTreeSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::structures::{Structure, Vocabulary};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Var(String),
    Const(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum SetRef {
    Var(String),
    Given(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    Bool(bool),
    Atom(String, Vec<Term>),
    Eq(Term, Term),
    In(SetRef, Term),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Imp(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
    Exists(String, Box<Formula>),
    Forall(String, Box<Formula>),
    ExistsSet(String, Box<Formula>),
    ForallSet(String, Box<Formula>),
}

/// Default limit on `size × nested set quantifiers` for [`eval`].
pub const DEFAULT_EVAL_BITS: usize = 32;
/// Default limit on search nodes for [`spectrum_bruteforce`].
pub const DEFAULT_SEARCH_NODES: u64 = 50_000_000;

impl Formula {
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn exists(x: &str, f: Formula) -> Formula {
        Formula::Exists(x.into(), Box::new(f))
    }

    pub fn forall(x: &str, f: Formula) -> Formula {
        Formula::Forall(x.into(), Box::new(f))
    }

    pub fn imp(a: Formula, b: Formula) -> Formula {
        Formula::Imp(Box::new(a), Box::new(b))
    }

    pub fn quantifier_depth(&self) -> usize {
        match self {
            Formula::Bool(_) | Formula::Atom(..) | Formula::Eq(..) | Formula::In(..) => 0,
            Formula::Not(f) => f.quantifier_depth(),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().map(Formula::quantifier_depth).max().unwrap_or(0),
            Formula::Imp(a, b) | Formula::Iff(a, b) => a.quantifier_depth().max(b.quantifier_depth()),
            Formula::Exists(_, f) | Formula::Forall(_, f) | Formula::ExistsSet(_, f) | Formula::ForallSet(_, f) => {
                1 + f.quantifier_depth()
            }
        }
    }

    /// Deepest nesting of set quantifiers.
    pub fn set_depth(&self) -> usize {
        match self {
            Formula::Bool(_) | Formula::Atom(..) | Formula::Eq(..) | Formula::In(..) => 0,
            Formula::Not(f) | Formula::Exists(_, f) | Formula::Forall(_, f) => f.set_depth(),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().map(Formula::set_depth).max().unwrap_or(0),
            Formula::Imp(a, b) | Formula::Iff(a, b) => a.set_depth().max(b.set_depth()),
            Formula::ExistsSet(_, f) | Formula::ForallSet(_, f) => 1 + f.set_depth(),
        }
    }

    /// Free first-order and set variables.
    pub fn free_vars(&self) -> BTreeSet<String> {
        fn term(t: &Term, bound: &[&str], out: &mut BTreeSet<String>) {
            if let Term::Var(v) = t {
                if !bound.contains(&v.as_str()) {
                    out.insert(v.clone());
                }
            }
        }
        fn go<'a>(f: &'a Formula, bound: &mut Vec<&'a str>, out: &mut BTreeSet<String>) {
            match f {
                Formula::Bool(_) => {}
                Formula::Atom(_, ts) => ts.iter().for_each(|t| term(t, bound, out)),
                Formula::Eq(a, b) => {
                    term(a, bound, out);
                    term(b, bound, out);
                }
                Formula::In(s, t) => {
                    if let SetRef::Var(v) = s {
                        if !bound.contains(&v.as_str()) {
                            out.insert(v.clone());
                        }
                    }
                    term(t, bound, out);
                }
                Formula::Not(g) => go(g, bound, out),
                Formula::And(gs) | Formula::Or(gs) => gs.iter().for_each(|g| go(g, bound, out)),
                Formula::Imp(a, b) | Formula::Iff(a, b) => {
                    go(a, bound, out);
                    go(b, bound, out);
                }
                Formula::Exists(x, g) | Formula::Forall(x, g) | Formula::ExistsSet(x, g) | Formula::ForallSet(x, g) => {
                    bound.push(x);
                    go(g, bound, out);
                    bound.pop();
                }
            }
        }
        let mut out = BTreeSet::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn parse(text: &str) -> Result<Formula> {
        let tokens = tokenize(text);
        let mut pos = 0;
        let f = parse_formula(&tokens, &mut pos)?;
        if pos != tokens.len() {
            return Err(Error::parse(0, format!("trailing input at token {}", pos + 1)));
        }
        Ok(f)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Const(c) => write!(f, "c{c}"),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Bool(b) => write!(f, "{b}"),
            Formula::Atom(p, ts) => {
                write!(f, "({p}")?;
                for t in ts {
                    write!(f, " {t}")?;
                }
                write!(f, ")")
            }
            Formula::Eq(a, b) => write!(f, "(= {a} {b})"),
            Formula::In(SetRef::Var(s), t) => write!(f, "(in {s} {t})"),
            Formula::In(SetRef::Given(j), t) => write!(f, "(in P{j} {t})"),
            Formula::Not(g) => write!(f, "(not {g})"),
            Formula::And(gs) | Formula::Or(gs) => {
                write!(f, "({}", if matches!(self, Formula::And(_)) { "and" } else { "or" })?;
                for g in gs {
                    write!(f, " {g}")?;
                }
                write!(f, ")")
            }
            Formula::Imp(a, b) => write!(f, "(imp {a} {b})"),
            Formula::Iff(a, b) => write!(f, "(iff {a} {b})"),
            Formula::Exists(x, g) => write!(f, "(exists {x} {g})"),
            Formula::Forall(x, g) => write!(f, "(forall {x} {g})"),
            Formula::ExistsSet(x, g) => write!(f, "(existsS {x} {g})"),
            Formula::ForallSet(x, g) => write!(f, "(forallS {x} {g})"),
        }
    }
}

fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        match ch {
            '(' | ')' => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(ch.to_string());
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn given_set(name: &str) -> Option<usize> {
    name.strip_prefix('P').and_then(|d| d.parse().ok())
}

fn parse_term(tok: &str) -> Result<Term> {
    if tok == "(" || tok == ")" {
        return Err(Error::parse(0, "expected a term"));
    }
    if let Some(k) = tok.strip_prefix('c').and_then(|d| d.parse().ok()) {
        return Ok(Term::Const(k));
    }
    Ok(Term::Var(tok.to_string()))
}

fn parse_formula(tokens: &[String], pos: &mut usize) -> Result<Formula> {
    let err = |m: &str| Error::parse(0, m.to_string());
    let next = |pos: &mut usize| -> Result<&str> {
        let t = tokens.get(*pos).ok_or_else(|| Error::parse(0, "unexpected end of formula"))?;
        *pos += 1;
        Ok(t.as_str())
    };
    let tok = next(pos)?;
    match tok {
        "true" => return Ok(Formula::Bool(true)),
        "false" => return Ok(Formula::Bool(false)),
        "(" => {}
        other => return Err(err(&format!("unexpected `{other}`"))),
    }
    let head = next(pos)?.to_string();
    let close = |pos: &mut usize| -> Result<()> {
        match tokens.get(*pos).map(String::as_str) {
            Some(")") => {
                *pos += 1;
                Ok(())
            }
            _ => Err(Error::parse(0, "expected `)`")),
        }
    };
    let f = match head.as_str() {
        "not" => Formula::not(parse_formula(tokens, pos)?),
        "and" | "or" => {
            let mut gs = Vec::new();
            while tokens.get(*pos).map(String::as_str) != Some(")") {
                if *pos >= tokens.len() {
                    return Err(err("unexpected end of formula"));
                }
                gs.push(parse_formula(tokens, pos)?);
            }
            if head == "and" {
                Formula::And(gs)
            } else {
                Formula::Or(gs)
            }
        }
        "imp" | "iff" => {
            let a = Box::new(parse_formula(tokens, pos)?);
            let b = Box::new(parse_formula(tokens, pos)?);
            if head == "imp" {
                Formula::Imp(a, b)
            } else {
                Formula::Iff(a, b)
            }
        }
        "exists" | "forall" | "existsS" | "forallS" => {
            let x = next(pos)?.to_string();
            if x == "(" || x == ")" || given_set(&x).is_some() || matches!(parse_term(&x)?, Term::Const(_)) {
                return Err(err(&format!("cannot bind `{x}`")));
            }
            let g = Box::new(parse_formula(tokens, pos)?);
            match head.as_str() {
                "exists" => Formula::Exists(x, g),
                "forall" => Formula::Forall(x, g),
                "existsS" => Formula::ExistsSet(x, g),
                _ => Formula::ForallSet(x, g),
            }
        }
        "=" => {
            let a = parse_term(next(pos)?)?;
            let b = parse_term(next(pos)?)?;
            Formula::Eq(a, b)
        }
        "in" => {
            let s = next(pos)?;
            let s = match given_set(s) {
                Some(j) => SetRef::Given(j),
                None => SetRef::Var(s.to_string()),
            };
            Formula::In(s, parse_term(next(pos)?)?)
        }
        "(" | ")" => return Err(err("expected an operator")),
        pred => {
            let mut ts = Vec::new();
            while tokens.get(*pos).map(String::as_str) != Some(")") {
                if *pos >= tokens.len() {
                    return Err(err("unexpected end of formula"));
                }
                ts.push(parse_term(next(pos)?)?);
            }
            Formula::Atom(pred.to_string(), ts)
        }
    };
    close(pos)?;
    Ok(f)
}

/// Kleene truth values for evaluation over partial structures.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Tri {
    False,
    Unknown,
    True,
}

impl Tri {
    fn of(b: bool) -> Tri {
        if b {
            Tri::True
        } else {
            Tri::False
        }
    }

    fn not(self) -> Tri {
        match self {
            Tri::False => Tri::True,
            Tri::Unknown => Tri::Unknown,
            Tri::True => Tri::False,
        }
    }
}

/// Something formulas can be evaluated on; atoms may be undetermined.
trait Interp {
    fn size(&self) -> usize;
    fn constant(&self, k: usize) -> usize;
    fn holds(&self, pred: usize, tuple: &[usize]) -> Tri;
    fn in_given(&self, set: usize, e: usize) -> Tri;
}

impl Interp for Structure {
    fn size(&self) -> usize {
        Structure::size(self)
    }

    fn constant(&self, k: usize) -> usize {
        self.constants()[k]
    }

    fn holds(&self, pred: usize, tuple: &[usize]) -> Tri {
        Tri::of(Structure::holds(self, pred, tuple))
    }

    fn in_given(&self, set: usize, e: usize) -> Tri {
        Tri::of(self.in_set(set, e))
    }
}

/// A formula with names resolved to indices.
enum Compiled {
    Bool(bool),
    Atom(usize, Vec<CTerm>),
    Eq(CTerm, CTerm),
    InVar(usize, CTerm),
    InGiven(usize, CTerm),
    Not(Box<Compiled>),
    And(Vec<Compiled>),
    Or(Vec<Compiled>),
    Imp(Box<Compiled>, Box<Compiled>),
    Iff(Box<Compiled>, Box<Compiled>),
    Exists(usize, Box<Compiled>),
    Forall(usize, Box<Compiled>),
    ExistsSet(usize, Box<Compiled>),
    ForallSet(usize, Box<Compiled>),
}

#[derive(Clone, Copy)]
enum CTerm {
    Var(usize),
    Const(usize),
}

/// Variable environment for first-order and set variables.
#[derive(Clone, Debug, Default)]
pub struct Env {
    pub elements: Vec<(String, usize)>,
    pub sets: Vec<(String, BTreeSet<usize>)>,
}

struct Compiler<'a> {
    vocab: &'a Vocabulary,
    fo: Vec<String>,
    so: Vec<String>,
}

impl Compiler<'_> {
    fn term(&self, t: &Term) -> Result<CTerm> {
        match t {
            Term::Const(k) if *k < self.vocab.consts() => Ok(CTerm::Const(*k)),
            Term::Const(k) => Err(Error::Signature(format!("constant c{k} not in the vocabulary"))),
            Term::Var(v) => self
                .fo
                .iter()
                .rposition(|x| x == v)
                .map(CTerm::Var)
                .ok_or_else(|| Error::Unbound(v.clone())),
        }
    }

    fn compile(&mut self, f: &Formula) -> Result<Compiled> {
        Ok(match f {
            Formula::Bool(b) => Compiled::Bool(*b),
            Formula::Atom(p, ts) => {
                let idx = self
                    .vocab
                    .predicate_index(p)
                    .ok_or_else(|| Error::Signature(format!("unknown predicate {p}")))?;
                let arity = self.vocab.predicates()[idx].arity;
                if ts.len() != arity {
                    return Err(Error::Signature(format!("{p} takes {arity} arguments")));
                }
                Compiled::Atom(idx, ts.iter().map(|t| self.term(t)).collect::<Result<_>>()?)
            }
            Formula::Eq(a, b) => Compiled::Eq(self.term(a)?, self.term(b)?),
            Formula::In(SetRef::Given(j), t) => {
                if *j >= self.vocab.sets() {
                    return Err(Error::Signature(format!("set P{j} not in the vocabulary")));
                }
                Compiled::InGiven(*j, self.term(t)?)
            }
            Formula::In(SetRef::Var(s), t) => {
                let i = self.so.iter().rposition(|x| x == s).ok_or_else(|| Error::Unbound(s.clone()))?;
                Compiled::InVar(i, self.term(t)?)
            }
            Formula::Not(g) => Compiled::Not(Box::new(self.compile(g)?)),
            Formula::And(gs) => Compiled::And(gs.iter().map(|g| self.compile(g)).collect::<Result<_>>()?),
            Formula::Or(gs) => Compiled::Or(gs.iter().map(|g| self.compile(g)).collect::<Result<_>>()?),
            Formula::Imp(a, b) => Compiled::Imp(Box::new(self.compile(a)?), Box::new(self.compile(b)?)),
            Formula::Iff(a, b) => Compiled::Iff(Box::new(self.compile(a)?), Box::new(self.compile(b)?)),
            Formula::Exists(x, g) | Formula::Forall(x, g) => {
                self.fo.push(x.clone());
                let slot = self.fo.len() - 1;
                let body = Box::new(self.compile(g)?);
                self.fo.pop();
                if matches!(f, Formula::Exists(..)) {
                    Compiled::Exists(slot, body)
                } else {
                    Compiled::Forall(slot, body)
                }
            }
            Formula::ExistsSet(x, g) | Formula::ForallSet(x, g) => {
                self.so.push(x.clone());
                let slot = self.so.len() - 1;
                let body = Box::new(self.compile(g)?);
                self.so.pop();
                if matches!(f, Formula::ExistsSet(..)) {
                    Compiled::ExistsSet(slot, body)
                } else {
                    Compiled::ForallSet(slot, body)
                }
            }
        })
    }
}

struct Evaluator<'a, I: Interp> {
    m: &'a I,
    fo: Vec<usize>,
    so: Vec<u64>,
    buf: Vec<usize>,
}

impl<I: Interp> Evaluator<'_, I> {
    fn term(&self, t: CTerm) -> usize {
        match t {
            CTerm::Var(i) => self.fo[i],
            CTerm::Const(k) => self.m.constant(k),
        }
    }

    fn eval(&mut self, f: &Compiled) -> Tri {
        match f {
            Compiled::Bool(b) => Tri::of(*b),
            Compiled::Atom(p, ts) => {
                let mut tuple = std::mem::take(&mut self.buf);
                tuple.clear();
                tuple.extend(ts.iter().map(|&t| self.term(t)));
                let r = self.m.holds(*p, &tuple);
                self.buf = tuple;
                r
            }
            Compiled::Eq(a, b) => Tri::of(self.term(*a) == self.term(*b)),
            Compiled::InVar(i, t) => Tri::of(self.so[*i] >> self.term(*t) & 1 == 1),
            Compiled::InGiven(j, t) => self.m.in_given(*j, self.term(*t)),
            Compiled::Not(g) => self.eval(g).not(),
            Compiled::And(gs) => {
                let mut acc = Tri::True;
                for g in gs {
                    match self.eval(g) {
                        Tri::False => return Tri::False,
                        Tri::Unknown => acc = Tri::Unknown,
                        Tri::True => {}
                    }
                }
                acc
            }
            Compiled::Or(gs) => {
                let mut acc = Tri::False;
                for g in gs {
                    match self.eval(g) {
                        Tri::True => return Tri::True,
                        Tri::Unknown => acc = Tri::Unknown,
                        Tri::False => {}
                    }
                }
                acc
            }
            Compiled::Imp(a, b) => {
                let x = self.eval(a);
                if x == Tri::False {
                    return Tri::True;
                }
                let y = self.eval(b);
                match (x, y) {
                    (_, Tri::True) => Tri::True,
                    (Tri::True, Tri::False) => Tri::False,
                    _ => Tri::Unknown,
                }
            }
            Compiled::Iff(a, b) => match (self.eval(a), self.eval(b)) {
                (Tri::Unknown, _) | (_, Tri::Unknown) => Tri::Unknown,
                (x, y) => Tri::of(x == y),
            },
            Compiled::Exists(slot, g) | Compiled::Forall(slot, g) => {
                let exists = matches!(f, Compiled::Exists(..));
                let (stop, mut acc) = if exists { (Tri::True, Tri::False) } else { (Tri::False, Tri::True) };
                self.fo.truncate(*slot);
                self.fo.push(0);
                for e in 0..self.m.size() {
                    self.fo[*slot] = e;
                    let r = self.eval(g);
                    if r == stop {
                        acc = stop;
                        break;
                    }
                    if r == Tri::Unknown {
                        acc = Tri::Unknown;
                    }
                }
                self.fo.truncate(*slot);
                acc
            }
            Compiled::ExistsSet(slot, g) | Compiled::ForallSet(slot, g) => {
                let exists = matches!(f, Compiled::ExistsSet(..));
                let (stop, mut acc) = if exists { (Tri::True, Tri::False) } else { (Tri::False, Tri::True) };
                self.so.truncate(*slot);
                self.so.push(0);
                for mask in 0..1u64 << self.m.size() {
                    self.so[*slot] = mask;
                    let r = self.eval(g);
                    if r == stop {
                        acc = stop;
                        break;
                    }
                    if r == Tri::Unknown {
                        acc = Tri::Unknown;
                    }
                }
                self.so.truncate(*slot);
                acc
            }
        }
    }
}

fn check_bits(size: usize, f: &Formula, limit: usize) -> Result<()> {
    let depth = f.set_depth();
    if depth > 0 && size >= 64 {
        return Err(Error::budget("eval", (size * depth) as u128, limit as u128));
    }
    if size * depth > limit {
        return Err(Error::budget("eval", (size * depth) as u128, limit as u128));
    }
    Ok(())
}

/// Standard satisfaction `M, env ⊨ φ` by exhaustive assignment enumeration.
pub fn eval(m: &Structure, f: &Formula, env: &Env) -> Result<bool> {
    eval_with(m, f, env, DEFAULT_EVAL_BITS)
}

pub fn eval_with(m: &Structure, f: &Formula, env: &Env, eval_bits: usize) -> Result<bool> {
    check_bits(m.size(), f, eval_bits)?;
    let mut c = Compiler {
        vocab: m.vocab(),
        fo: env.elements.iter().map(|(n, _)| n.clone()).collect(),
        so: env.sets.iter().map(|(n, _)| n.clone()).collect(),
    };
    let compiled = c.compile(f)?;
    for (n, e) in &env.elements {
        if *e >= m.size() {
            return Err(Error::Invalid(format!("{n} = {e} is outside the universe")));
        }
    }
    let mut ev = Evaluator {
        m,
        fo: env.elements.iter().map(|(_, e)| *e).collect(),
        so: env
            .sets
            .iter()
            .map(|(_, s)| s.iter().filter(|&&e| e < 64).fold(0u64, |acc, &e| acc | 1 << e))
            .collect(),
        buf: Vec::new(),
    };
    Ok(ev.eval(&compiled) == Tri::True)
}

/// Truth of a sentence.
pub fn satisfies(m: &Structure, f: &Formula) -> Result<bool> {
    eval(m, f, &Env::default())
}

/// A structure under construction: every atom is true, false or open.
struct Partial {
    size: usize,
    consts: Vec<usize>,
    arities: Vec<usize>,
    rel: Vec<Vec<Option<bool>>>,
    sets: Vec<Vec<Option<bool>>>,
}

impl Partial {
    fn code(&self, tuple: &[usize]) -> usize {
        tuple.iter().fold(0, |acc, &e| acc * self.size + e)
    }
}

impl Interp for Partial {
    fn size(&self) -> usize {
        self.size
    }

    fn constant(&self, k: usize) -> usize {
        self.consts[k]
    }

    fn holds(&self, pred: usize, tuple: &[usize]) -> Tri {
        match self.rel[pred][self.code(tuple)] {
            None => Tri::Unknown,
            Some(b) => Tri::of(b),
        }
    }

    fn in_given(&self, set: usize, e: usize) -> Tri {
        match self.sets[set][e] {
            None => Tri::Unknown,
            Some(b) => Tri::of(b),
        }
    }
}

#[derive(Clone, Copy)]
enum Slot {
    Rel(usize, usize),
    Set(usize, usize),
}

struct Search<'a> {
    vocab: &'a Vocabulary,
    f: &'a Compiled,
    order: Vec<Slot>,
    nodes: u64,
    limit: u64,
}

impl Search<'_> {
    fn run(&mut self, p: &mut Partial, at: usize) -> Result<Option<Structure>> {
        self.nodes += 1;
        if self.nodes > self.limit {
            return Err(Error::budget("oracle-search", self.nodes as u128, self.limit as u128));
        }
        let mut ev = Evaluator {
            m: &*p,
            fo: Vec::new(),
            so: Vec::new(),
            buf: Vec::new(),
        };
        match ev.eval(self.f) {
            Tri::False => return Ok(None),
            Tri::True => return Ok(Some(complete(self.vocab, p))),
            Tri::Unknown => {}
        }
        if at == self.order.len() {
            return Ok(None);
        }
        for v in [false, true] {
            set_slot(p, self.order[at], Some(v));
            if let Some(m) = self.run(p, at + 1)? {
                return Ok(Some(m));
            }
        }
        set_slot(p, self.order[at], None);
        Ok(None)
    }
}

fn set_slot(p: &mut Partial, s: Slot, v: Option<bool>) {
    match s {
        Slot::Rel(r, i) => p.rel[r][i] = v,
        Slot::Set(j, e) => p.sets[j][e] = v,
    }
}

/// Fill open atoms with false.
fn complete(vocab: &Vocabulary, p: &Partial) -> Structure {
    let mut relations = Vec::new();
    for (r, vals) in p.rel.iter().enumerate() {
        let mut rel = BTreeSet::new();
        for (code, v) in vals.iter().enumerate() {
            if *v == Some(true) {
                let mut tuple = vec![0; p.arities[r]];
                let mut c = code;
                for slot in tuple.iter_mut().rev() {
                    *slot = c % p.size;
                    c /= p.size;
                }
                rel.insert(tuple);
            }
        }
        relations.push(rel);
    }
    let sets = p
        .sets
        .iter()
        .map(|vals| (0..p.size).filter(|&e| vals[e] == Some(true)).collect())
        .collect();
    Structure::new(vocab.clone(), p.size, relations, p.consts.clone(), sets).expect("search builds in-range atoms")
}

/// A model of the sentence with exactly `size` elements, if any, found by
/// exhaustive search over atom assignments. Branches are cut only when the
/// partial assignment already falsifies the sentence under every completion.
pub fn find_model(f: &Formula, vocab: &Vocabulary, size: usize, node_limit: u64) -> Result<Option<Structure>> {
    if size == 0 {
        return Err(Error::Invalid("structures have at least one element".into()));
    }
    let fv = f.free_vars();
    if !fv.is_empty() {
        return Err(Error::Unbound(fv.into_iter().next().unwrap()));
    }
    check_bits(size, f, DEFAULT_EVAL_BITS.max(size * f.set_depth()))?;
    let compiled = Compiler {
        vocab,
        fo: Vec::new(),
        so: Vec::new(),
    }
    .compile(f)?;
    let arities = vocab.arities();
    // atoms ordered so that the structure on {0..i} is finished before i+1 appears
    let mut order = Vec::new();
    for (r, &a) in arities.iter().enumerate() {
        for code in 0..size.pow(a as u32) {
            let mut max = 0;
            let mut c = code;
            for _ in 0..a {
                max = max.max(c % size);
                c /= size;
            }
            order.push((max, 0, r, code, Slot::Rel(r, code)));
        }
    }
    for j in 0..vocab.sets() {
        for e in 0..size {
            order.push((e, 1, j, e, Slot::Set(j, e)));
        }
    }
    order.sort_by_key(|&(m, kind, r, c, _)| (m, kind, r, c));
    let order: Vec<Slot> = order.into_iter().map(|x| x.4).collect();
    let mut search = Search {
        vocab,
        f: &compiled,
        order,
        nodes: 0,
        limit: node_limit,
    };
    let k = vocab.consts();
    for ci in 0..size.pow(k as u32) {
        let mut consts = vec![0; k];
        let mut c = ci;
        for slot in consts.iter_mut() {
            *slot = c % size;
            c /= size;
        }
        let mut p = Partial {
            size,
            consts,
            arities: arities.clone(),
            rel: arities.iter().map(|&a| vec![None; size.pow(a as u32)]).collect(),
            sets: vec![vec![None; size]; vocab.sets()],
        };
        if let Some(m) = search.run(&mut p, 0)? {
            return Ok(Some(m));
        }
    }
    Ok(None)
}

/// `{ s ≤ max_size : some structure with s elements satisfies φ }`, sizes from 1.
pub fn spectrum_bruteforce(f: &Formula, vocab: &Vocabulary, max_size: usize, node_limit: u64) -> Result<BTreeSet<usize>> {
    let mut out = BTreeSet::new();
    for s in 1..=max_size {
        if let Some(m) = find_model(f, vocab, s, node_limit)? {
            debug_assert!(satisfies(&m, f).unwrap_or(false));
            out.insert(s);
        }
    }
    Ok(out)
}

/// A pseudorandom sentence of quantifier depth at most `depth`.
pub fn random_sentence(vocab: &Vocabulary, depth: usize, seed: u64) -> Formula {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Generator {
        vocab,
        rng: &mut rng,
        fo: Vec::new(),
        so: Vec::new(),
        fresh: 0,
    };
    g.formula(depth, 12)
}

struct Generator<'a> {
    vocab: &'a Vocabulary,
    rng: &'a mut ChaCha8Rng,
    fo: Vec<String>,
    so: Vec<String>,
    fresh: usize,
}

impl Generator<'_> {
    fn term(&mut self) -> Option<Term> {
        let n = self.fo.len() + self.vocab.consts();
        if n == 0 {
            return None;
        }
        let i = self.rng.gen_range(0..n);
        Some(if i < self.fo.len() {
            Term::Var(self.fo[i].clone())
        } else {
            Term::Const(i - self.fo.len())
        })
    }

    fn atom(&mut self) -> Formula {
        if self.fo.is_empty() && self.vocab.consts() == 0 {
            return Formula::Bool(self.rng.gen_bool(0.5));
        }
        let preds = self.vocab.predicates().len();
        let set_choices = self.vocab.sets() + self.so.len();
        loop {
            match self.rng.gen_range(0..3) {
                0 if preds > 0 => {
                    let p = self.rng.gen_range(0..preds);
                    let pred = &self.vocab.predicates()[p];
                    let name = pred.name.clone();
                    let args = (0..pred.arity).map(|_| self.term().unwrap()).collect();
                    return Formula::Atom(name, args);
                }
                1 => {
                    let a = self.term().unwrap();
                    let b = self.term().unwrap();
                    return Formula::Eq(a, b);
                }
                2 if set_choices > 0 => {
                    let i = self.rng.gen_range(0..set_choices);
                    let s = if i < self.vocab.sets() {
                        SetRef::Given(i)
                    } else {
                        SetRef::Var(self.so[i - self.vocab.sets()].clone())
                    };
                    return Formula::In(s, self.term().unwrap());
                }
                _ => {}
            }
        }
    }

    fn formula(&mut self, depth: usize, budget: usize) -> Formula {
        if budget <= 1 || self.rng.gen_bool(0.25) {
            return self.atom();
        }
        let choice = self.rng.gen_range(0..if depth > 0 { 9 } else { 5 });
        match choice {
            0 => Formula::not(self.formula(depth, budget - 1)),
            1 | 2 => {
                let a = self.formula(depth, budget / 2);
                let b = self.formula(depth, budget / 2);
                if choice == 1 {
                    Formula::And(vec![a, b])
                } else {
                    Formula::Or(vec![a, b])
                }
            }
            3 => {
                let a = self.formula(depth, budget / 2);
                let b = self.formula(depth, budget / 2);
                Formula::imp(a, b)
            }
            4 => Formula::Iff(Box::new(self.formula(depth, budget / 2)), Box::new(self.formula(depth, budget / 2))),
            5 | 6 => {
                self.fresh += 1;
                let x = format!("x{}", self.fresh);
                self.fo.push(x.clone());
                let body = Box::new(self.formula(depth - 1, budget - 1));
                self.fo.pop();
                if choice == 5 {
                    Formula::Exists(x, body)
                } else {
                    Formula::Forall(x, body)
                }
            }
            _ => {
                self.fresh += 1;
                let x = format!("X{}", self.fresh);
                self.so.push(x.clone());
                let body = Box::new(self.formula(depth - 1, budget - 1));
                self.so.pop();
                if choice == 7 {
                    Formula::ExistsSet(x, body)
                } else {
                    Formula::ForallSet(x, body)
                }
            }
        }
    }
}

/// Evaluate `count` random sentences of depth ≤ `depth` on both structures;
/// the first sentence they disagree on, if any.
pub fn theories_equal_on_sentences(m1: &Structure, m2: &Structure, depth: usize, count: usize, seed: u64) -> Result<Option<Formula>> {
    if !m1.vocab().same_tau(m2.vocab()) || m1.constants().len() != m2.constants().len() {
        return Err(Error::Signature("structures have different vocabularies".into()));
    }
    for i in 0..count {
        let f = random_sentence(m1.vocab(), depth, seed.wrapping_add(i as u64));
        if satisfies(m1, &f)? != satisfies(m2, &f)? {
            return Ok(Some(f));
        }
    }
    Ok(None)
}

/// Every vertex has exactly one neighbor; no loops; symmetric.
pub fn perfect_matching_sentence() -> Formula {
    Formula::parse(
        "(and (forall x (not (E x x))) \
              (forall x (forall y (imp (E x y) (E y x)))) \
              (forall x (exists y (and (E x y) (forall z (imp (E x z) (= z y)))))))",
    )
    .unwrap()
}

/// Proper 2-colorability of the edge relation.
pub fn two_colorable_sentence() -> Formula {
    Formula::parse("(existsS X (forall x (forall y (imp (E x y) (iff (in X x) (not (in X y)))))))").unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(n: usize, edges: &[(usize, usize)]) -> Structure {
        let mut all = Vec::new();
        for &(a, b) in edges {
            all.push((a, b));
            all.push((b, a));
        }
        Structure::graph(n, &all).unwrap()
    }

    #[test]
    fn parse_round_trip() {
        let texts = [
            "(existsS X (forall x (imp (E x y) (in X x))))",
            "(and true (or (= c0 x) (in P1 c0)) (iff false (not (E x x))))",
            "(forallS Y (exists z (in Y z)))",
        ];
        for t in texts {
            let f = Formula::parse(t).unwrap();
            assert_eq!(f.to_string(), t);
        }
        assert!(Formula::parse("(exists c0 true)").is_err());
        assert!(Formula::parse("(and true").is_err());
        assert_eq!(Formula::parse(texts[0]).unwrap().quantifier_depth(), 2);
    }

    #[test]
    fn small_truths() {
        let nonempty = Formula::parse("(exists x (= x x))").unwrap();
        assert!(satisfies(&g(1, &[]), &nonempty).unwrap());
        let edge = Formula::parse("(exists x (exists y (E x y)))").unwrap();
        assert!(satisfies(&g(2, &[(0, 1)]), &edge).unwrap());
        assert!(!satisfies(&g(2, &[]), &edge).unwrap());
        let two = two_colorable_sentence();
        assert!(!satisfies(&g(3, &[(0, 1), (1, 2), (2, 0)]), &two).unwrap());
        assert!(satisfies(&g(3, &[(0, 1), (1, 2)]), &two).unwrap());
        let free = Formula::parse("(E x x)").unwrap();
        assert!(matches!(satisfies(&g(1, &[]), &free), Err(Error::Unbound(_))));
    }

    #[test]
    fn matching_spectrum_is_even() {
        let s = spectrum_bruteforce(&perfect_matching_sentence(), &Vocabulary::graphs(), 6, DEFAULT_SEARCH_NODES).unwrap();
        assert_eq!(s.into_iter().collect::<Vec<_>>(), vec![2, 4, 6]);
        let loops = Formula::parse("(and (exists x (= x x)) (forall x (E x x)))").unwrap();
        let s = spectrum_bruteforce(&loops, &Vocabulary::graphs(), 4, DEFAULT_SEARCH_NODES).unwrap();
        assert_eq!(s.len(), 4);
    }

    #[test]
    fn random_sentences_are_deterministic_and_shallow() {
        let tau = Vocabulary::graphs().with_consts(1);
        for seed in 0..200 {
            let f = random_sentence(&tau, 1, seed);
            assert_eq!(f, random_sentence(&tau, 1, seed));
            assert!(f.quantifier_depth() <= 1);
            assert!(f.free_vars().is_empty());
            assert_eq!(random_sentence(&tau, 0, seed).quantifier_depth(), 0);
        }
    }
}
