//! Complete quantifier-free diagrams.
//!
//! A diagram describes a tuple of `vars` variables together with the `k`
//! constants: which terms are equal, which atomic relation facts hold among
//! the distinct elements, and which set predicates each element belongs to.
//! Equal terms share a class; classes are numbered in order of first
//! occurrence, so structurally equal diagrams are equal values.

use std::fmt::{self, Write as _};

use crate::error::{Error, Result};
use crate::structures::Vocabulary;

pub const MAX_TERMS: usize = 15;

/// A reference to one term of a diagram.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(u8),
    Const(u8),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Diagram {
    vars: u8,
    classes: Vec<u8>,
    colors: Vec<u32>,
    facts: Vec<u32>,
}

fn encode_fact(pred: usize, classes: &[u8]) -> u32 {
    let mut packed = 0u32;
    for &c in classes {
        packed = packed << 4 | c as u32;
    }
    (pred as u32) << 24 | packed
}

/// Iterate all tuples over `0..n` of length `arity` in lexicographic order.
pub(crate) fn for_each_tuple(n: usize, arity: usize, mut f: impl FnMut(&[u8])) {
    if n == 0 && arity > 0 {
        return;
    }
    let mut cur = vec![0u8; arity];
    loop {
        f(&cur);
        let mut i = arity;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            cur[i] += 1;
            if (cur[i] as usize) < n {
                break;
            }
            cur[i] = 0;
        }
    }
}

/// Restricted-growth numbering of `keys`: equal keys get equal numbers,
/// numbers in order of first occurrence. Returns the numbering and one
/// representative index per class.
pub(crate) fn rgs<K: PartialEq>(keys: &[K]) -> (Vec<u8>, Vec<usize>) {
    let mut classes = Vec::with_capacity(keys.len());
    let mut reps: Vec<usize> = Vec::new();
    for (i, k) in keys.iter().enumerate() {
        match reps.iter().position(|&r| keys[r] == *k) {
            Some(c) => classes.push(c as u8),
            None => {
                classes.push(reps.len() as u8);
                reps.push(i);
            }
        }
    }
    (classes, reps)
}

impl Diagram {
    /// Build the diagram of `terms` (the first `vars` are variables, the
    /// rest constants). `holds(p, tuple)` decides relation facts on term
    /// keys and `color(key)` gives set memberships.
    pub fn build<K: PartialEq + Copy>(
        vars: usize,
        terms: &[K],
        arities: &[usize],
        mut holds: impl FnMut(usize, &[K]) -> bool,
        mut color: impl FnMut(K) -> u32,
    ) -> Diagram {
        assert!(terms.len() <= MAX_TERMS, "too many terms in a diagram");
        let (classes, reps) = rgs(terms);
        let rep_keys: Vec<K> = reps.iter().map(|&i| terms[i]).collect();
        let colors = rep_keys.iter().map(|&k| color(k)).collect();
        let mut facts = Vec::new();
        let mut buf: Vec<K> = Vec::new();
        for (p, &a) in arities.iter().enumerate() {
            for_each_tuple(rep_keys.len(), a, |t| {
                buf.clear();
                buf.extend(t.iter().map(|&c| rep_keys[c as usize]));
                if holds(p, &buf) {
                    facts.push(encode_fact(p, t));
                }
            });
        }
        facts.sort_unstable();
        Diagram {
            vars: vars as u8,
            classes,
            colors,
            facts,
        }
    }

    pub(crate) fn from_parts(vars: u8, classes: Vec<u8>, colors: Vec<u32>, mut facts: Vec<u32>) -> Diagram {
        facts.sort_unstable();
        facts.dedup();
        Diagram {
            vars,
            classes,
            colors,
            facts,
        }
    }

    pub fn vars(&self) -> usize {
        self.vars as usize
    }

    pub fn consts(&self) -> usize {
        self.classes.len() - self.vars as usize
    }

    pub fn class_count(&self) -> usize {
        self.colors.len()
    }

    pub fn class_of(&self, t: Term) -> usize {
        match t {
            Term::Var(i) => self.classes[i as usize] as usize,
            Term::Const(i) => self.classes[self.vars as usize + i as usize] as usize,
        }
    }

    pub fn var_class(&self, i: usize) -> usize {
        self.classes[i] as usize
    }

    pub fn const_class(&self, i: usize) -> usize {
        self.classes[self.vars as usize + i] as usize
    }

    /// Constant indices naming the given class.
    pub fn consts_in_class(&self, class: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.consts()).filter(move |&i| self.const_class(i) == class)
    }

    pub fn color(&self, class: usize) -> u32 {
        self.colors[class]
    }

    pub fn in_set(&self, class: usize, set: usize) -> bool {
        self.colors[class] >> set & 1 == 1
    }

    /// Number of set predicates actually used by some class.
    pub fn color_bits(&self) -> usize {
        let all = self.colors.iter().fold(0u32, |a, &c| a | c);
        (32 - all.leading_zeros()) as usize
    }

    pub fn has_fact(&self, pred: usize, classes: &[u8]) -> bool {
        self.facts.binary_search(&encode_fact(pred, classes)).is_ok()
    }

    pub fn fact_count(&self) -> usize {
        self.facts.len()
    }

    /// The diagram of the chosen terms (as new variables) with the same constants.
    pub fn project(&self, picks: &[Term], arities: &[usize]) -> Diagram {
        let mut keys: Vec<u8> = picks.iter().map(|&t| self.class_of(t) as u8).collect();
        keys.extend((0..self.consts()).map(|i| self.const_class(i) as u8));
        Diagram::build(
            picks.len(),
            &keys,
            arities,
            |p, t| self.has_fact(p, t),
            |c| self.colors[c as usize],
        )
    }

    /// The first `q` variables.
    pub fn prefix(&self, q: usize, arities: &[usize]) -> Diagram {
        let picks: Vec<Term> = (0..q as u8).map(Term::Var).collect();
        self.project(&picks, arities)
    }

    /// Same equalities and relation facts, new per-class colors.
    pub fn with_colors(&self, colors: Vec<u32>) -> Diagram {
        debug_assert_eq!(colors.len(), self.colors.len());
        Diagram {
            vars: self.vars,
            classes: self.classes.clone(),
            colors,
            facts: self.facts.clone(),
        }
    }

    /// The constants-only part.
    pub fn const_part(&self, arities: &[usize]) -> Diagram {
        self.project(&[], arities)
    }

    /// Forget the set predicates `P_m, P_{m+1}, ...`.
    pub fn restrict_sets(&self, m: usize) -> Diagram {
        let mask = if m >= 32 { u32::MAX } else { (1u32 << m) - 1 };
        Diagram {
            vars: self.vars,
            classes: self.classes.clone(),
            colors: self.colors.iter().map(|c| c & mask).collect(),
            facts: self.facts.clone(),
        }
    }

    /// Canonical byte form, used for digests.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.classes.len() + 4 * (self.colors.len() + self.facts.len()));
        out.push(b'D');
        out.push(self.vars);
        out.push(self.classes.len() as u8);
        out.extend_from_slice(&self.classes);
        out.extend_from_slice(&(self.colors.len() as u32).to_le_bytes());
        for c in &self.colors {
            out.extend_from_slice(&c.to_le_bytes());
        }
        out.extend_from_slice(&(self.facts.len() as u32).to_le_bytes());
        for f in &self.facts {
            out.extend_from_slice(&f.to_le_bytes());
        }
        out
    }

    /// Text form: `v2 eq=0.1.0 col=1.0 E(0,1) E(1,0)`.
    pub fn render(&self, vocab: &Vocabulary) -> String {
        let mut s = String::new();
        let join = |xs: &mut dyn Iterator<Item = String>| {
            let v: Vec<String> = xs.collect();
            if v.is_empty() {
                "-".to_string()
            } else {
                v.join(".")
            }
        };
        write!(s, "v{} eq={}", self.vars, join(&mut self.classes.iter().map(|c| c.to_string()))).unwrap();
        write!(s, " col={}", join(&mut self.colors.iter().map(|c| c.to_string()))).unwrap();
        for &f in &self.facts {
            let p = (f >> 24) as usize;
            let pred = &vocab.predicates()[p];
            let mut cls = Vec::with_capacity(pred.arity);
            for i in (0..pred.arity).rev() {
                cls.push(((f >> (4 * i)) & 0xf).to_string());
            }
            write!(s, " {}({})", pred.name, cls.join(",")).unwrap();
        }
        s
    }

    pub fn parse(text: &str, vocab: &Vocabulary) -> Result<Diagram> {
        let bad = |m: &str| Error::Invalid(format!("diagram `{text}`: {m}"));
        let mut toks = text.split_whitespace();
        let vars = toks
            .next()
            .and_then(|t| t.strip_prefix('v'))
            .and_then(|t| t.parse::<u8>().ok())
            .ok_or_else(|| bad("expected `v<vars>`"))?;
        let list = |tok: Option<&str>, key: &str| -> Result<Vec<u32>> {
            let body = tok
                .and_then(|t| t.strip_prefix(key))
                .ok_or_else(|| bad(&format!("expected `{key}...`")))?;
            if body == "-" {
                return Ok(vec![]);
            }
            body.split('.')
                .map(|x| x.parse::<u32>().map_err(|_| bad("bad number")))
                .collect()
        };
        let classes: Vec<u8> = list(toks.next(), "eq=")?.into_iter().map(|c| c as u8).collect();
        let colors = list(toks.next(), "col=")?;
        let (check, _) = rgs(&classes);
        if check != classes || classes.len() > MAX_TERMS || (vars as usize) > classes.len() {
            return Err(bad("class numbering is not canonical"));
        }
        let n_classes = classes.iter().map(|&c| c as usize + 1).max().unwrap_or(0);
        if colors.len() != n_classes {
            return Err(bad("one color per class expected"));
        }
        let mut facts = Vec::new();
        for tok in toks {
            let (name, rest) = tok.split_once('(').ok_or_else(|| bad("expected fact `R(..)`"))?;
            let args = rest.strip_suffix(')').ok_or_else(|| bad("unterminated fact"))?;
            let p = vocab.predicate_index(name).ok_or_else(|| bad("unknown predicate"))?;
            let cls = args
                .split(',')
                .map(|x| x.parse::<u8>().map_err(|_| bad("bad class")))
                .collect::<Result<Vec<u8>>>()?;
            if cls.len() != vocab.predicates()[p].arity || cls.iter().any(|&c| c as usize >= n_classes) {
                return Err(bad("fact does not fit the diagram"));
            }
            facts.push(encode_fact(p, &cls));
        }
        Ok(Diagram::from_parts(vars, classes, colors, facts))
    }

    /// Every diagram with `vars` variables and `consts` constants over the
    /// given arities and `sets` set predicates. With `distinct_vars` the
    /// variables are pairwise distinct (constants may still coincide with
    /// each other and with variables).
    pub fn enumerate(vars: usize, consts: usize, arities: &[usize], sets: usize, distinct_vars: bool) -> Vec<Diagram> {
        let mut out = Vec::new();
        let terms = vars + consts;
        for classes in all_rgs(terms) {
            if distinct_vars && classes[..vars].iter().enumerate().any(|(i, &c)| c as usize != i) {
                continue;
            }
            let n = classes.iter().map(|&c| c as usize + 1).max().unwrap_or(0);
            let mut atoms: Vec<u32> = Vec::new();
            for (p, &a) in arities.iter().enumerate() {
                for_each_tuple(n, a, |t| atoms.push(encode_fact(p, t)));
            }
            let color_bits = n * sets;
            let total = atoms.len() + color_bits;
            assert!(total < 32, "diagram space too large to enumerate");
            for mask in 0u64..(1u64 << total) {
                let facts: Vec<u32> = atoms
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .map(|(_, &f)| f)
                    .collect();
                let mut colors = vec![0u32; n];
                for (c, col) in colors.iter_mut().enumerate() {
                    for j in 0..sets {
                        if mask >> (atoms.len() + c * sets + j) & 1 == 1 {
                            *col |= 1 << j;
                        }
                    }
                }
                out.push(Diagram::from_parts(vars as u8, classes.clone(), colors, facts));
            }
        }
        out
    }

    /// Number of diagrams [`Diagram::enumerate`] would produce.
    pub fn count(vars: usize, consts: usize, arities: &[usize], sets: usize, distinct_vars: bool) -> u128 {
        all_rgs(vars + consts)
            .iter()
            .filter(|cl| !distinct_vars || cl[..vars].iter().enumerate().all(|(i, &c)| c as usize == i))
            .map(|cl| {
                let n = cl.iter().map(|&c| c as usize + 1).max().unwrap_or(0);
                1u128.checked_shl(Diagram::atom_bits(n, arities, sets) as u32).unwrap_or(u128::MAX)
            })
            .fold(0u128, |a, b| a.saturating_add(b))
    }

    /// Number of atoms and color bits a diagram with this class count has.
    pub fn atom_bits(class_count: usize, arities: &[usize], sets: usize) -> usize {
        arities.iter().map(|&a| class_count.pow(a as u32)).sum::<usize>() + class_count * sets
    }
}

/// All restricted-growth strings of the given length.
pub(crate) fn all_rgs(len: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(len);
    fn go(len: usize, cur: &mut Vec<u8>, max: u8, out: &mut Vec<Vec<u8>>) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        for c in 0..=max {
            cur.push(c);
            let next = if c == max { max + 1 } else { max };
            go(len, cur, next, out);
            cur.pop();
        }
    }
    go(len, &mut cur, 0, &mut out);
    out
}

impl fmt::Display for Diagram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{} eq={:?} col={:?} facts={:?}", self.vars, self.classes, self.colors, self.facts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structures::Structure;

    fn of_graph(m: &Structure, terms: &[usize], vars: usize) -> Diagram {
        Diagram::build(vars, terms, &[2], |p, t| m.holds(p, t), |_| 0)
    }

    #[test]
    fn rgs_numbering() {
        assert_eq!(rgs(&[5, 3, 5, 9]).0, vec![0, 1, 0, 2]);
        assert_eq!(all_rgs(3).len(), 5);
        assert_eq!(all_rgs(4).len(), 15);
        assert_eq!(all_rgs(0).len(), 1);
    }

    #[test]
    fn equal_tuples_give_equal_diagrams() {
        let p = Structure::path(5);
        let a = of_graph(&p, &[0, 1, 2], 3);
        let b = of_graph(&p, &[4, 3, 2], 3);
        assert_eq!(a, b);
        let c = of_graph(&p, &[0, 2, 1], 3);
        assert_ne!(a, c);
        assert!(a.has_fact(0, &[0, 1]));
        assert!(!a.has_fact(0, &[0, 2]));
    }

    #[test]
    fn projection_matches_direct_construction() {
        let p = Structure::path(4).with_constants(vec![3]).unwrap();
        let d = Diagram::build(3, &[0, 1, 2, 3], &[2], |q, t| p.holds(q, t), |_| 0);
        let proj = d.project(&[Term::Var(2), Term::Const(0), Term::Var(2)], &[2]);
        let direct = Diagram::build(3, &[2, 3, 2, 3], &[2], |q, t| p.holds(q, t), |_| 0);
        assert_eq!(proj, direct);
        assert_eq!(d.prefix(0, &[2]).vars(), 0);
    }

    #[test]
    fn render_parse_round_trip() {
        let v = Vocabulary::new(vec![("E".into(), 2), ("S".into(), 1)], 1, 1).unwrap();
        let m = crate::structures::parse_structure(
            "vocab E/2 S/1\nconsts 1\nsets 1\nsize 3\nconst 0 = 1\nrel E: (0,1) (1,2)\nrel S: (2)\nset 0: 0\n",
        )
        .unwrap();
        let d = Diagram::build(
            2,
            &[0usize, 2, 1],
            &[2, 1],
            |q, t| m.holds(q, t),
            |e| m.in_set(0, e) as u32,
        );
        let text = d.render(&v);
        assert_eq!(Diagram::parse(&text, &v).unwrap(), d);
        assert!(Diagram::parse("v1 eq=1 col=0", &v).is_err());
    }

    #[test]
    fn enumerate_small_spaces() {
        // empty vocabulary, two variables: x0 != x1 only
        assert_eq!(Diagram::enumerate(2, 0, &[], 0, true).len(), 1);
        assert_eq!(Diagram::enumerate(2, 0, &[], 0, false).len(), 2);
        // one unary predicate, one variable, one constant: equal (2) or distinct (4)
        assert_eq!(Diagram::enumerate(1, 1, &[1], 0, true).len(), 6);
    }
}
