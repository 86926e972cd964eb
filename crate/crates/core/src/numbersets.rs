//! Number sets generated by rules `n = n1 + n2 - j` over finitely many
//! labels, derivation trees witnessing membership, pumping, and eventual
//! periodicity certificates.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::{self, Write as _};

use crate::error::{Error, Result};

/// `(l1, l2, l3, j)`: from `n1 ∈ N_l1` and `n2 ∈ N_l2` derive `n1 + n2 - j ∈ N_l3`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rule {
    pub l1: usize,
    pub l2: usize,
    pub l3: usize,
    pub j: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuadrupleSystem {
    pub labels: usize,
    pub rules: Vec<Rule>,
    pub base: Vec<BTreeSet<usize>>,
}

impl QuadrupleSystem {
    pub fn new(labels: usize, rules: Vec<Rule>, base: Vec<BTreeSet<usize>>) -> Result<Self> {
        if base.len() != labels {
            return Err(Error::Invalid(format!("{} base sets for {labels} labels", base.len())));
        }
        for r in &rules {
            if r.l1 >= labels || r.l2 >= labels || r.l3 >= labels {
                return Err(Error::Invalid(format!("rule {r:?} has a label out of range")));
            }
        }
        Ok(QuadrupleSystem { labels, rules, base })
    }

    /// One label, the given rules as `(j)` values of `(0,0,0,j)`, and a base.
    pub fn single(js: &[usize], base: &[usize]) -> Self {
        let rules = js.iter().map(|&j| Rule { l1: 0, l2: 0, l3: 0, j }).collect();
        QuadrupleSystem::new(1, rules, vec![base.iter().copied().collect()]).unwrap()
    }

    pub fn max_j(&self) -> usize {
        self.rules.iter().map(|r| r.j).max().unwrap_or(0)
    }

    /// `n*_0`: the largest base value.
    pub fn max_base(&self) -> usize {
        self.base.iter().filter_map(|b| b.iter().next_back().copied()).max().unwrap_or(0)
    }

    pub fn default_slack(&self) -> usize {
        let j = self.max_j();
        (j + 1) * self.labels * j
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut labels = None;
        let mut rules = Vec::new();
        let mut base_lines = Vec::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let perr = |m: &str| Error::parse(no + 1, m.to_string());
            let num = |s: &str| s.parse::<usize>().map_err(|_| perr(&format!("bad number `{s}`")));
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks[0] {
                "labels" => {
                    if toks.len() != 2 || labels.is_some() {
                        return Err(perr("expected a single `labels <m>` line"));
                    }
                    labels = Some(num(toks[1])?);
                }
                "rule" => {
                    if toks.len() != 5 {
                        return Err(perr("expected `rule <l1> <l2> <l3> <j>`"));
                    }
                    rules.push(Rule {
                        l1: num(toks[1])?,
                        l2: num(toks[2])?,
                        l3: num(toks[3])?,
                        j: num(toks[4])?,
                    });
                }
                "base" => {
                    let rest = line["base".len()..].trim();
                    let (l, vals) = rest.split_once(':').ok_or_else(|| perr("expected `base <l>: <n>...`"))?;
                    let l = num(l.trim())?;
                    let vals = vals.split_whitespace().map(num).collect::<Result<Vec<_>>>()?;
                    base_lines.push((no + 1, l, vals));
                }
                other => return Err(perr(&format!("unknown line `{other}`"))),
            }
        }
        let labels = labels.ok_or_else(|| Error::parse(0, "missing `labels` line"))?;
        let mut base = vec![BTreeSet::new(); labels];
        for (line, l, vals) in base_lines {
            if l >= labels {
                return Err(Error::parse(line, format!("label {l} out of range")));
            }
            base[l].extend(vals);
        }
        QuadrupleSystem::new(labels, rules, base)
    }

    pub fn serialize(&self) -> String {
        let mut out = format!("labels {}\n", self.labels);
        for r in &self.rules {
            writeln!(out, "rule {} {} {} {}", r.l1, r.l2, r.l3, r.j).unwrap();
        }
        for (l, b) in self.base.iter().enumerate() {
            if !b.is_empty() {
                let vals: Vec<String> = b.iter().map(|v| v.to_string()).collect();
                writeln!(out, "base {l}: {}", vals.join(" ")).unwrap();
            }
        }
        out
    }
}

/// How a value was first derived.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Origin {
    Base,
    Rule { rule: usize, n1: usize, n2: usize },
}

/// Saturated membership over `[0, limit]` with first derivations.
#[derive(Clone, Debug)]
pub struct Reach {
    pub bound: usize,
    pub slack: usize,
    /// Whether doubling the slack left the answer up to `bound` unchanged.
    pub slack_stable: bool,
    limit: usize,
    origin: Vec<Vec<Option<Origin>>>,
}

impl Reach {
    pub fn contains(&self, label: usize, n: usize) -> bool {
        n <= self.bound && self.origin[label][n].is_some()
    }

    /// Members of `N_label` up to the bound, ascending.
    pub fn set(&self, label: usize) -> Vec<usize> {
        (0..=self.bound).filter(|&n| self.origin[label][n].is_some()).collect()
    }

    pub fn sets(&self) -> Vec<Vec<usize>> {
        (0..self.origin.len()).map(|l| self.set(l)).collect()
    }

    /// Membership as a bit vector over `[0, bound]`.
    pub fn membership(&self, label: usize) -> Vec<bool> {
        (0..=self.bound).map(|n| self.origin[label][n].is_some()).collect()
    }

    /// A derivation tree for `n ∈ N_label`, built from first derivations.
    /// Values above the bound (but within the slack) may occur inside.
    pub fn witness(&self, sys: &QuadrupleSystem, label: usize, n: usize) -> Option<DerivationTree> {
        if n > self.limit {
            return None;
        }
        self.origin[label][n]?;
        Some(self.build(sys, label, n))
    }

    fn build(&self, sys: &QuadrupleSystem, label: usize, n: usize) -> DerivationTree {
        match self.origin[label][n].expect("derived value") {
            Origin::Base => DerivationTree::leaf(label, n),
            Origin::Rule { rule, n1, n2 } => {
                let r = sys.rules[rule];
                DerivationTree::node(label, n, rule, self.build(sys, r.l1, n1), self.build(sys, r.l2, n2))
            }
        }
    }
}

fn saturate(sys: &QuadrupleSystem, limit: usize) -> Vec<Vec<Option<Origin>>> {
    let mut origin = vec![vec![None; limit + 1]; sys.labels];
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); sys.labels];
    let mut queue = VecDeque::new();
    for (l, b) in sys.base.iter().enumerate() {
        for &n in b.range(..=limit) {
            origin[l][n] = Some(Origin::Base);
            members[l].push(n);
            queue.push_back((l, n));
        }
    }
    // each new value is combined with everything known so far, on both sides
    while let Some((l, n)) = queue.pop_front() {
        for (ri, r) in sys.rules.iter().enumerate() {
            let mut found = Vec::new();
            if r.l1 == l {
                for &m in &members[r.l2] {
                    found.push((n, m));
                }
            }
            if r.l2 == l {
                for &m in &members[r.l1] {
                    found.push((m, n));
                }
            }
            for (n1, n2) in found {
                let Some(v) = (n1 + n2).checked_sub(r.j) else { continue };
                if v <= limit && origin[r.l3][v].is_none() {
                    origin[r.l3][v] = Some(Origin::Rule { rule: ri, n1, n2 });
                    members[r.l3].push(v);
                    queue.push_back((r.l3, v));
                }
            }
        }
    }
    origin
}

/// Saturate the rules over `[0, bound + slack]` and keep what lies below
/// `bound`. Values may locally decrease through large `j`, hence the slack.
pub fn reach(sys: &QuadrupleSystem, bound: usize, slack: Option<usize>) -> Reach {
    let slack = slack.unwrap_or_else(|| sys.default_slack());
    let origin = saturate(sys, bound + slack);
    let wider = saturate(sys, bound + 2 * slack);
    let slack_stable = (0..sys.labels).all(|l| (0..=bound).all(|n| origin[l][n].is_some() == wider[l][n].is_some()));
    Reach {
        bound,
        slack,
        slack_stable,
        limit: bound + slack,
        origin,
    }
}

/// A derivation tree. Node addresses are 0/1 strings from the root.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DerivationTree {
    pub label: usize,
    pub value: usize,
    pub rule: Option<usize>,
    pub children: Option<Box<(DerivationTree, DerivationTree)>>,
}

impl DerivationTree {
    pub fn leaf(label: usize, value: usize) -> Self {
        DerivationTree {
            label,
            value,
            rule: None,
            children: None,
        }
    }

    pub fn node(label: usize, value: usize, rule: usize, left: DerivationTree, right: DerivationTree) -> Self {
        DerivationTree {
            label,
            value,
            rule: Some(rule),
            children: Some(Box::new((left, right))),
        }
    }

    pub fn size(&self) -> usize {
        match &self.children {
            None => 1,
            Some(c) => 1 + c.0.size() + c.1.size(),
        }
    }

    pub fn at(&self, path: &str) -> Option<&DerivationTree> {
        let mut cur = self;
        for ch in path.chars() {
            let c = cur.children.as_ref()?;
            cur = match ch {
                '0' => &c.0,
                '1' => &c.1,
                _ => return None,
            };
        }
        Some(cur)
    }

    fn at_mut(&mut self, path: &str) -> Option<&mut DerivationTree> {
        let mut cur = self;
        for ch in path.chars() {
            let c = cur.children.as_mut()?;
            cur = match ch {
                '0' => &mut c.0,
                '1' => &mut c.1,
                _ => return None,
            };
        }
        Some(cur)
    }

    /// All node paths in preorder.
    pub fn paths(&self) -> Vec<String> {
        let mut out = Vec::new();
        fn walk(t: &DerivationTree, p: &mut String, out: &mut Vec<String>) {
            out.push(p.clone());
            if let Some(c) = &t.children {
                p.push('0');
                walk(&c.0, p, out);
                p.pop();
                p.push('1');
                walk(&c.1, p, out);
                p.pop();
            }
        }
        walk(self, &mut String::new(), &mut out);
        out
    }

    /// Recompute internal values bottom-up from the leaves.
    fn recompute(&mut self, sys: &QuadrupleSystem) -> Option<usize> {
        if let Some(c) = self.children.as_mut() {
            let a = c.0.recompute(sys)?;
            let b = c.1.recompute(sys)?;
            let j = sys.rules.get(self.rule?)?.j;
            self.value = (a + b).checked_sub(j)?;
        }
        Some(self.value)
    }

    /// `node <path> label=<l> value=<n> [rule=<idx>]`, indented by depth.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for p in self.paths() {
            let t = self.at(&p).unwrap();
            let _ = write!(out, "{}node {} label={} value={}", "  ".repeat(p.len()), show_path(&p), t.label, t.value);
            if let Some(r) = t.rule {
                let _ = write!(out, " rule={r}");
            }
            out.push('\n');
        }
        out
    }
}

/// Paths print as their bit string, the root as `root`.
pub fn show_path(p: &str) -> &str {
    if p.is_empty() {
        "root"
    } else {
        p
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub clause: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "clause {} at {}: {}", self.clause, show_path(&self.path), self.message)
    }
}

/// Check every node: labels in range, leaves take base values (e), internal
/// nodes carry a rule whose labels match their children and own label, and
/// their value is `n0 + n1 - j` (f). Reports the first violation in preorder.
pub fn validate_tree(sys: &QuadrupleSystem, tree: &DerivationTree) -> std::result::Result<(), Violation> {
    for p in tree.paths() {
        let t = tree.at(&p).unwrap();
        let fail = |clause, message: String| {
            Err(Violation {
                path: p.clone(),
                clause,
                message,
            })
        };
        if t.label >= sys.labels {
            return fail("labels", format!("label {} out of range", t.label));
        }
        match (&t.children, t.rule) {
            (None, None) => {
                if !sys.base[t.label].contains(&t.value) {
                    return fail("(e)", format!("leaf value {} not in base of label {}", t.value, t.label));
                }
            }
            (Some(c), Some(ri)) => {
                let Some(r) = sys.rules.get(ri) else {
                    return fail("rule", format!("no rule {ri}"));
                };
                if r.l1 != c.0.label || r.l2 != c.1.label || r.l3 != t.label {
                    return fail(
                        "labels",
                        format!(
                            "rule {ri} expects labels ({},{},{}), node has ({},{},{})",
                            r.l1, r.l2, r.l3, c.0.label, c.1.label, t.label
                        ),
                    );
                }
                if c.0.value + c.1.value != t.value + r.j {
                    return fail(
                        "(f)",
                        format!("value {} but children give {} + {} - {}", t.value, c.0.value, c.1.value, r.j),
                    );
                }
            }
            _ => return fail("rule", "rule present exactly on internal nodes".into()),
        }
    }
    Ok(())
}

/// Nodes whose value exceeds the value of every proper descendant.
pub fn increasing_nodes(tree: &DerivationTree) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    fn walk(t: &DerivationTree, p: &mut String, out: &mut BTreeSet<String>) -> usize {
        // returns the max value in the subtree
        match &t.children {
            None => {
                out.insert(p.clone());
                t.value
            }
            Some(c) => {
                p.push('0');
                let a = walk(&c.0, p, out);
                p.pop();
                p.push('1');
                let b = walk(&c.1, p, out);
                p.pop();
                if t.value > a.max(b) {
                    out.insert(p.clone());
                }
                t.value.max(a).max(b)
            }
        }
    }
    walk(tree, &mut String::new(), &mut out);
    out
}

/// Chain rank `t(ν)`: 0 at leaves, else the children's maximum plus one
/// when ν is an increasing node. Returned in preorder with the path.
pub fn chain_ranks(tree: &DerivationTree) -> Vec<(String, usize)> {
    let inc = increasing_nodes(tree);
    let mut ranks = std::collections::HashMap::new();
    let mut paths = tree.paths();
    // children come after parents in preorder, so go backwards
    for p in paths.iter().rev() {
        let t = tree.at(p).unwrap();
        let r = match &t.children {
            None => 0,
            Some(_) => {
                let a = ranks[&format!("{p}0")];
                let b = ranks[&format!("{p}1")];
                let m: usize = std::cmp::max(a, b);
                m + usize::from(inc.contains(p))
            }
        };
        ranks.insert(p.clone(), r);
    }
    paths.drain(..).map(|p| (p.clone(), ranks[&p])).collect()
}

/// `n_ν ≤ 2^{t(ν)} · n*_0` at every node.
pub fn rank_bound_holds(sys: &QuadrupleSystem, tree: &DerivationTree) -> bool {
    let n0 = sys.max_base() as u128;
    chain_ranks(tree).into_iter().all(|(p, t)| {
        let v = tree.at(&p).unwrap().value as u128;
        t >= 100 || v <= (1u128 << t) * n0
    })
}

/// A pump: `outer` is a proper ancestor of `inner`, both increasing nodes
/// with the same label, and `delta = n_outer - n_inner > 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pump {
    pub outer: String,
    pub inner: String,
    pub delta: usize,
}

/// The pump with the deepest outer node, then the shallowest inner node,
/// ties broken by path order.
pub fn find_pump(tree: &DerivationTree) -> Option<Pump> {
    find_pump_where(tree, |_| true)
}

fn find_pump_where(tree: &DerivationTree, accept: impl Fn(usize) -> bool) -> Option<Pump> {
    let inc = increasing_nodes(tree);
    let mut outers: Vec<&String> = inc.iter().collect();
    outers.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
    for outer in outers {
        let to = tree.at(outer).unwrap();
        let mut inners: Vec<&String> = inc
            .iter()
            .filter(|q| q.len() > outer.len() && q.starts_with(outer.as_str()))
            .filter(|q| tree.at(q).unwrap().label == to.label)
            .collect();
        inners.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
        for inner in inners {
            let delta = to.value - tree.at(inner).unwrap().value;
            if accept(delta) {
                return Some(Pump {
                    outer: outer.clone(),
                    inner: inner.clone(),
                    delta,
                });
            }
        }
    }
    None
}

/// Repeat the context between `outer` and `inner` `i` more times.
pub fn pump(sys: &QuadrupleSystem, tree: &DerivationTree, outer: &str, inner: &str, i: usize) -> Result<DerivationTree> {
    if inner.len() <= outer.len() || !inner.starts_with(outer) {
        return Err(Error::Invalid(format!(
            "{} is not a proper ancestor of {}",
            show_path(outer),
            show_path(inner)
        )));
    }
    let (o, n) = match (tree.at(outer), tree.at(inner)) {
        (Some(o), Some(n)) => (o, n),
        _ => return Err(Error::Invalid("pump node missing from tree".into())),
    };
    if o.label != n.label {
        return Err(Error::Invalid("pump nodes carry different labels".into()));
    }
    let rel = &inner[outer.len()..];
    let mut sub = n.clone();
    for _ in 0..i {
        let mut ctx = o.clone();
        *ctx.at_mut(rel).unwrap() = sub;
        sub = ctx;
    }
    let mut out = tree.clone();
    *out.at_mut(inner).unwrap() = sub;
    out.recompute(sys)
        .ok_or_else(|| Error::Invalid("pumped tree has a negative value".into()))?;
    Ok(out)
}

/// All derivation trees for `label` in order of node count, at most `cap`
/// trees in total across labels, values limited to `max_value`.
pub fn enumerate_trees(sys: &QuadrupleSystem, label: usize, max_nodes: usize, max_value: usize, cap: usize) -> Vec<DerivationTree> {
    // by_size[s][l]: trees of label l with exactly s nodes
    let mut by_size: Vec<Vec<Vec<DerivationTree>>> = vec![vec![Vec::new(); sys.labels]];
    let mut total = 0usize;
    let mut out = Vec::new();
    'sizes: for s in 1..=max_nodes {
        let mut level = vec![Vec::new(); sys.labels];
        if s == 1 {
            for (l, b) in sys.base.iter().enumerate() {
                for &v in b.range(..=max_value) {
                    level[l].push(DerivationTree::leaf(l, v));
                }
            }
        } else {
            for (ri, r) in sys.rules.iter().enumerate() {
                for a in 1..s - 1 {
                    let b = s - 1 - a;
                    for x in &by_size[a][r.l1] {
                        for y in &by_size[b][r.l2] {
                            let Some(v) = (x.value + y.value).checked_sub(r.j) else { continue };
                            if v > max_value {
                                continue;
                            }
                            level[r.l3].push(DerivationTree::node(r.l3, v, ri, x.clone(), y.clone()));
                            total += 1;
                            if total > cap {
                                by_size.push(level);
                                break 'sizes;
                            }
                        }
                    }
                }
            }
        }
        total += if s == 1 { level.iter().map(Vec::len).sum() } else { 0 };
        by_size.push(level);
    }
    for level in by_size.iter().skip(1) {
        out.extend(level[label].iter().cloned());
    }
    out.truncate(cap);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CertificateStatus {
    /// A pump with increment dividing the period was found.
    Certified,
    /// The period was only observed.
    Empirical,
    /// Nothing beyond the threshold up to the verified bound.
    Finite,
}

impl CertificateStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            CertificateStatus::Certified => "certified-progression",
            CertificateStatus::Empirical => "empirical",
            CertificateStatus::Finite => "finite",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PeriodicityCertificate {
    pub label: usize,
    pub threshold: usize,
    pub period: usize,
    pub verified_to: usize,
    pub status: CertificateStatus,
    pub slack_stable: bool,
    pub pump: Option<(DerivationTree, Pump)>,
}

impl PeriodicityCertificate {
    pub fn line(&self) -> String {
        let mut s = format!(
            "periodicity label={} threshold={} period={} verified={} status={} slack-stable={}",
            self.label,
            self.threshold,
            self.period,
            self.verified_to,
            self.status.as_str(),
            self.slack_stable
        );
        if let Some((t, p)) = &self.pump {
            let _ = write!(
                s,
                " pump-root={} outer={} inner={} delta={}",
                t.value,
                show_path(&p.outer),
                show_path(&p.inner),
                p.delta
            );
        }
        s
    }
}

/// Default cap on trees examined while looking for a pump.
pub const PUMP_TREE_CAP: usize = 100_000;

/// Smallest `(T, p)` with `p ≤ window`, `T + 3p ≤ scan`, `T` at least the
/// smallest member, such that membership on `[T, scan]` is p-periodic.
/// `None` when no such pair exists.
pub fn find_period(sys: &QuadrupleSystem, label: usize, scan: usize, window: usize) -> Result<Option<PeriodicityCertificate>> {
    if label >= sys.labels {
        return Err(Error::Invalid(format!("label {label} out of range")));
    }
    if scan < 2 * window {
        return Err(Error::Invalid("scan bound must be at least twice the window".into()));
    }
    let r = reach(sys, scan, None);
    let mem = r.membership(label);
    let start = mem.iter().position(|&b| b).unwrap_or(0);
    for p in 1..=window {
        let mut t = start;
        while t + 3 * p <= scan {
            if periodic_on(&mem, t, p) {
                let mut cert = PeriodicityCertificate {
                    label,
                    threshold: t,
                    period: p,
                    verified_to: scan,
                    status: CertificateStatus::Empirical,
                    slack_stable: r.slack_stable,
                    pump: None,
                };
                if !mem[t..].iter().any(|&b| b) {
                    cert.status = CertificateStatus::Finite;
                } else if let Some(found) = search_pump(sys, &r, label, p) {
                    cert.status = CertificateStatus::Certified;
                    cert.pump = Some(found);
                }
                return Ok(Some(cert));
            }
            t += 1;
        }
    }
    Ok(None)
}

fn periodic_on(mem: &[bool], t: usize, p: usize) -> bool {
    (t..mem.len() - p).all(|x| mem[x] == mem[x + p])
}

/// A tree of `label` holding a pump whose increment divides `p`: first
/// among the first-derivation witnesses, then breadth-first by size.
fn search_pump(sys: &QuadrupleSystem, r: &Reach, label: usize, p: usize) -> Option<(DerivationTree, Pump)> {
    for n in r.set(label) {
        if let Some(t) = r.witness(sys, label, n) {
            if let Some(pp) = find_pump_where(&t, |d| p % d == 0) {
                return Some((t, pp));
            }
        }
    }
    let max_nodes = ((1usize << sys.labels.min(16)) * sys.max_base().max(1)).max(3);
    for t in enumerate_trees(sys, label, max_nodes, r.bound, PUMP_TREE_CAP) {
        if let Some(pp) = find_pump_where(&t, |d| p % d == 0) {
            return Some((t, pp));
        }
    }
    None
}

/// Re-check a certificate against a fresh saturation: periodic on
/// `[T, verified_to]`, and the pump (if any) is valid.
pub fn verify_certificate(sys: &QuadrupleSystem, cert: &PeriodicityCertificate) -> bool {
    let r = reach(sys, cert.verified_to, Some(2 * sys.default_slack()));
    let mem = r.membership(cert.label);
    if cert.period == 0 || cert.threshold + cert.period > cert.verified_to || !periodic_on(&mem, cert.threshold, cert.period) {
        return false;
    }
    match cert.status {
        CertificateStatus::Finite => !mem[cert.threshold..].iter().any(|&b| b),
        CertificateStatus::Empirical => cert.pump.is_none(),
        CertificateStatus::Certified => match &cert.pump {
            None => false,
            Some((t, pp)) => {
                validate_tree(sys, t).is_ok()
                    && t.label == cert.label
                    && cert.period % pp.delta == 0
                    && pump(sys, t, &pp.outer, &pp.inner, 1).is_ok_and(|u| u.value == t.value + pp.delta)
            }
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reach_examples() {
        let r = reach(&QuadrupleSystem::single(&[0], &[3]), 20, None);
        assert_eq!(r.set(0), vec![3, 6, 9, 12, 15, 18]);
        let r = reach(&QuadrupleSystem::single(&[1], &[2]), 10, None);
        assert_eq!(r.set(0), (2..=10).collect::<Vec<_>>());
        assert!(r.slack_stable);
        let r = reach(&QuadrupleSystem::single(&[0], &[]), 10, None);
        assert!(r.set(0).is_empty());
    }

    #[test]
    fn system_text_round_trip() {
        let text = "labels 2\nrule 0 1 1 1\nrule 1 1 0 0\nbase 0: 2 5\nbase 1: 3\n";
        let s = QuadrupleSystem::parse(text).unwrap();
        assert_eq!(s.serialize(), text);
        assert!(QuadrupleSystem::parse("labels 1\nrule 0 0 1 0\n").is_err());
    }

    fn chain() -> DerivationTree {
        DerivationTree::node(
            0,
            9,
            0,
            DerivationTree::leaf(0, 3),
            DerivationTree::node(0, 6, 0, DerivationTree::leaf(0, 3), DerivationTree::leaf(0, 3)),
        )
    }

    #[test]
    fn pump_on_chain() {
        let sys = QuadrupleSystem::single(&[0], &[3]);
        let t = chain();
        assert!(validate_tree(&sys, &t).is_ok());
        let p = find_pump(&t).unwrap();
        assert_eq!(p, Pump { outer: "1".into(), inner: "10".into(), delta: 3 });
        assert_eq!(pump(&sys, &t, &p.outer, &p.inner, 0).unwrap(), t);
        let u = pump(&sys, &t, &p.outer, &p.inner, 2).unwrap();
        assert_eq!(u.value, 15);
        assert!(validate_tree(&sys, &u).is_ok());
        assert!(rank_bound_holds(&sys, &u));
        assert!(find_pump(&DerivationTree::leaf(0, 3)).is_none());
    }

    #[test]
    fn violations_name_clauses() {
        let sys = QuadrupleSystem::single(&[0], &[3]);
        let mut t = chain();
        t.value = 10;
        assert_eq!(validate_tree(&sys, &t).unwrap_err().clause, "(f)");
        let bad = DerivationTree::leaf(0, 4);
        let v = validate_tree(&sys, &bad).unwrap_err();
        assert_eq!((v.clause, v.path.as_str()), ("(e)", ""));
    }

    #[test]
    fn alternating_labels_have_no_pump_in_small_trees() {
        // 0 -> 1 -> 0 alternation: a two-level tree never repeats a label on a chain
        let sys = QuadrupleSystem::new(
            2,
            vec![Rule { l1: 0, l2: 0, l3: 1, j: 0 }, Rule { l1: 1, l2: 1, l3: 0, j: 0 }],
            vec![[1].into_iter().collect(), BTreeSet::new()],
        )
        .unwrap();
        let t = DerivationTree::node(1, 2, 0, DerivationTree::leaf(0, 1), DerivationTree::leaf(0, 1));
        assert!(validate_tree(&sys, &t).is_ok());
        assert!(find_pump(&t).is_none());
        let r = reach(&sys, 16, None);
        let deep = r.witness(&sys, 0, 4).unwrap();
        assert!(find_pump(&deep).is_some());
    }

    #[test]
    fn period_examples() {
        let c = find_period(&QuadrupleSystem::single(&[0], &[3]), 0, 60, 8).unwrap().unwrap();
        assert_eq!((c.threshold, c.period, c.status), (3, 3, CertificateStatus::Certified));
        assert!(verify_certificate(&QuadrupleSystem::single(&[0], &[3]), &c));
        let c = find_period(&QuadrupleSystem::single(&[1], &[2]), 0, 60, 8).unwrap().unwrap();
        assert_eq!((c.threshold, c.period, c.status), (2, 1, CertificateStatus::Certified));
        let sys = QuadrupleSystem::single(&[0], &[4, 7]);
        let c = find_period(&sys, 0, 200, 16).unwrap().unwrap();
        assert_eq!((c.threshold, c.period), (18, 1));
        assert!(verify_certificate(&sys, &c));
        let c = find_period(&QuadrupleSystem::single(&[], &[1, 2]), 0, 40, 8).unwrap().unwrap();
        assert_eq!((c.threshold, c.period, c.status), (3, 1, CertificateStatus::Finite));
    }

    #[test]
    fn witnesses_validate() {
        let sys = QuadrupleSystem::new(
            2,
            vec![Rule { l1: 0, l2: 1, l3: 1, j: 2 }, Rule { l1: 1, l2: 1, l3: 0, j: 1 }],
            vec![[2, 3].into_iter().collect(), [4].into_iter().collect()],
        )
        .unwrap();
        let r = reach(&sys, 50, None);
        for l in 0..2 {
            for n in r.set(l) {
                let t = r.witness(&sys, l, n).unwrap();
                assert_eq!((t.label, t.value), (l, n));
                assert!(validate_tree(&sys, &t).is_ok());
                assert!(rank_bound_holds(&sys, &t));
            }
        }
    }
}
