use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mso_core::closure::{close, small_model_base, structure_base, ClosureRecords, ClosureStatus};
use mso_core::composition::{
    count_schemes, enumerate_schemes, formal_patterns, glue, parse_scheme, realized_patterns, serialize_scheme,
    TableDomain, TransferEngine,
};
use mso_core::decomp::{decompose, decomposability_profile, find_small_equivalent, validate_split};
use mso_core::numbersets::{find_period, reach, QuadrupleSystem};
use mso_core::oracle::{eval_with, spectrum_bruteforce, Env, Formula};
use mso_core::selfcheck::{selfcheck, SelfcheckOptions};
use mso_core::spectra::{audit_gaps, induce_system, parse_sizes, spectrum, SpectrumOptions};
use mso_core::structures::{incidence_graph, parse_structure, serialize_structure};
use mso_core::theory::{compute_theory_with, TheoryBudget};
use mso_core::{Error, Result, Scheme, Structure, TheoryStore, Vocabulary};

mod config;

use config::Config;

#[derive(Parser)]
#[command(name = "mso", version, about = "Monadic theories of glued structures, closures and spectra")]
struct Cli {
    /// Optional `key = value` configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for the closure
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Write the output to this file instead of standard output
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the depth-n theory of a model
    Theory {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        depth: usize,
        /// Print the full nested value, not only the header
        #[arg(long)]
        dump: bool,
    },
    /// List the tuple patterns of a scheme (formal, or realized by two parts)
    PatternDump {
        #[arg(long)]
        scheme: PathBuf,
        #[arg(long, requires = "right", conflicts_with = "vocab")]
        left: Option<PathBuf>,
        #[arg(long, requires = "left")]
        right: Option<PathBuf>,
        /// Predicates as `name/arity`, for the formal patterns
        #[arg(long, required_unless_present = "left")]
        vocab: Option<String>,
    },
    /// Glue two models with a scheme
    Glue {
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
        #[arg(long)]
        scheme: PathBuf,
    },
    /// Compare the transferred theory with the theory of the glued model
    CheckAddition {
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
        #[arg(long)]
        scheme: PathBuf,
        #[arg(long)]
        depth: usize,
    },
    /// Enumerate (or count) all schemes of a shape
    SchemesEnumerate {
        /// Predicates as `name/arity`, comma separated
        #[arg(long)]
        vocab: String,
        #[arg(long)]
        k1: usize,
        #[arg(long)]
        k2: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        sets: usize,
        #[arg(long, value_enum, default_value_t = Domain::Full)]
        domain: Domain,
        #[arg(long)]
        count_only: bool,
    },
    /// Close base models under schemes and write the base and fact records
    Closure {
        /// Base model files
        #[arg(long = "base")]
        base: Vec<PathBuf>,
        /// Use every model with at most k* elements as the base, for these constant counts
        #[arg(long = "small-consts", value_delimiter = ',')]
        small_consts: Vec<usize>,
        /// Predicates as `name/arity` (needed with --small-consts)
        #[arg(long)]
        vocab: Option<String>,
        #[arg(long = "scheme")]
        schemes: Vec<PathBuf>,
        #[arg(long)]
        depth: usize,
        #[arg(long)]
        max_iter: Option<usize>,
    },
    /// Spectrum of a theory from closure records
    Spectrum {
        /// Combined closure output (base and fact lines)
        #[arg(long)]
        closure: PathBuf,
        /// Theory digest; all theories when omitted
        #[arg(long)]
        theory: Option<String>,
        #[arg(long, default_value_t = 50)]
        bound: usize,
    },
    /// Eventual periodicity certificate for one label of a number-set system
    Periodicity {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        label: usize,
        #[arg(long)]
        scan: Option<usize>,
        #[arg(long)]
        window: Option<usize>,
        /// Also print the pump tree
        #[arg(long)]
        tree: bool,
    },
    /// Reachable numbers of every label up to a bound
    SystemReach {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        bound: usize,
    },
    /// Split a model into two large parts with a small overlap
    Decompose {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        m: usize,
    },
    /// Decomposability of a family of models
    DecomposeProfile {
        #[arg(long, value_enum)]
        family: Family,
        #[arg(long)]
        from: usize,
        #[arg(long)]
        to: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        m: usize,
    },
    /// Incidence graph of the complete graph on n vertices
    Incidence {
        #[arg(long)]
        n: usize,
    },
    /// Search for a small model with the same theory
    Smalleq {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        depth: usize,
        #[arg(long)]
        size_max: usize,
    },
    /// Audit successive gaps of a size set
    Gaps {
        /// File with sizes separated by commas or whitespace
        #[arg(long, conflicts_with = "list")]
        sizes: Option<PathBuf>,
        #[arg(long)]
        list: Option<String>,
        #[arg(long)]
        ratio: f64,
        #[arg(long, default_value_t = 0)]
        threshold: usize,
    },
    /// Evaluate a sentence on a model
    OracleEval {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        formula: FormulaArg,
    },
    /// Sizes of models of a sentence, by exhaustive search
    OracleSpectrum {
        #[arg(long)]
        vocab: String,
        #[arg(long, default_value_t = 0)]
        consts: usize,
        #[arg(long)]
        max_size: usize,
        #[command(flatten)]
        formula: FormulaArg,
    },
    /// Run the invariant suite at desk scale
    Selfcheck {
        #[arg(long)]
        seed: u64,
    },
}

#[derive(clap::Args)]
#[group(required = true, multiple = false)]
struct FormulaArg {
    /// File holding one formula
    #[arg(long)]
    formula: Option<PathBuf>,
    /// Formula text
    #[arg(long)]
    sentence: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Domain {
    Full,
    Mixed,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Paths,
    Incidence,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
}

fn read_model(path: &Path) -> Result<Structure> {
    parse_structure(&read(path)?)
}

fn read_scheme(path: &Path, tau: &Vocabulary) -> Result<Scheme> {
    parse_scheme(&read(path)?, tau)
}

fn read_formula(arg: &FormulaArg) -> Result<Formula> {
    match (&arg.formula, &arg.sentence) {
        (Some(p), _) => Formula::parse(&read(p)?),
        (None, Some(s)) => Formula::parse(s),
        (None, None) => Err(Error::Invalid("a formula is required".into())),
    }
}

/// `E/2,P/1` style predicate lists.
fn parse_vocab(text: &str) -> Result<Vocabulary> {
    let mut preds = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (name, arity) = item
            .split_once('/')
            .ok_or_else(|| Error::Invalid(format!("expected name/arity, got `{item}`")))?;
        let arity = arity
            .parse()
            .map_err(|_| Error::Invalid(format!("bad arity in `{item}`")))?;
        preds.push((name.to_string(), arity));
    }
    Vocabulary::new(preds, 0, 0)
}

fn budget(cfg: &Config) -> TheoryBudget {
    TheoryBudget {
        max_depth: cfg.n_max,
        ..TheoryBudget::default()
    }
}

fn run(cli: &Cli, cfg: &Config) -> Result<(String, bool)> {
    let mut out = String::new();
    let mut ok = true;
    match &cli.command {
        Command::Theory { model, depth, dump } => {
            let m = read_model(model)?;
            let store = TheoryStore::new(m.vocab());
            let t = compute_theory_with(&store, &m, *depth, &budget(cfg))?;
            if *dump {
                out.push_str(&store.dump(t));
            } else {
                writeln!(out, "{}", store.header(t)).unwrap();
                writeln!(out, "digest {}", store.digest(t)).unwrap();
            }
        }
        Command::PatternDump {
            scheme,
            left,
            right,
            vocab,
        } => match (left, right) {
            (Some(l), Some(r)) => {
                let m1 = read_model(l)?;
                let m2 = read_model(r)?;
                let s = read_scheme(scheme, m1.vocab())?;
                for (p, pat) in realized_patterns(&m1, &m2, &s)? {
                    let tau = m1.vocab();
                    let v = u8::from(s.table_value(p, &pat));
                    writeln!(out, "pattern {} \"{}\" = {v}", tau.predicates()[p].name, pat.render(tau)).unwrap();
                }
            }
            _ => {
                let tau = parse_vocab(vocab.as_deref().unwrap_or_default())?;
                let s = read_scheme(scheme, &tau)?;
                for (p, pred) in tau.predicates().iter().enumerate() {
                    for pat in formal_patterns(&tau, pred.arity, &s, cfg.formal_budget)? {
                        let v = u8::from(s.table_value(p, &pat));
                        writeln!(out, "pattern {} \"{}\" = {v}", pred.name, pat.render(&tau)).unwrap();
                    }
                }
            }
        },
        Command::Glue { left, right, scheme } => {
            let m1 = read_model(left)?;
            let m2 = read_model(right)?;
            let s = read_scheme(scheme, m1.vocab())?;
            out.push_str(&serialize_structure(&glue(&m1, &m2, &s)?));
        }
        Command::CheckAddition {
            left,
            right,
            scheme,
            depth,
        } => {
            let m1 = read_model(left)?;
            let m2 = read_model(right)?;
            let s = read_scheme(scheme, m1.vocab())?;
            let store = TheoryStore::new(m1.vocab());
            let b = budget(cfg);
            let t1 = compute_theory_with(&store, &m1, *depth, &b)?;
            let t2 = compute_theory_with(&store, &m2, *depth, &b)?;
            let (t, j) = TransferEngine::new(s.clone()).apply(&store, t1, t2)?;
            let g = glue(&m1, &m2, &s)?;
            let direct = compute_theory_with(&store, &g, *depth, &b)?;
            let deficit = m1.size() + m2.size() - g.size();
            if t == direct && j == deficit {
                writeln!(out, "OK t={} j={j}", store.digest(t)).unwrap();
            } else {
                ok = false;
                writeln!(
                    out,
                    "MISMATCH transfer={} j={j} direct={} j={deficit}",
                    store.digest(t),
                    store.digest(direct)
                )
                .unwrap();
            }
        }
        Command::SchemesEnumerate {
            vocab,
            k1,
            k2,
            k,
            sets,
            domain,
            count_only,
        } => {
            let tau = parse_vocab(vocab)?;
            let domain = match domain {
                Domain::Full => TableDomain::Full,
                Domain::Mixed => TableDomain::MixedOnly,
            };
            let n = count_schemes(&tau, *k1, *k2, *k, *sets, domain, cfg.scheme_budget)?;
            writeln!(out, "schemes count={n}").unwrap();
            if !count_only {
                for s in enumerate_schemes(&tau, *k1, *k2, *k, *sets, domain, cfg.scheme_budget)? {
                    out.push('\n');
                    out.push_str(&serialize_scheme(&s, &tau));
                }
            }
        }
        Command::Closure {
            base,
            small_consts,
            vocab,
            schemes,
            depth,
            max_iter,
        } => {
            let models = base.iter().map(|p| read_model(p)).collect::<Result<Vec<_>>>()?;
            let tau = match (models.first(), vocab) {
                (_, Some(v)) => parse_vocab(v)?,
                (Some(m), None) => m.vocab().with_consts(0).with_sets(0),
                (None, None) => return Err(Error::Invalid("give --base models or --vocab".into())),
            };
            let store = TheoryStore::new(&tau);
            let mut b = structure_base(&store, &models, *depth)?;
            if !small_consts.is_empty() {
                b.extend(small_model_base(&store, *depth, cfg.k_star, small_consts, cfg.enumeration_bits)?);
            }
            let ss = schemes.iter().map(|p| read_scheme(p, &tau)).collect::<Result<Vec<_>>>()?;
            let st = close(&store, b, &ss, *depth, max_iter.unwrap_or(cfg.max_iter), cfg.jobs)?;
            let status = match st.status {
                ClosureStatus::Converged => "converged",
                ClosureStatus::NotConverged => "not-converged",
            };
            writeln!(
                out,
                "# closure status={status} depth={depth} iterations={} rescan-stable={}",
                st.iterations, st.rescan_stable
            )
            .unwrap();
            for (k, ts) in &st.reachable {
                writeln!(out, "# reachable k={k} theories={}", ts.len()).unwrap();
            }
            let rec = ClosureRecords::from_state(&store, &st);
            out.push_str(&rec.base_text());
            out.push_str(&rec.facts_text());
        }
        Command::Spectrum { closure, theory, bound } => {
            let text = read(closure)?;
            let rec = parse_closure_file(&text)?;
            let induced = induce_system(&rec);
            let opts = SpectrumOptions {
                bound: *bound,
                scan: cfg.scan.max(*bound),
                window: cfg.window,
            };
            let digests = match theory {
                Some(d) => vec![d.clone()],
                None => induced.labels.clone(),
            };
            for d in digests {
                out.push_str(&spectrum(&induced, &d, opts)?.render());
            }
        }
        Command::Periodicity {
            system,
            label,
            scan,
            window,
            tree,
        } => {
            let sys = QuadrupleSystem::parse(&read(system)?)?;
            let scan = scan.unwrap_or(cfg.scan);
            let window = window.unwrap_or(cfg.window);
            match find_period(&sys, *label, scan, window)? {
                Some(c) => {
                    writeln!(out, "{}", c.line()).unwrap();
                    if *tree {
                        if let Some((t, _)) = &c.pump {
                            out.push_str(&t.dump());
                        }
                    }
                }
                None => {
                    ok = false;
                    writeln!(out, "periodicity label={label} inconclusive scan={scan} window={window}").unwrap();
                }
            }
        }
        Command::SystemReach { system, bound } => {
            let sys = QuadrupleSystem::parse(&read(system)?)?;
            let r = reach(&sys, *bound, cfg.slack);
            for (l, set) in r.sets().iter().enumerate() {
                let s: Vec<String> = set.iter().map(|n| n.to_string()).collect();
                writeln!(out, "reach label={l} sizes={}", s.join(",")).unwrap();
            }
            writeln!(out, "slack {} stable={}", r.slack, r.slack_stable).unwrap();
        }
        Command::Decompose { model, k, m } => {
            let g = read_model(model)?;
            match decompose(&g, *k, *m, cfg.separator_budget)? {
                Some(s) => {
                    debug_assert!(validate_split(&g, &s, *k, *m).is_ok());
                    writeln!(out, "{s}").unwrap();
                }
                None => writeln!(out, "NONE").unwrap(),
            }
        }
        Command::DecomposeProfile { family, from, to, k, m } => {
            let models = (*from..=*to)
                .map(|n| match family {
                    Family::Paths => Ok(Structure::path(n)),
                    Family::Incidence => incidence_graph(n),
                })
                .collect::<Result<Vec<_>>>()?;
            for (n, row) in (*from..).zip(decomposability_profile(&models, *k, *m, cfg.separator_budget)?) {
                match row.split {
                    Some(s) => writeln!(out, "profile n={n} size={} decomposable=yes {s}", row.size).unwrap(),
                    None => writeln!(out, "profile n={n} size={} decomposable=no", row.size).unwrap(),
                }
            }
        }
        Command::Incidence { n } => out.push_str(&serialize_structure(&incidence_graph(*n)?)),
        Command::Smalleq { model, depth, size_max } => {
            let m = read_model(model)?;
            let store = TheoryStore::new(m.vocab());
            match find_small_equivalent(&store, &m, *depth, *size_max, cfg.enumeration_bits)? {
                Some(w) => out.push_str(&serialize_structure(&w)),
                None => writeln!(out, "NONE").unwrap(),
            }
        }
        Command::Gaps {
            sizes,
            list,
            ratio,
            threshold,
        } => {
            let text = match (sizes, list) {
                (Some(p), _) => read(p)?,
                (None, Some(l)) => l.clone(),
                (None, None) => return Err(Error::Invalid("give --sizes or --list".into())),
            };
            let set: BTreeSet<usize> = parse_sizes(&text)?;
            let a = audit_gaps(&set, *ratio, *threshold)?;
            let v: Vec<String> = a.violations.iter().map(|(x, y)| format!("({x},{y})")).collect();
            writeln!(
                out,
                "gaps ratio={} threshold={} violations={} least-passing={}",
                a.ratio,
                a.threshold,
                if v.is_empty() { "-".to_string() } else { v.join(",") },
                a.least_passing
            )
            .unwrap();
        }
        Command::OracleEval { model, formula } => {
            let m = read_model(model)?;
            let f = read_formula(formula)?;
            writeln!(out, "{}", eval_with(&m, &f, &Env::default(), cfg.eval_bits)?).unwrap();
        }
        Command::OracleSpectrum {
            vocab,
            consts,
            max_size,
            formula,
        } => {
            let tau = parse_vocab(vocab)?.with_consts(*consts);
            let f = read_formula(formula)?;
            let s = spectrum_bruteforce(&f, &tau, *max_size, cfg.search_nodes)?;
            let v: Vec<String> = s.iter().map(|n| n.to_string()).collect();
            writeln!(out, "spectrum max={max_size} sizes={}", v.join(",")).unwrap();
        }
        Command::Selfcheck { seed } => {
            let r = selfcheck(SelfcheckOptions {
                seed: *seed,
                jobs: cfg.jobs,
            });
            ok = r.failures == 0;
            out.push_str(&r.text);
        }
    }
    Ok((out, ok))
}

fn parse_closure_file(text: &str) -> Result<ClosureRecords> {
    let mut base = String::new();
    let mut facts = String::new();
    for line in text.lines() {
        let t = line.trim_start();
        if t.starts_with("base ") {
            base.push_str(line);
            base.push('\n');
        } else if t.starts_with("fact ") {
            facts.push_str(line);
            facts.push('\n');
        }
    }
    ClosureRecords::parse(&base, &facts)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let mut cfg = match &cli.config {
        Some(p) => match Config::load(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
        },
        None => Config::default(),
    };
    if let Some(j) = cli.jobs {
        cfg.jobs = j.max(1);
    }
    match run(&cli, &cfg) {
        Ok((text, ok)) => {
            if let Some(path) = &cli.out {
                if let Err(e) = std::fs::write(path, &text) {
                    eprintln!("error: {}: {e}", path.display());
                    return ExitCode::from(1);
                }
            } else {
                print!("{text}");
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_budget() { 2 } else { 1 })
        }
    }
}
