use std::path::Path;

use mso_core::decomp::DEFAULT_SEPARATOR_BUDGET;
use mso_core::oracle::{DEFAULT_EVAL_BITS, DEFAULT_SEARCH_NODES};
use mso_core::structures::DEFAULT_ENUMERATION_BITS;
use mso_core::theory::DEFAULT_FORMAL_BUDGET;
use mso_core::composition::DEFAULT_SCHEME_BUDGET;
use mso_core::{Error, Result};

/// Budgets and defaults, read from optional `key = value` lines.
#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub n_max: usize,
    pub k_star: usize,
    pub enumeration_bits: usize,
    pub formal_budget: u128,
    pub scheme_budget: u128,
    pub eval_bits: usize,
    pub search_nodes: u64,
    pub separator_budget: u128,
    pub max_iter: usize,
    pub slack: Option<usize>,
    pub scan: usize,
    pub window: usize,
    pub jobs: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            n_max: 3,
            k_star: 2,
            enumeration_bits: DEFAULT_ENUMERATION_BITS,
            formal_budget: DEFAULT_FORMAL_BUDGET,
            scheme_budget: DEFAULT_SCHEME_BUDGET,
            eval_bits: DEFAULT_EVAL_BITS,
            search_nodes: DEFAULT_SEARCH_NODES,
            separator_budget: DEFAULT_SEPARATOR_BUDGET,
            max_iter: 64,
            slack: None,
            scan: 200,
            window: 16,
            jobs: 1,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
        Config::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Config> {
        let mut c = Config::default();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let perr = |m: String| Error::parse(no + 1, m);
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| perr("expected key = value".into()))?;
            macro_rules! num {
                () => {
                    value.parse().map_err(|_| perr(format!("bad value for {key}: `{value}`")))?
                };
            }
            match key {
                "n_max" => c.n_max = num!(),
                "k_star" => c.k_star = num!(),
                "enumeration_bits" => c.enumeration_bits = num!(),
                "formal_budget" => c.formal_budget = num!(),
                "scheme_budget" => c.scheme_budget = num!(),
                "eval_bits" => c.eval_bits = num!(),
                "search_nodes" => c.search_nodes = num!(),
                "separator_budget" => c.separator_budget = num!(),
                "max_iter" => c.max_iter = num!(),
                "slack" => c.slack = Some(num!()),
                "scan" => c.scan = num!(),
                "window" => c.window = num!(),
                "jobs" => c.jobs = num!(),
                other => return Err(perr(format!("unknown key `{other}`"))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("enumeration_bits", self.enumeration_bits as u128),
            ("formal_budget", self.formal_budget),
            ("scheme_budget", self.scheme_budget),
            ("eval_bits", self.eval_bits as u128),
            ("search_nodes", self.search_nodes as u128),
            ("separator_budget", self.separator_budget),
            ("max_iter", self.max_iter as u128),
            ("scan", self.scan as u128),
            ("window", self.window as u128),
            ("jobs", self.jobs as u128),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Invalid(format!("config {name} must be positive")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_overrides_and_rejects_zero() {
        let c = Config::parse("# budgets\nscan = 100\njobs=4\nslack = 3\n").unwrap();
        assert_eq!((c.scan, c.jobs, c.slack), (100, 4, Some(3)));
        assert!(Config::parse("jobs = 0").is_err());
        assert!(Config::parse("colour = 1").is_err());
        assert!(Config::parse("scan 5").is_err());
    }
}
