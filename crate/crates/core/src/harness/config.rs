//! Sweep configuration in a flat `key = value` text format.
//!
//! ```text
//! # desk sweep
//! problem  = rosenbr, arwhead:10, dixmaana:12:1200
//! n_scale  = 100          # n = n_scale * n_hat unless given per problem
//! tau      = 1, 0.1, 0.01
//! solver   = skoffar2, adagrad_norm
//! seed     = 0..10        # half-open range or comma list
//! eps      = 1e-3
//! output   = results.csv
//! ```
//!
//! Recognised keys: `problem`, `n_hat`, `n`, `n_scale`, `tau`, `solver`,
//! `p`, `seed` (or `seeds`), `eps`, `max_iter`, `nu0`, `mu_init`,
//! `vartheta`, `theta`, `xi`, `diagnostics`, `workers`, `output`,
//! `trace_dir`. List values are comma separated and expand into a
//! Cartesian product of cells. `n_hat` and `n` apply to problems listed
//! without explicit sizes; `solver = skoffar` expands over `p`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::baselines::{BaselineConfig, BaselineMethod};
use crate::problems::{default_dim, make_embedded, ProblemInstance};
use crate::solver::{default_nu0, SolverConfig, Variant, XiRule};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProblemSpec {
    pub name: String,
    pub n_hat: usize,
    pub n: usize,
}

impl ProblemSpec {
    pub fn new(name: &str, n_hat: usize, n: usize) -> Self {
        Self {
            name: name.to_string(),
            n_hat,
            n,
        }
    }

    pub fn instantiate(&self) -> Result<ProblemInstance> {
        make_embedded(&self.name, self.n_hat, self.n)
    }
}

#[derive(Debug, Clone)]
pub enum SolverSpec {
    Skoffar(SolverConfig),
    Baseline(BaselineConfig),
}

impl SolverSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Skoffar(c) => c.name(),
            Self::Baseline(c) => c.method.name(),
        }
    }

    /// Whether the method's cost depends on `τ`.
    pub fn is_sketched(&self) -> bool {
        matches!(self, Self::Skoffar(_))
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub problems: Vec<ProblemSpec>,
    pub taus: Vec<f64>,
    /// Solver templates; `tau` and `seed` are set per cell.
    pub solvers: Vec<SolverSpec>,
    pub seeds: Vec<u64>,
    pub eps: f64,
    /// Worker threads; 0 uses all available cores.
    pub workers: usize,
    pub output: Option<PathBuf>,
    /// Directory for per-run trace CSVs.
    pub trace_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// SKOFFAR2 on the five desk problems at `n = n_scale · n̂`,
    /// `τ ∈ {1, 0.1, 0.05, 0.01}`, seeds 0..10.
    pub fn desk(n_scale: usize) -> Self {
        let problems = DESK_PROBLEMS
            .iter()
            .map(|p| {
                let n_hat = default_dim(p).expect("registry problem");
                ProblemSpec::new(p, n_hat, n_scale * n_hat)
            })
            .collect();
        Self {
            problems,
            taus: vec![1.0, 0.1, 0.05, 0.01],
            solvers: vec![SolverSpec::Skoffar(SolverConfig::skoffar(2, 1.0, 0))],
            seeds: (0..10).collect(),
            eps: 1e-3,
            workers: 0,
            output: None,
            trace_dir: None,
        }
    }

    /// The sweep run when no configuration file is given: the desk problems
    /// at `n = 10 n̂` with SKOFFAR2, ADAGRAD-Norm and ADAM-Norm.
    pub fn default_sweep() -> Self {
        let mut c = Self::desk(10);
        c.solvers.push(SolverSpec::Baseline(BaselineConfig::new(BaselineMethod::AdagradNorm)));
        c.solvers.push(SolverSpec::Baseline(BaselineConfig::new(BaselineMethod::AdamNorm)));
        c
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.problems.is_empty() {
            return bad("no problems");
        }
        if self.taus.is_empty() {
            return bad("no tau values");
        }
        if self.solvers.is_empty() {
            return bad("no solvers");
        }
        if self.seeds.is_empty() {
            return bad("no seeds");
        }
        if let Some(t) = self.taus.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
            return Err(Error::InvalidArgument(format!("tau must lie in (0, 1], got {t}")));
        }
        if !(self.eps > 0.0) {
            return bad("eps must be positive");
        }
        for p in &self.problems {
            if p.n < p.n_hat {
                return Err(Error::InvalidArgument(format!(
                    "{}: n = {} is below n_hat = {}",
                    p.name, p.n, p.n_hat
                )));
            }
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                line: line_no,
                message: format!("expected 'key = value', got '{line}'"),
            })?;
            let key = match key.trim() {
                "seeds" => "seed".to_string(),
                k => k.to_string(),
            };
            if !KEYS.contains(&key.as_str()) {
                return Err(Error::Config {
                    line: line_no,
                    message: format!("unknown key '{key}'"),
                });
            }
            if entries.contains_key(&key) {
                return Err(Error::Config {
                    line: line_no,
                    message: format!("duplicate key '{key}'"),
                });
            }
            entries.insert(key, (line_no, value.trim().to_string()));
        }
        let kv = Entries(entries);

        let n_scale: usize = kv.scalar("n_scale")?.unwrap_or(100);
        let n_hats: Option<Vec<usize>> = kv.list("n_hat")?;
        let ns: Option<Vec<usize>> = kv.list("n")?;
        let mut problems = Vec::new();
        for (line, item) in kv.items("problem")? {
            let parts: Vec<&str> = item.split(':').map(str::trim).collect();
            let name = parts[0];
            let parse_part = |s: &str| -> Result<usize> {
                s.parse().map_err(|_| Error::Config {
                    line,
                    message: format!("bad size '{s}' in '{item}'"),
                })
            };
            let explicit_hat = parts.get(1).map(|s| parse_part(s)).transpose()?;
            let explicit_n = parts.get(2).map(|s| parse_part(s)).transpose()?;
            if parts.len() > 3 {
                return Err(Error::Config {
                    line,
                    message: format!("expected name[:n_hat[:n]], got '{item}'"),
                });
            }
            let hats = match (explicit_hat, &n_hats) {
                (Some(h), _) => vec![h],
                (None, Some(h)) => h.clone(),
                (None, None) => vec![default_dim(name).map_err(|e| Error::Config {
                    line,
                    message: e.to_string(),
                })?],
            };
            for h in hats {
                let dims = match (explicit_n, &ns) {
                    (Some(n), _) => vec![n],
                    (None, Some(n)) => n.clone(),
                    (None, None) => vec![n_scale * h],
                };
                for n in dims {
                    problems.push(ProblemSpec::new(name, h, n));
                }
            }
        }

        let eps = kv.scalar("eps")?.unwrap_or(1e-3);
        let max_iter: Option<usize> = kv.scalar("max_iter")?;
        let diagnostics = kv.scalar::<bool>("diagnostics")?.unwrap_or(false);
        let ps: Vec<usize> = kv.list("p")?.unwrap_or_else(|| vec![2]);
        let nu0: Option<f64> = kv.scalar("nu0")?;
        let mut solvers = Vec::new();
        let solver_items = kv.items("solver")?;
        let solver_items = if solver_items.is_empty() {
            vec![(0, "skoffar2".to_string())]
        } else {
            solver_items
        };
        for (line, item) in solver_items {
            let cfg_for = |p: usize, variant: Variant| -> Result<SolverConfig> {
                let mut c = match variant {
                    Variant::SkoffarP => SolverConfig::skoffar(p, 1.0, 0),
                    Variant::Skoffar2B => SolverConfig::skoffar_2b(1.0, 0),
                };
                c.eps = eps;
                c.max_iter = max_iter;
                c.diagnostics = diagnostics;
                c.nu0 = nu0.unwrap_or(default_nu0(c.recurrence_degree()));
                if let Some(v) = kv.scalar("mu_init")? {
                    c.mu_init = v;
                }
                if let Some(v) = kv.scalar("vartheta")? {
                    c.vartheta = v;
                }
                if let Some(v) = kv.scalar::<f64>("theta")? {
                    c.theta = Some(v);
                }
                if let Some(v) = kv.scalar("xi")? {
                    c.xi_rule = XiRule::Constant(v);
                }
                Ok(c)
            };
            match item.as_str() {
                "skoffar" => {
                    for &p in &ps {
                        solvers.push(SolverSpec::Skoffar(cfg_for(p, Variant::SkoffarP)?));
                    }
                }
                "skoffar1" => solvers.push(SolverSpec::Skoffar(cfg_for(1, Variant::SkoffarP)?)),
                "skoffar2" => solvers.push(SolverSpec::Skoffar(cfg_for(2, Variant::SkoffarP)?)),
                "skoffar2b" => solvers.push(SolverSpec::Skoffar(cfg_for(1, Variant::Skoffar2B)?)),
                other => {
                    let method = BaselineMethod::parse(other).map_err(|_| Error::Config {
                        line,
                        message: format!("unknown solver '{other}'"),
                    })?;
                    let mut b = BaselineConfig::new(method);
                    b.eps = eps;
                    b.max_iter = max_iter;
                    b.diagnostics = diagnostics;
                    solvers.push(SolverSpec::Baseline(b));
                }
            }
        }

        let seeds = match kv.0.get("seed") {
            None => (0..10).collect(),
            Some((line, v)) => parse_seeds(v).map_err(|message| Error::Config { line: *line, message })?,
        };
        let config = Self {
            problems,
            taus: kv.list("tau")?.unwrap_or_else(|| vec![1.0]),
            solvers,
            seeds,
            eps,
            workers: kv.scalar("workers")?.unwrap_or(0),
            output: kv.0.get("output").map(|(_, v)| PathBuf::from(v)),
            trace_dir: kv.0.get("trace_dir").map(|(_, v)| PathBuf::from(v)),
        };
        config.validate()?;
        Ok(config)
    }
}

/// Problems of the desk-scale sweeps.
pub const DESK_PROBLEMS: [&str; 5] = ["rosenbr", "arwhead", "broyden3d", "tridia", "dixmaana"];

const KEYS: &[&str] = &[
    "problem",
    "n_hat",
    "n",
    "n_scale",
    "tau",
    "solver",
    "p",
    "seed",
    "eps",
    "max_iter",
    "nu0",
    "mu_init",
    "vartheta",
    "theta",
    "xi",
    "diagnostics",
    "workers",
    "output",
    "trace_dir",
];

struct Entries(BTreeMap<String, (usize, String)>);

impl Entries {
    fn items(&self, key: &str) -> Result<Vec<(usize, String)>> {
        Ok(match self.0.get(key) {
            None => Vec::new(),
            Some((line, v)) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| (*line, s.to_string()))
                .collect(),
        })
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        let Some((line, _)) = self.0.get(key) else {
            return Ok(None);
        };
        let items = self.items(key)?;
        if items.is_empty() {
            return Err(Error::Config {
                line: *line,
                message: format!("'{key}' is empty"),
            });
        }
        items
            .into_iter()
            .map(|(line, s)| {
                s.parse().map_err(|_| Error::Config {
                    line,
                    message: format!("bad value '{s}' for '{key}'"),
                })
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    fn scalar<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        let Some((line, v)) = self.0.get(key) else {
            return Ok(None);
        };
        v.parse().map(Some).map_err(|_| Error::Config {
            line: *line,
            message: format!("bad value '{v}' for '{key}'"),
        })
    }
}

fn parse_seeds(v: &str) -> std::result::Result<Vec<u64>, String> {
    if let Some((a, b)) = v.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| format!("bad seed range '{v}'"))?;
        let b: u64 = b.trim().parse().map_err(|_| format!("bad seed range '{v}'"))?;
        if b <= a {
            return Err(format!("empty seed range '{v}'"));
        }
        return Ok((a..b).collect());
    }
    v.split(',')
        .map(|s| s.trim().parse().map_err(|_| format!("bad seed '{s}'")))
        .collect()
}
