use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use sketchreg_core::baselines::{baseline_run, BaselineConfig, BaselineMethod};
use sketchreg_core::harness::{
    emit_trace_plot_data, plot_data_csv, run_experiment, write_outputs, Acceptance, AcceptanceOptions,
    ExperimentConfig, ProblemSpec, SolverSpec,
};
use sketchreg_core::problems::default_dim;
use sketchreg_core::sketch::{derive_seed, estimate_true_probability, kappa_bound, operator_norm, SketchOperator};
use sketchreg_core::solver::{self, default_nu0, Fault, RunTrace, SolverConfig};
use sketchreg_core::Error;

#[derive(Parser)]
#[command(name = "sketchreg", version, about = "Random-subspace adaptive regularisation without objective values")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single run; writes the trace CSV.
    Run(RunArgs),
    /// Runs a sweep from a key-value config file (or the default sweep).
    Sweep(SweepArgs),
    /// Runs SKOFFAR and the first-order baselines side by side.
    Compare(CompareArgs),
    /// Runs the acceptance suite.
    Check(CheckArgs),
    /// Monte-Carlo estimates for Gaussian sketches.
    ProbeEmbedding(ProbeArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    #[value(name = "skoffar_p")]
    SkoffarP,
    #[value(name = "skoffar_2b")]
    Skoffar2b,
    #[value(name = "adagrad_norm")]
    AdagradNorm,
    #[value(name = "adam_norm")]
    AdamNorm,
}

#[derive(Args, Clone)]
struct ProblemArgs {
    #[arg(long, default_value = "rosenbr")]
    problem: String,
    /// Intrinsic dimension; defaults to the problem's standard size.
    #[arg(long)]
    nhat: Option<usize>,
    /// Ambient dimension; defaults to 100·n̂ (1000·n̂ with --full-scale).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    full_scale: bool,
}

impl ProblemArgs {
    fn spec(&self) -> Result<ProblemSpec, Error> {
        let n_hat = match self.nhat {
            Some(h) => h,
            None => default_dim(&self.problem)?,
        };
        let scale = if self.full_scale { 1000 } else { 100 };
        Ok(ProblemSpec::new(&self.problem, n_hat, self.n.unwrap_or(scale * n_hat)))
    }
}

#[derive(Args, Clone)]
struct SolverArgs {
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    #[arg(long, default_value_t = 2)]
    p: usize,
    #[arg(long, value_enum, default_value = "skoffar_p")]
    variant: VariantArg,
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Initial ν; defaults to 100 for p = 1 and 1 otherwise.
    #[arg(long)]
    nu0: Option<f64>,
    /// Record f(x_k) for plotting (counted, never used by the solver).
    #[arg(long)]
    diagnostics: bool,
}

impl SolverArgs {
    fn skoffar(&self, variant: VariantArg, seed: u64) -> SolverConfig {
        let mut c = match variant {
            VariantArg::Skoffar2b => SolverConfig::skoffar_2b(self.tau, seed),
            _ => SolverConfig::skoffar(self.p, self.tau, seed),
        };
        c.eps = self.eps;
        c.max_iter = self.max_iter;
        c.diagnostics = self.diagnostics;
        c.nu0 = self.nu0.unwrap_or(default_nu0(c.recurrence_degree()));
        c
    }

    fn baseline(&self, method: BaselineMethod, seed: u64) -> BaselineConfig {
        BaselineConfig {
            eps: self.eps,
            max_iter: self.max_iter,
            diagnostics: self.diagnostics,
            seed,
            ..BaselineConfig::new(method)
        }
    }

    fn spec(&self, variant: VariantArg) -> SolverSpec {
        match variant {
            VariantArg::AdagradNorm => SolverSpec::Baseline(self.baseline(BaselineMethod::AdagradNorm, 0)),
            VariantArg::AdamNorm => SolverSpec::Baseline(self.baseline(BaselineMethod::AdamNorm, 0)),
            v => SolverSpec::Skoffar(self.skoffar(v, 0)),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trace CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write (w₁ cost, f) plot data here; needs --diagnostics.
    #[arg(long)]
    plot_out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Key-value config file; the built-in default sweep when absent.
    config: Option<PathBuf>,
    /// Results CSV path; overrides the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Without a config file, run the desk problems at n = 1000·n̂.
    #[arg(long)]
    full_scale: bool,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of consecutive seeds starting at --seed.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    None,
    FreezeNu,
    QueryObjective,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    /// Criteria to run, e.g. `1,6,12`; all when absent.
    #[arg(long, value_delimiter = ',')]
    only: Vec<u8>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum, default_value = "none", hide = true)]
    fault: FaultArg,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Sketch rows ℓ.
    #[arg(long, default_value_t = 20)]
    ell: usize,
    /// Rank of the random test matrix M.
    #[arg(long, default_value_t = 1)]
    rank: usize,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 500)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are run failures; exit code 2 is reserved for
            // acceptance failures
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Check(a) => return cmd_check(a),
        Command::ProbeEmbedding(a) => cmd_probe(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn summary(t: &RunTrace) -> String {
    format!(
        "{} on {} (n={}, ell={}, seed={}): {} iterations, {:?}, |g|={:.3e}, w1 cost {:.4}, w2 cost {:.4}, f calls {}",
        t.solver,
        t.problem,
        t.n,
        t.ell,
        t.seed,
        t.iterations(),
        t.termination,
        t.final_gnorm(),
        t.iterations() as f64 * t.w1,
        t.iterations() as f64 * t.w2,
        t.f_calls
    )
}

fn cmd_run(a: RunArgs) -> Result<ExitCode, Error> {
    let problem = a.problem.spec()?.instantiate()?;
    let trace = match a.solver.variant {
        VariantArg::AdagradNorm => baseline_run(&problem, &a.solver.baseline(BaselineMethod::AdagradNorm, a.seed))?,
        VariantArg::AdamNorm => baseline_run(&problem, &a.solver.baseline(BaselineMethod::AdamNorm, a.seed))?,
        v => solver::run(&problem, &a.solver.skoffar(v, a.seed))?,
    };
    match &a.out {
        Some(path) => trace.write_csv(path)?,
        None => std::io::stdout().write_all(trace.to_csv().as_bytes())?,
    }
    if let Some(path) = &a.plot_out {
        std::fs::write(path, plot_data_csv(&emit_trace_plot_data(&trace)?))?;
    }
    eprintln!("{}", summary(&trace));
    Ok(ExitCode::SUCCESS)
}

fn report_sweep(config: &ExperimentConfig, out: Option<PathBuf>) -> Result<ExitCode, Error> {
    let result = run_experiment(config)?;
    match out.or_else(|| config.output.clone()) {
        Some(path) => {
            write_outputs(config, &result, &path)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{}", result.to_csv()),
    }
    let failed: Vec<_> = result.runs.iter().filter(|r| r.trace.is_err()).collect();
    for r in &failed {
        eprintln!(
            "run failed: {}: {}",
            r.cell.file_stem(),
            r.trace.as_ref().err().map(ToString::to_string).unwrap_or_default()
        );
    }
    Ok(if failed.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_sweep(a: SweepArgs) -> Result<ExitCode, Error> {
    let mut config = match &a.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None if a.full_scale => {
            let mut c = ExperimentConfig::desk(1000);
            c.solvers.push(SolverSpec::Baseline(BaselineConfig::new(BaselineMethod::AdagradNorm)));
            c.solvers.push(SolverSpec::Baseline(BaselineConfig::new(BaselineMethod::AdamNorm)));
            c
        }
        None => ExperimentConfig::default_sweep(),
    };
    if let Some(w) = a.workers {
        config.workers = w;
    }
    report_sweep(&config, a.out)
}

fn cmd_compare(a: CompareArgs) -> Result<ExitCode, Error> {
    let mut solvers = vec![a.solver.spec(VariantArg::SkoffarP)];
    if a.solver.variant == VariantArg::Skoffar2b {
        solvers.push(a.solver.spec(VariantArg::Skoffar2b));
    }
    solvers.push(a.solver.spec(VariantArg::AdagradNorm));
    solvers.push(a.solver.spec(VariantArg::AdamNorm));
    let config = ExperimentConfig {
        problems: vec![a.problem.spec()?],
        taus: vec![a.solver.tau],
        solvers,
        seeds: (a.seed..a.seed + a.seeds.max(1)).collect(),
        eps: a.solver.eps,
        workers: 0,
        output: None,
        trace_dir: None,
    };
    report_sweep(&config, a.out)
}

fn cmd_check(a: CheckArgs) -> ExitCode {
    let opts = AcceptanceOptions {
        seeds: a.seeds,
        workers: a.workers.unwrap_or(0),
        fault: match a.fault {
            FaultArg::None => Fault::None,
            FaultArg::FreezeNu => Fault::FreezeNu,
            FaultArg::QueryObjective => Fault::QueryObjective,
        },
        ..AcceptanceOptions::default()
    };
    let suite = Acceptance::new(opts);
    let passed = if a.only.is_empty() {
        let report = suite.run_all();
        println!("{report}");
        report.passed()
    } else {
        let mut ok = true;
        for id in a.only {
            let r = suite.criterion(id);
            println!("{r}");
            ok &= r.passed;
        }
        ok
    };
    if passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn cmd_probe(a: ProbeArgs) -> Result<ExitCode, Error> {
    if a.rank == 0 || a.rank > a.n || a.ell == 0 || a.ell > a.n {
        return Err(Error::InvalidArgument("need 1 <= rank <= n and 1 <= ell <= n".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let m = DMatrix::from_fn(a.n, a.rank, |_, _| rng.sample::<f64, _>(StandardNormal));
    let est = estimate_true_probability(a.ell, a.n, &m, a.alpha, a.trials, a.seed)?;
    println!(
        "embedding: n={} ell={} rank={} alpha={} trials={} estimate={:.4} wilson95=[{:.4}, {:.4}] rank<ell(1-alpha): {}",
        a.n,
        a.ell,
        est.rank,
        a.alpha,
        est.trials,
        est.estimate,
        est.interval.0,
        est.interval.1,
        est.rank_condition_holds
    );
    let bound = kappa_bound(a.ell, a.n);
    let mut within = 0;
    for i in 0..a.trials as u64 {
        let s = SketchOperator::from_seed(a.ell, a.n, derive_seed(a.seed ^ 0x5eed, i))?;
        within += usize::from(operator_norm(&s)? <= bound);
    }
    println!(
        "norm bound: |S| <= {bound:.4} in {within}/{} samples ({:.4})",
        a.trials,
        within as f64 / a.trials as f64
    );
    Ok(ExitCode::SUCCESS)
}
