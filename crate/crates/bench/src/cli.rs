//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 for usage or configuration errors, 3 when a
//! run fails.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use mfbo::acquisition::AcqKind;
use mfbo::expr::{Expr, Value};
use mfbo::orchestrator::{Objective, TraceRecord};
use mfbo::{Coord, Domain, FidelitySpace, Point};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::catalog::{benchmark, catalog, DEFAULT_NOISE_FRACTION};
use crate::regret::{best_values_by, regret_curve};
use crate::runner::{run_method, Method, MethodSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "mfbo", version, about = "Bayesian optimisation benchmarks and runs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimise a benchmark or a user-defined problem.
    Run(RunArgs),
    /// List benchmark names.
    List,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Bo,
    Random,
    Ea,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("problem").required(true).args(["benchmark", "config"])))]
pub struct RunArgs {
    /// Benchmark name (see `mfbo list`); `-noisy` and `-mf` suffixes select variants.
    #[arg(long)]
    pub benchmark: Option<String>,
    /// Domain config file (JSON).
    #[arg(long, requires = "objective")]
    pub config: Option<PathBuf>,
    /// Objective expression over the config's variable names (fidelity names included).
    #[arg(long, requires = "config", allow_hyphen_values = true)]
    pub objective: Option<String>,
    /// Number of evaluations; in multi-fidelity runs, capital of this many top-fidelity evaluations.
    #[arg(long, conflicts_with = "capital")]
    pub budget: Option<usize>,
    /// Capital as a sum of evaluation costs.
    #[arg(long)]
    pub capital: Option<f64>,
    /// Stop dispatching after this many seconds (BO only).
    #[arg(long)]
    pub time_budget_s: Option<f64>,
    #[arg(long, value_enum, default_value = "bo")]
    pub method: MethodArg,
    /// Number of parallel workers (BO only).
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Comma-separated acquisitions: ucb, ei, pi, ts, ttei, add-gp-ucb.
    #[arg(long, value_delimiter = ',')]
    pub acquisitions: Option<Vec<String>>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Trace output (JSON lines).
    #[arg(long, default_value = "trace.jsonl")]
    pub out: PathBuf,
    /// Regret summary output; defaults to the trace path with `.summary.jsonl`.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Observation noise sd as a fraction of the objective's empirical range.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Force the multi-fidelity variant on or off; by default a benchmark's
    /// `-mf` suffix or a config's fidelity section decides.
    #[arg(long, value_enum)]
    pub mf: Option<Switch>,
    /// Evaluate on a simulated clock (reproducible for any worker count).
    #[arg(long)]
    pub simulate: bool,
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Runtime(m) => write!(f, "run failed: {m}"),
        }
    }
}

/// Parses `args` (program name first), runs and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::List => {
            for name in catalog() {
                println!("{name}");
            }
            Ok(())
        }
        Command::Run(args) => execute(&args),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("mfbo: {e}");
            e.code()
        }
    }
}

type Truth = Arc<dyn Fn(&Point, Option<&[f64]>) -> f64 + Send + Sync>;

struct Problem {
    name: String,
    domain: Domain,
    fidelity: Option<FidelitySpace>,
    truth: Truth,
    optimum: Option<f64>,
    noise_sd: f64,
}

impl Problem {
    fn objective(&self, seed: u64) -> Arc<Objective> {
        let truth = Arc::clone(&self.truth);
        let noise = (self.noise_sd > 0.0).then(|| {
            (
                Normal::new(0.0, self.noise_sd).expect("positive sd"),
                Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
            )
        });
        Arc::new(move |p: &Point, z: Option<&[f64]>| {
            let mut v = truth(p, z);
            if let Some((dist, rng)) = &noise {
                let mut rng = rng.lock().map_err(|_| "noise stream poisoned".to_string())?;
                v += dist.sample(&mut *rng);
            }
            Ok(v)
        })
    }

    fn empirical_range(&self) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let top = self.fidelity.as_ref().map(|s| s.z_hf().to_vec());
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for _ in 0..100_000 {
            let v = (self.truth)(&self.domain.sample_uniform(&mut rng), top.as_deref());
            if v.is_finite() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if hi >= lo {
            hi - lo
        } else {
            0.0
        }
    }
}

fn load_problem(args: &RunArgs) -> Result<Problem, CliError> {
    let config_err = |e: &dyn std::fmt::Display| CliError::Config(e.to_string());
    let mut problem = if let Some(name) = &args.benchmark {
        let mut b = benchmark(name).map_err(|e| config_err(&e))?;
        match args.mf {
            Some(Switch::On) => b = b.multi_fidelity().map_err(|e| config_err(&e))?,
            Some(Switch::Off) => b.fidelity = None,
            None => {}
        }
        let bench = b.clone();
        Problem {
            name: b.full_name(),
            domain: b.domain,
            fidelity: b.fidelity,
            truth: Arc::new(move |p, z| bench.value_at(z, p)),
            optimum: b.optimum,
            noise_sd: b.noise_sd,
        }
    } else {
        let path = args.config.as_ref().expect("clap enforces the problem group");
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let (domain, parsed) = mfbo::config::parse_domain(&text).map_err(|e| config_err(&e))?;
        let mut fidelity = parsed.clone();
        match args.mf {
            Some(Switch::On) if fidelity.is_none() => {
                return Err(CliError::Config(
                    "--mf on needs a config with a fidelity section".into(),
                ))
            }
            Some(Switch::Off) => fidelity = None,
            _ => {}
        }
        let source = args
            .objective
            .as_deref()
            .expect("clap requires --objective with --config");
        let mut names: Vec<String> = parsed
            .as_ref()
            .map(|s| s.variables().iter().map(|v| v.name.clone()).collect())
            .unwrap_or_default();
        names.extend(domain.names());
        let expr = Expr::compile(source, &names).map_err(|e| config_err(&e))?;
        let top = parsed.as_ref().map(|s| s.z_hf().to_vec());
        let truth: Truth = Arc::new(move |p: &Point, z: Option<&[f64]>| {
            let mut vars: Vec<Value> = z
                .or(top.as_deref())
                .unwrap_or(&[])
                .iter()
                .map(|&v| Value::Num(v))
                .collect();
            vars.extend(p.coords.iter().map(Coord::to_value));
            expr.eval_num(&vars).unwrap_or(f64::NAN)
        });
        Problem {
            name: path.display().to_string(),
            domain,
            fidelity,
            truth,
            optimum: None,
            noise_sd: 0.0,
        }
    };
    if let Some(frac) = args.noise {
        if !(frac >= 0.0) {
            return Err(CliError::Config("--noise must be a non-negative fraction".into()));
        }
        problem.noise_sd = frac * problem.empirical_range();
    } else if problem.noise_sd > 0.0 {
        problem.noise_sd = DEFAULT_NOISE_FRACTION * problem.empirical_range();
    }
    Ok(problem)
}

fn method_spec(args: &RunArgs, problem: &Problem) -> Result<MethodSpec, CliError> {
    let method = match args.method {
        MethodArg::Bo => Method::Bo,
        MethodArg::Random => Method::Random,
        MethodArg::Ea => Method::Ea,
    };
    let top_cost = problem.fidelity.as_ref().map_or(1.0, |s| s.cost(s.z_hf()));
    let budget = match (args.budget, args.capital, args.time_budget_s) {
        (Some(n), _, _) => n as f64 * top_cost,
        (None, Some(c), _) => c,
        (None, None, Some(_)) if method == Method::Bo => f64::INFINITY,
        _ => return Err(CliError::Config("one of --budget or --capital is required".into())),
    };
    if !(budget > 0.0) {
        return Err(CliError::Config("the budget must be positive".into()));
    }
    if args.workers == 0 {
        return Err(CliError::Config("--workers must be at least 1".into()));
    }
    if let Some(t) = args.time_budget_s {
        if !(t > 0.0) {
            return Err(CliError::Config("--time-budget-s must be positive".into()));
        }
    }
    let acquisitions = match &args.acquisitions {
        None => None,
        Some(list) => Some(
            list.iter()
                .map(|s| AcqKind::parse(s.trim()))
                .collect::<mfbo::Result<Vec<_>>>()
                .map_err(|e| CliError::Config(e.to_string()))?,
        ),
    };
    let mut spec = MethodSpec::new(method, budget, args.seed);
    spec.workers = args.workers;
    spec.acquisitions = acquisitions;
    spec.simulate = args.simulate;
    spec.time_limit_s = args.time_budget_s;
    Ok(spec)
}

fn execute(args: &RunArgs) -> Result<(), CliError> {
    let problem = load_problem(args)?;
    let spec = method_spec(args, &problem)?;
    let trace = run_method(
        &problem.domain,
        problem.fidelity.as_ref(),
        problem.objective(args.seed),
        &spec,
    )
    .map_err(|e| match e {
        mfbo::Error::MalformedConfig(m) => CliError::Config(m),
        e => CliError::Runtime(e.to_string()),
    })?;

    let summary_path = args.summary.clone().unwrap_or_else(|| summary_path_for(&args.out));
    write_trace(&args.out, &trace)?;
    let top = problem.fidelity.as_ref().map(|s| s.z_hf());
    let best = best_values_by(&trace, top, |p| (problem.truth)(p, top));
    write_summary(&summary_path, &trace, &best, problem.optimum)?;

    let final_best = best.last().copied().flatten();
    let mut line = format!(
        "{} on {}: {} evaluations, capital {:.4}",
        args.method
            .to_possible_value()
            .map_or("?".into(), |v| v.get_name().to_string()),
        problem.name,
        trace.len(),
        trace.last().map_or(0.0, |r| r.capital_spent),
    );
    match (final_best, problem.optimum) {
        (Some(b), Some(opt)) => line.push_str(&format!(", best {b:.6}, simple regret {:.6}", (opt - b).max(0.0))),
        (Some(b), None) => line.push_str(&format!(", best {b:.6}")),
        (None, _) => line.push_str(", no top-fidelity value"),
    }
    println!("{line}");
    Ok(())
}

fn summary_path_for(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map_or_else(|| "trace".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.summary.jsonl"))
}

fn write_lines(path: &Path, lines: impl Iterator<Item = String>) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Runtime(format!("{}: {e}", path.display()));
    let mut f = std::io::BufWriter::new(fs::File::create(path).map_err(io)?);
    for l in lines {
        writeln!(f, "{l}").map_err(io)?;
    }
    f.flush().map_err(io)
}

fn write_trace(path: &Path, trace: &[TraceRecord]) -> Result<(), CliError> {
    write_lines(
        path,
        trace
            .iter()
            .map(|r| serde_json::to_string(r).expect("trace records serialise")),
    )
}

/// One line per completion: `{n, capital, simple_regret}` when the optimum is
/// known (`null` before the first top-fidelity value), else `{n, capital, best_value}`.
fn write_summary(
    path: &Path,
    trace: &[TraceRecord],
    best: &[Option<f64>],
    optimum: Option<f64>,
) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct RegretLine {
        n: usize,
        capital: f64,
        simple_regret: Option<f64>,
    }
    #[derive(Serialize)]
    struct BestLine {
        n: usize,
        capital: f64,
        best_value: Option<f64>,
    }
    let regret = optimum.map(|o| regret_curve(best, o));
    let lines = trace.iter().enumerate().map(|(i, r)| {
        let (n, capital) = (i + 1, r.capital_spent);
        match &regret {
            Some(reg) => serde_json::to_string(&RegretLine {
                n,
                capital,
                simple_regret: reg[i].is_finite().then_some(reg[i]),
            }),
            None => serde_json::to_string(&BestLine {
                n,
                capital,
                best_value: best[i],
            }),
        }
        .expect("summary lines serialise")
    });
    write_lines(path, lines)
}
