//! `mfbn`: random-network experiments, the bars learning run, the oracle validation suite and
//! single-network solves.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mfbn::exact::{exact_log_partition, ENUMERATION_BOUND};
use mfbn::format::{read_network, serialize, write_network};
use mfbn::harness::{
    random_layered, run_learning, run_noisyor_table, run_sigmoid_table, run_validation_suite,
    write_histograms, write_history, write_raw, write_summary, ClampPolicy, ErrorStats,
    ExperimentConfig, LearningConfig, ValidationConfig,
};
use mfbn::learning::{read_dataset, write_dataset};
use mfbn::meanfield::{error_metric, solve_fixed_point};
use mfbn::{ActivationKind, ClampContext, Error, Scheme, SolverOptions};

const EXIT_RUNTIME: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_CONFIG: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "mfbn", version, about = "Mean-field approximations for belief networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate one random layered network and write it in TOML form.
    Gen(GenArgs),
    /// Sigmoid networks clamped to zeros: error of each scheme against exact ln Z.
    TableSigmoid(TableArgs),
    /// Noisy-or networks clamped at their largest and smallest ln Z states.
    TableNoisyor(TableArgs),
    /// Train a layered network on bars images and record the exact log-likelihood.
    LearnBars(LearnArgs),
    /// Run the oracle property suite; exits with 2 if any property fails.
    Validate(ValidateArgs),
    /// Solve one network file for one clamp and scheme.
    Solve(SolveArgs),
}

#[derive(Args, Debug, Clone)]
struct SolverFlags {
    /// Sup-norm tolerance of the fixed-point iteration.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
}

impl SolverFlags {
    fn options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            ..Default::default()
        }
    }
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, default_value = "2:4:6", value_parser = parse_topology)]
    topology: Topology,
    #[arg(long, default_value = "sigmoid")]
    activation: ActivationKind,
    #[arg(long, allow_hyphen_values = true, value_parser = parse_range)]
    weight_range: Option<(f64, f64)>,
    /// Defaults to the weight range.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_range)]
    bias_range: Option<(f64, f64)>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Which network of the seeded sequence.
    #[arg(long, default_value_t = 0)]
    index: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TableArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    n_networks: usize,
    /// `g11`, `g12`, `g22`, a comma list, or `all`.
    #[arg(long, default_value = "all")]
    scheme: String,
    #[arg(long, allow_hyphen_values = true, value_parser = parse_range)]
    weight_range: Option<(f64, f64)>,
    /// Defaults to the weight range.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_range)]
    bias_range: Option<(f64, f64)>,
    #[arg(long, default_value = "2:4:6", value_parser = parse_topology)]
    topology: Topology,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads; all cores by default.
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args, Debug)]
struct LearnArgs {
    #[arg(long, default_value = "sigmoid")]
    activation: ActivationKind,
    #[arg(long, default_value = "1:8:16", value_parser = parse_topology)]
    topology: Topology,
    #[arg(long, default_value_t = 500)]
    patterns: usize,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    /// Step size on the per-pattern mean gradient; a tuned default per activation.
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, default_value = "g12")]
    scheme: Scheme,
    /// Seed of the generated dataset and of the initial weights.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    init_scale: f64,
    #[arg(long, default_value_t = 1)]
    eval_every: usize,
    /// Read patterns from this file instead of generating bars.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// Largest random network drawn.
    #[arg(long, default_value_t = 8)]
    size_bound: usize,
    /// Random networks per activation.
    #[arg(long, default_value_t = 20)]
    cases: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Flip the sign of one closed-form term to demonstrate the checks fail.
    #[arg(long)]
    mutation: bool,
    /// Directory for `report.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Network file.
    #[arg(long)]
    net: PathBuf,
    /// Observed visible values as a 0/1 string in visible order; all zeros by default.
    #[arg(long)]
    clamp: Option<String>,
    #[arg(long, default_value = "g12")]
    scheme: Scheme,
    #[command(flatten)]
    solver: SolverFlags,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| format!("expected LO:HI, got `{s}`"))?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("bad lower bound `{lo}`: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("bad upper bound `{hi}`: {e}"))?;
    if !(lo <= hi) {
        return Err(format!("empty range {lo}:{hi}"));
    }
    Ok((lo, hi))
}

/// Layer sizes from the top down, written `A:B:C`.
#[derive(Debug, Clone)]
struct Topology(Vec<usize>);

fn parse_topology(s: &str) -> Result<Topology, String> {
    s.split(':')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("bad layer size `{p}`: {e}")))
        .collect::<Result<_, _>>()
        .map(Topology)
}

fn parse_bits(s: &str) -> Result<Vec<u8>, Error> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(Error::Config(format!("clamp contains `{other}`, expected 0 or 1"))),
        })
        .collect()
}

fn code_for(e: &Error) -> u8 {
    match e {
        Error::Io(_) | Error::NotConverged { .. } => EXIT_RUNTIME,
        _ => EXIT_CONFIG,
    }
}

fn with_jobs<T>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, Error>
where
    T: Send,
{
    match jobs {
        None => Ok(f()),
        Some(0) => Err(Error::Config("--jobs must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| Error::Config(format!("thread pool: {e}"))),
    }
}

fn ensure_dir(dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))
}

fn gen(args: GenArgs) -> Result<u8, Error> {
    let weight_range = args.weight_range.unwrap_or(match args.activation {
        ActivationKind::Sigmoid => (-1.0, 1.0),
        ActivationKind::NoisyOr => (0.0, 0.25),
    });
    let cfg = ExperimentConfig {
        topology: args.topology.0,
        activation: args.activation,
        weight_range,
        bias_range: args.bias_range.unwrap_or(weight_range),
        n_networks: 1,
        master_seed: args.seed,
        schemes: vec![Scheme::G11],
        clamp_policy: ClampPolicy::Zeros,
        solver: SolverOptions::default(),
    };
    let net = random_layered(&cfg, args.index)?;
    match args.out {
        Some(path) => write_network(&path, &net)?,
        None => print!("{}", serialize(&net)),
    }
    Ok(0)
}

fn table(args: TableArgs, activation: ActivationKind) -> Result<u8, Error> {
    let base = match activation {
        ActivationKind::Sigmoid => ExperimentConfig::sigmoid(1.0),
        ActivationKind::NoisyOr => ExperimentConfig::noisy_or(0.0, 0.25),
    };
    let weight_range = args.weight_range.unwrap_or(base.weight_range);
    let cfg = ExperimentConfig {
        topology: args.topology.0,
        weight_range,
        bias_range: args.bias_range.unwrap_or(weight_range),
        n_networks: args.n_networks,
        master_seed: args.seed,
        schemes: Scheme::parse_list(&args.scheme)?,
        solver: args.solver.options(),
        ..base
    };
    cfg.validate()?;
    ensure_dir(&args.out)?;
    let (records, stats) = with_jobs(args.jobs, || match activation {
        ActivationKind::Sigmoid => run_sigmoid_table(&cfg),
        ActivationKind::NoisyOr => run_noisyor_table(&cfg),
    })??;
    write_raw(&args.out.join("raw.csv"), &records)?;
    write_summary(&args.out.join("summary.csv"), &stats)?;
    write_histograms(&args.out, &stats)?;
    print_summary(&stats);
    Ok(0)
}

fn print_summary(stats: &ErrorStats) {
    println!("scheme clamp   mean_err       n  unconverged     cycles");
    for c in &stats.cells {
        println!(
            "{:<6} {:<5} {:>10.5} {:>7} {:>12} {:>10}",
            c.scheme,
            c.clamp.name(),
            c.mean_err,
            c.n,
            c.unconverged,
            c.cycles
        );
    }
}

fn learn(args: LearnArgs) -> Result<u8, Error> {
    let mut cfg = LearningConfig::bars(args.activation);
    cfg.topology = args.topology.0;
    cfg.n_patterns = args.patterns;
    cfg.data_seed = args.seed;
    cfg.init_seed = args.seed;
    cfg.init_scale = args.init_scale;
    cfg.train.epochs = args.epochs;
    cfg.train.scheme = args.scheme;
    cfg.train.seed = args.seed;
    cfg.train.eval_every = args.eval_every;
    cfg.train.solver = args.solver.options();
    if let Some(lr) = args.lr {
        cfg.train.learning_rate = lr;
    }
    cfg.train.validate(args.activation)?;
    let data = match &args.data {
        Some(path) => read_dataset(path)?,
        None => cfg.dataset()?,
    };
    ensure_dir(&args.out)?;
    write_dataset(&args.out.join("data.txt"), &data)?;
    let (net, history) = with_jobs(args.jobs, || run_learning(&cfg, Some(&data)))??;
    write_history(&args.out.join("history.csv"), &history)?;
    write_network(&args.out.join("model.toml"), &net)?;
    if let (Some(first), Some(last)) = (history.records.first(), history.records.last()) {
        println!(
            "mean true log-likelihood: epoch {} {:.5}, epoch {} {:.5}",
            first.epoch, first.mean_true_loglik, last.epoch, last.mean_true_loglik
        );
    }
    Ok(0)
}

fn validate(args: ValidateArgs) -> Result<u8, Error> {
    let report = run_validation_suite(&ValidationConfig {
        size_bound: args.size_bound,
        cases: args.cases,
        seed: args.seed,
        mutation: args.mutation,
    })?;
    for p in &report.properties {
        println!(
            "{} {:<20} cases {:>4}  failures {:>3}  max deviation {:.3e} (tol {:.0e})",
            if p.passed() { "PASS" } else { "FAIL" },
            p.name,
            p.cases,
            p.failures,
            p.max_deviation,
            p.tolerance
        );
    }
    if let Some(dir) = &args.out {
        ensure_dir(dir)?;
        let json = serde_json::to_string_pretty(&report)
            .map_err(|e| Error::Io(format!("report: {e}")))?;
        fs::write(dir.join("report.json"), json)?;
    }
    Ok(if report.passed() { 0 } else { EXIT_VALIDATION })
}

fn solve(args: SolveArgs) -> Result<u8, Error> {
    let net = read_network(&args.net)?;
    let values = match &args.clamp {
        Some(s) => parse_bits(s)?,
        None => vec![0; net.visible().len()],
    };
    let ctx = ClampContext::clamped(&net, &values)?;
    let res = solve_fixed_point(&net, &ctx, args.scheme, &args.solver.options())?;
    println!("scheme      {}", args.scheme);
    println!("g_hat       {:.12}", res.objective);
    if ctx.n_free() <= ENUMERATION_BOUND {
        let ln_z = exact_log_partition(&ctx)?;
        println!("ln_z_exact  {ln_z:.12}");
        match error_metric(res.objective, ln_z) {
            Ok(err) => println!("err         {err:.6e}"),
            Err(e) => println!("err         n/a ({e})"),
        }
    }
    println!("converged   {}", res.converged);
    println!("iterations  {}", res.iterations);
    println!("restarts    {}", res.restarts);
    let u: Vec<String> = res.u.values().iter().map(|x| format!("{x:.8}")).collect();
    println!("u           {}", u.join(" "));
    Ok(if res.converged { 0 } else { EXIT_RUNTIME })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Gen(a) => gen(a),
        Command::TableSigmoid(a) => table(a, ActivationKind::Sigmoid),
        Command::TableNoisyor(a) => table(a, ActivationKind::NoisyOr),
        Command::LearnBars(a) => learn(a),
        Command::Validate(a) => validate(a),
        Command::Solve(a) => solve(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(code_for(&e))
        }
    }
}
