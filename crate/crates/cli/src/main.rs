//! `pv`: perturbed-variation scores, tests and studies from the command line.
//!
//! Every run prints one JSON report to stdout. Exit codes: 0 success,
//! 2 input error, 3 parameter error.

mod input;

use std::collections::HashSet;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pv_core::bootstrap::{ci_equivalence_test, ci_similarity_test, BootstrapConfig, MIN_RECOMMENDED_REPS};
use pv_core::eval::{
    cross_validate_corpus, mean_average_precision, run_power_study, score_corpus, PowerStudyConfig, RankingCorpus,
};
use pv_core::geometry::normalize_unit_box;
use pv_core::inference::{equivalence_test, required_sample_size, sample_size_bound, similarity_test, TestMethod};
use pv_core::projection::{ppv_similarity_test, PairSource, ProjectionScale};
use pv_core::{pv_hat, Metric, PvError};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "pv", version, about = "Perturbed-variation similarity between point samples")]
struct Cli {
    /// Seed for randomized steps (bootstrap, projections, simulations).
    #[arg(long, env = "PV_SEED", global = true)]
    seed: Option<u64>,
    /// Print the report on one line.
    #[arg(long, global = true)]
    compact: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample score between two CSV files.
    Pv(PvArgs),
    /// Similarity or equivalence test between two CSV files.
    Test(TestArgs),
    /// Random-projection test between two CSV files.
    Ppv(PpvArgs),
    /// Rank candidate sets against query sets and report AP/MAP.
    Rank(RankArgs),
    /// Type-1 error / power simulation from a JSON config.
    PowerSim(PowerArgs),
    /// Per-sample size needed to detect an effect.
    SampleSize(SizeArgs),
}

#[derive(Args, Serialize)]
struct PairArgs {
    file1: PathBuf,
    file2: PathBuf,
    #[arg(long, short)]
    epsilon: f64,
}

#[derive(Args, Serialize)]
struct PvArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pair: PairArgs,
    #[arg(long, default_value = "chebyshev")]
    metric: Metric,
    /// Rescale both samples jointly into the unit box first.
    #[arg(long)]
    normalize: bool,
    /// Include matched pairs and unmatched indices.
    #[arg(long)]
    emit_witness: bool,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Mode {
    Similarity,
    Equivalence,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Method {
    Bound,
    Bca,
}

#[derive(Args, Serialize)]
struct TestArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pair: PairArgs,
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "similarity")]
    mode: Mode,
    #[arg(long, value_enum, default_value = "bound")]
    method: Method,
    /// Bootstrap replicates for `--method bca`.
    #[arg(long = "B", alias = "b", default_value_t = 1000)]
    b: usize,
    #[arg(long, default_value = "chebyshev")]
    metric: Metric,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Scale {
    Raw,
    UnitInterval,
}

#[derive(Args, Serialize)]
struct PpvArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pair: PairArgs,
    /// Number of random directions.
    #[arg(long = "K", alias = "k", default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Scaling of projected values before matching.
    #[arg(long, value_enum, default_value = "unit-interval")]
    scale: Scale,
}

#[derive(Args, Serialize)]
struct RankArgs {
    query_dir: PathBuf,
    candidate_dir: PathBuf,
    /// CSV of relevant `query_id,candidate_id` pairs (ids are file stems).
    relevance_file: PathBuf,
    #[arg(long, short, conflicts_with = "cv_grid", required_unless_present = "cv_grid")]
    epsilon: Option<f64>,
    /// Comma-separated ε values to choose from by leave-one-query-out MAP.
    #[arg(long, value_delimiter = ',')]
    cv_grid: Option<Vec<f64>>,
    #[arg(long, default_value = "euclidean")]
    metric: Metric,
}

#[derive(Args, Serialize)]
struct PowerArgs {
    /// JSON study configuration.
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args, Serialize)]
struct SizeArgs {
    #[arg(long)]
    theta0: f64,
    #[arg(long, short)]
    epsilon: f64,
    #[arg(long)]
    dim: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0.05)]
    beta: f64,
}

/// Output document of every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RunReport {
    command: String,
    params: Value,
    results: Value,
    wall_clock_ms: f64,
    seed: Option<u64>,
}

enum Failure {
    Input(String),
    Param(String),
}

impl From<PvError> for Failure {
    fn from(e: PvError) -> Self {
        match e {
            PvError::InvalidParameter { .. } | PvError::MassNotNormalized { .. } | PvError::SupportTooLarge { .. } => {
                Failure::Param(e.to_string())
            }
            _ => Failure::Input(e.to_string()),
        }
    }
}

fn input_err(e: anyhow::Error) -> Failure {
    Failure::Input(format!("{e:#}"))
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), Failure> {
    if cond {
        Ok(())
    } else {
        Err(Failure::Param(msg.into()))
    }
}

fn check_epsilon(eps: f64) -> Result<(), Failure> {
    ensure(eps > 0.0 && eps.is_finite(), format!("epsilon must be positive, got {eps}"))
}

fn check_alpha(alpha: f64) -> Result<(), Failure> {
    ensure(alpha > 0.0 && alpha < 1.0, format!("alpha must lie in (0,1), got {alpha}"))
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

fn cmd_pv(args: &PvArgs) -> Result<Value, Failure> {
    check_epsilon(args.pair.epsilon)?;
    let s1 = input::read_points(&args.pair.file1).map_err(input_err)?;
    let s2 = input::read_points(&args.pair.file2).map_err(input_err)?;
    let (s1, s2) = if args.normalize { normalize_unit_box(&s1, &s2)? } else { (s1, s2) };
    let est = pv_hat(&s1, &s2, args.pair.epsilon, args.metric)?;
    let mut out = json!({
        "value": est.value,
        "unmatched_fraction_1": est.unmatched_fraction_left(),
        "unmatched_fraction_2": est.unmatched_fraction_right(),
        "s_w": est.s_w,
        "s_v": est.s_v,
        "n": est.n,
        "m": est.m,
    });
    if args.emit_witness {
        out["unmatched_1"] = to_value(&est.unmatched_left);
        out["unmatched_2"] = to_value(&est.unmatched_right);
        out["pairs"] = to_value(&est.pairs);
    }
    Ok(out)
}

fn cmd_test(args: &TestArgs, seed: u64) -> Result<Value, Failure> {
    check_epsilon(args.pair.epsilon)?;
    check_alpha(args.alpha)?;
    ensure((0.0..=1.0).contains(&args.theta), format!("theta must lie in [0,1], got {}", args.theta))?;
    if let Method::Bca = args.method {
        ensure(args.b >= 1, "B must be at least 1")?;
        if args.b < MIN_RECOMMENDED_REPS {
            eprintln!("warning: B={} is below {MIN_RECOMMENDED_REPS}; interval endpoints will be coarse", args.b);
        }
    }
    let s1 = input::read_points(&args.pair.file1).map_err(input_err)?;
    let s2 = input::read_points(&args.pair.file2).map_err(input_err)?;
    let eps = args.pair.epsilon;
    let boot = BootstrapConfig {
        reps: args.b,
        seed,
        keep_replicates: false,
    };
    let report = match (args.mode, args.method) {
        (Mode::Similarity, Method::Bound) => similarity_test(&s1, &s2, eps, args.theta, args.alpha, args.metric)?,
        (Mode::Equivalence, Method::Bound) => equivalence_test(&s1, &s2, eps, args.theta, args.alpha, args.metric)?,
        (Mode::Similarity, Method::Bca) => ci_similarity_test(&s1, &s2, eps, args.theta, args.alpha, boot, args.metric)?,
        (Mode::Equivalence, Method::Bca) => ci_equivalence_test(&s1, &s2, eps, args.theta, args.alpha, boot, args.metric)?,
    };
    if report.vacuous {
        eprintln!("warning: theta is not above the threshold; the equivalence test cannot reject at this sample size");
    }
    Ok(to_value(&report))
}

fn cmd_ppv(args: &PpvArgs, seed: u64) -> Result<Value, Failure> {
    check_epsilon(args.pair.epsilon)?;
    check_alpha(args.alpha)?;
    ensure(args.k >= 1, "K must be at least 1")?;
    let s1 = input::read_points(&args.pair.file1).map_err(input_err)?;
    let s2 = input::read_points(&args.pair.file2).map_err(input_err)?;
    let scale = match args.scale {
        Scale::Raw => ProjectionScale::Raw,
        Scale::UnitInterval => ProjectionScale::UnitInterval,
    };
    let report = ppv_similarity_test(PairSource::Fixed(&s1, &s2), args.pair.epsilon, args.k, args.alpha, seed, scale)?;
    Ok(to_value(&report))
}

fn cmd_rank(args: &RankArgs) -> Result<Value, Failure> {
    if let Some(eps) = args.epsilon {
        check_epsilon(eps)?;
    }
    if let Some(grid) = &args.cv_grid {
        ensure(!grid.is_empty(), "cv-grid is empty")?;
        for &eps in grid {
            check_epsilon(eps)?;
        }
    }
    let queries = input::read_dir_sets(&args.query_dir).map_err(input_err)?;
    let candidates = input::read_dir_sets(&args.candidate_dir).map_err(input_err)?;
    let qids: HashSet<&str> = queries.iter().map(|(id, _)| id.as_str()).collect();
    let cids: HashSet<&str> = candidates.iter().map(|(id, _)| id.as_str()).collect();
    let relevant = input::read_relevance(&args.relevance_file, &qids, &cids).map_err(input_err)?;
    let corpus = RankingCorpus {
        queries,
        candidates,
        relevant,
    };
    let (epsilon, cv) = match (&args.cv_grid, args.epsilon) {
        (Some(grid), _) => {
            let cv = cross_validate_corpus(&corpus, grid, args.metric)?;
            (cv.epsilon, Some(cv))
        }
        (None, Some(eps)) => (eps, None),
        (None, None) => unreachable!("clap requires one of --epsilon / --cv-grid"),
    };
    let task = score_corpus(&corpus, epsilon, args.metric)?;
    let report = mean_average_precision(&task)?;
    let per_query: Vec<Value> = task
        .query_ids
        .iter()
        .zip(&report.per_query_ap)
        .map(|(id, ap)| json!({ "query": id, "ap": ap }))
        .collect();
    let mut out = json!({
        "epsilon": epsilon,
        "map": report.map,
        "per_query_ap": per_query,
        "pr_curve": report.pr_curve,
    });
    if let Some(cv) = cv {
        out["cv_scores"] = cv.scores.iter().map(|(e, m)| json!({ "epsilon": e, "map": m })).collect();
    }
    Ok(out)
}

fn cmd_power_sim(args: &PowerArgs, seed: Option<u64>) -> Result<(Value, Value, u64), Failure> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Failure::Input(format!("cannot read {}: {e}", args.config.display())))?;
    let mut cfg: PowerStudyConfig = serde_json::from_str(&text)
        .map_err(|e| Failure::Param(format!("{}: invalid study config: {e}", args.config.display())))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if cfg.method == TestMethod::Bca && cfg.bootstrap_reps < MIN_RECOMMENDED_REPS {
        eprintln!("warning: bootstrap_reps={} is below {MIN_RECOMMENDED_REPS}", cfg.bootstrap_reps);
    }
    let table = run_power_study(&cfg)?;
    Ok((to_value(&cfg), to_value(&table), cfg.seed))
}

fn cmd_sample_size(args: &SizeArgs) -> Result<Value, Failure> {
    let bound = sample_size_bound(args.theta0, args.epsilon, args.dim, args.alpha, args.beta)?;
    let n = required_sample_size(args.theta0, args.epsilon, args.dim, args.alpha, args.beta)?;
    Ok(json!({ "n": n, "bound": bound }))
}

fn run(cli: &Cli) -> Result<RunReport, Failure> {
    let start = Instant::now();
    let seed = cli.seed.unwrap_or(0);
    let (command, params, results, seed_used) = match &cli.command {
        Command::Pv(a) => ("pv", to_value(a), cmd_pv(a)?, None),
        Command::Test(a) => {
            let uses_seed = matches!(a.method, Method::Bca).then_some(seed);
            ("test", to_value(a), cmd_test(a, seed)?, uses_seed)
        }
        Command::Ppv(a) => ("ppv", to_value(a), cmd_ppv(a, seed)?, Some(seed)),
        Command::Rank(a) => ("rank", to_value(a), cmd_rank(a)?, None),
        Command::PowerSim(a) => {
            let (cfg, table, s) = cmd_power_sim(a, cli.seed)?;
            ("power-sim", cfg, table, Some(s))
        }
        Command::SampleSize(a) => ("sample-size", to_value(a), cmd_sample_size(a)?, None),
    };
    Ok(RunReport {
        command: command.to_string(),
        params,
        results,
        wall_clock_ms: start.elapsed().as_secs_f64() * 1e3,
        seed: seed_used,
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(report) => {
            let text = if cli.compact {
                serde_json::to_string(&report)
            } else {
                serde_json::to_string_pretty(&report)
            };
            println!("{}", text.expect("report serializes"));
            ExitCode::SUCCESS
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Param(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
