//! `brl`: mine, fit, predict, simulate, evaluate and inspect Bayesian rule
//! lists from the command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 unconverged chains
//! with `--strict`.

mod artifact;
mod commands;
mod config;
mod error;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};

use crate::config::Settings;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "brl", version, about = "Bayesian rule lists: interpretable probabilistic classifiers")]
struct Cli {
    /// Worker threads for chains, folds and replicates.
    #[arg(long, global = true, env = "BRL_JOBS")]
    jobs: Option<usize>,

    /// Log more (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Mine the antecedent pool and print it.
    Mine(MineArgs),
    /// Fit a rule list and write the model file.
    Fit(FitArgs),
    /// Score a CSV with a fitted model.
    Predict(PredictArgs),
    /// Generate data from a random decision list.
    Simulate(SimulateArgs),
    /// Run an evaluation experiment.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Print a stored model with its provenance.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
struct MineArgs {
    #[command(flatten)]
    settings: Settings,
    /// Write the pool here instead of stdout.
    #[arg(long)]
    output: Option<String>,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    settings: Settings,
    #[arg(long, default_value = "model.json")]
    output: String,
    /// Store the sampled lists so `predict --mode posterior` works.
    #[arg(long)]
    keep_ensemble: bool,
    /// Per-iteration trace CSV.
    #[arg(long)]
    trace: Option<String>,
    /// Mined pool as text.
    #[arg(long)]
    pool_dump: Option<String>,
    /// Exit with status 3 when R-hat stays above the threshold.
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Point,
    Posterior,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model: String,
    #[arg(long)]
    data: String,
    #[arg(long, value_enum, default_value_t = Mode::Point)]
    mode: Mode,
    /// Predictions CSV; stdout when absent.
    #[arg(long)]
    output: Option<String>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    n_rules: usize,
    #[arg(long, default_value_t = 5)]
    list_len: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    beta_a: f64,
    #[arg(long, default_value_t = 0.5)]
    beta_b: f64,
    #[arg(long, default_value_t = 0.5)]
    feature_prob: f64,
    /// Data CSV; stdout when absent.
    #[arg(long)]
    output: Option<String>,
    /// JSON with the generating list and consequents.
    #[arg(long)]
    truth: Option<String>,
}

#[derive(Debug, Subcommand)]
enum EvalCommand {
    /// k-fold cross-validation of the point estimate.
    Cv(CvArgs),
    /// Posterior concentration on simulated data.
    Concentration(ConcentrationArgs),
}

#[derive(Debug, Args)]
struct CvArgs {
    #[command(flatten)]
    settings: Settings,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Keep label proportions equal across folds.
    #[arg(long)]
    stratified: bool,
    #[arg(long, default_value = "cv-report.json")]
    output: String,
    /// Directory for per-fold ROC CSVs.
    #[arg(long)]
    roc_dir: Option<String>,
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Args)]
struct ConcentrationArgs {
    #[command(flatten)]
    settings: Settings,
    #[arg(long, value_delimiter = ',', default_value = "100,5000")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    replicates: usize,
    #[arg(long, default_value_t = 100)]
    n_rules: usize,
    #[arg(long, default_value_t = 5)]
    list_len: usize,
    /// Held-out observations per replicate for log-loss.
    #[arg(long, default_value_t = 1000)]
    holdout: usize,
    #[arg(long, default_value = "concentration.json")]
    output: String,
}

#[derive(Debug, Args)]
struct InspectArgs {
    #[arg(long)]
    model: String,
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

fn execution(jobs: Option<usize>) -> Result<brl::Execution, CliError> {
    match jobs {
        Some(0) => Err(CliError::Usage("--jobs must be at least 1".into())),
        Some(1) => Ok(brl::Execution::Sequential),
        #[cfg(feature = "parallel")]
        Some(n) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Usage(format!("cannot start {n} workers: {e}")))?;
            Ok(brl::Execution::Parallel)
        }
        #[cfg(not(feature = "parallel"))]
        Some(_) => Ok(brl::Execution::Sequential),
        None => Ok(brl::Execution::default()),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let exec = execution(cli.jobs)?;
    match cli.command {
        Command::Mine(a) => commands::mine(a.settings, a.output, exec),
        Command::Fit(a) => commands::fit(a, exec),
        Command::Predict(a) => commands::predict(a, exec),
        Command::Simulate(a) => commands::simulate(a),
        Command::Eval(EvalCommand::Cv(a)) => commands::eval_cv(a, exec),
        Command::Eval(EvalCommand::Concentration(a)) => commands::eval_concentration(a, exec),
        Command::Inspect(a) => commands::inspect(&a.model),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    init_logging(cli.verbose);
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
