//! Command-line front end: synthesize crowds, run the collectors, sweep
//! parameters and report the static baselines, all as bit-stable CSV files.
//!
//! Exit codes: 0 on success, 2 on usage errors, 3 on data/parse/run errors.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crowdsense::baselines::{self, IeThreshConfig};
use crowdsense::crowdsim::{self, CrowdSpec, NoiseSpec};
use crowdsense::engine::{AddOrder, SeedMode, Weighting};
use crowdsense::harness::{self, Algorithm, Lane, Plan};
use crowdsense::{EngineConfig64, VoteMatrix};

#[derive(Parser)]
#[command(
    name = "crowdsense",
    version,
    about = "Approximate a crowd's majority vote on a budget"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a vote matrix from a crowd spec file
    Simulate(SimulateArgs),
    /// Run an algorithm over a vote matrix for a number of seeded runs
    Run(RunArgs),
    /// Sweep epsilon or K and emit the aggregated tradeoff rows
    Sweep(SweepArgs),
    /// Report the average/best labeler percentages and run the random-subset
    /// baseline
    Baselines(BaselinesArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Crowd spec file (key = value lines: n_examples, accuracies, base_rate, seed)
    #[arg(long)]
    spec: PathBuf,
    /// Labeler columns to perturb with vote flips, comma separated
    #[arg(long, value_delimiter = ',')]
    noise_ids: Vec<usize>,
    /// Per-cell flip probability for the --noise-ids columns
    #[arg(long, default_value_t = 0.5)]
    flip_prob: f64,
    /// Output vote-matrix CSV
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Crowdsense,
    Iethresh,
    RandomSubset,
}

#[derive(Clone, Copy, ValueEnum)]
enum SeedModeArg {
    /// Two top-quality labelers plus one random
    #[value(name = "2q1r")]
    TwoQOneR,
    /// Top three by quality
    #[value(name = "3q")]
    ThreeQ,
    /// Top labeler plus two random
    #[value(name = "1q2r")]
    OneQTwoR,
    /// Three random labelers
    #[value(name = "0q3r")]
    ZeroQThreeR,
}

impl From<SeedModeArg> for SeedMode {
    fn from(arg: SeedModeArg) -> Self {
        match arg {
            SeedModeArg::TwoQOneR => SeedMode::TwoQualityOneRandom,
            SeedModeArg::ThreeQ => SeedMode::ThreeQuality,
            SeedModeArg::OneQTwoR => SeedMode::OneQualityTwoRandom,
            SeedModeArg::ZeroQThreeR => SeedMode::ZeroQualityThreeRandom,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AddOrderArg {
    Quality,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightingArg {
    Weighted,
    Unweighted,
}

#[derive(Args)]
struct AlgorithmFlags {
    /// Input vote-matrix CSV
    #[arg(long)]
    matrix: PathBuf,
    /// Uncertainty threshold: CrowdSense adds labelers while the margin per
    /// vote stays below it; IEThresh keeps labelers above epsilon x max score
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Smoothing strength K of the quality estimate
    #[arg(long, default_value_t = 10.0)]
    k: f64,
    /// Significance level for IEThresh's t critical value
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "2q1r")]
    seed_mode: SeedModeArg,
    #[arg(long, value_enum, default_value = "quality")]
    add_order: AddOrderArg,
    #[arg(long, value_enum, default_value = "weighted")]
    weighting: WeightingArg,
    /// Invert the votes of labelers currently estimated below 1/2
    #[arg(long)]
    flip_low_quality: bool,
    /// Crowd-positive gold examples to initialize with
    #[arg(long, default_value_t = 0)]
    gold_pos: usize,
    /// Crowd-negative gold examples to initialize with
    #[arg(long, default_value_t = 0)]
    gold_neg: usize,
    /// Independent seeded runs, each with a fresh ordering
    #[arg(long, default_value_t = 100)]
    runs: usize,
    /// Root seed; run r derives its streams from (seed, r)
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Execute runs on one thread instead of the worker pool
    #[arg(long)]
    serial: bool,
    /// Report totals without the gold initialization cost
    #[arg(long)]
    exclude_gold_cost: bool,
}

impl AlgorithmFlags {
    fn engine_config(&self) -> EngineConfig64 {
        EngineConfig64 {
            epsilon: self.epsilon,
            smoothing: self.k,
            seed_mode: self.seed_mode.into(),
            add_order: match self.add_order {
                AddOrderArg::Quality => AddOrder::ByQuality,
                AddOrderArg::Random => AddOrder::Random,
            },
            weighting: match self.weighting {
                WeightingArg::Weighted => Weighting::Weighted,
                WeightingArg::Unweighted => Weighting::Unweighted,
            },
            flip_low_quality: self.flip_low_quality,
            rng_seed: 0,
        }
    }

    fn plan(&self, algorithm: AlgorithmArg) -> Result<Plan, CliError> {
        let algorithm = match algorithm {
            AlgorithmArg::Crowdsense => {
                let config = self.engine_config();
                config
                    .validate()
                    .map_err(|e| CliError::Usage(e.to_string()))?;
                Algorithm::CrowdSense(config)
            }
            AlgorithmArg::Iethresh => {
                let config = IeThreshConfig {
                    epsilon: self.epsilon,
                    alpha: self.alpha,
                };
                config
                    .validate()
                    .map_err(|e| CliError::Usage(e.to_string()))?;
                Algorithm::IeThresh(config)
            }
            AlgorithmArg::RandomSubset => Algorithm::RandomSubset,
        };
        if self.runs == 0 {
            return Err(CliError::Usage("--runs must be at least 1".into()));
        }
        Ok(Plan {
            algorithm,
            gold_pos: self.gold_pos,
            gold_neg: self.gold_neg,
            n_runs: self.runs,
            root_seed: self.seed,
            parallel: !self.serial,
        })
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum)]
    algorithm: AlgorithmArg,
    #[command(flatten)]
    flags: AlgorithmFlags,
    /// Per-example trace CSV
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Per-run metrics CSV
    #[arg(long)]
    metrics_out: Option<PathBuf>,
    /// Running-accuracy CSV
    #[arg(long)]
    running_out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepParamArg {
    Epsilon,
    K,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum, default_value = "crowdsense")]
    algorithm: AlgorithmArg,
    #[command(flatten)]
    flags: AlgorithmFlags,
    /// Which parameter the grid varies
    #[arg(long, value_enum)]
    param: SweepParamArg,
    /// Grid values, comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    grid: Vec<f64>,
    /// Sweep CSV output; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BaselinesArgs {
    /// Input vote-matrix CSV
    #[arg(long)]
    matrix: PathBuf,
    /// Runs of the random-subset baseline
    #[arg(long, default_value_t = 100)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-run metrics CSV for the random-subset baseline
    #[arg(long)]
    metrics_out: Option<PathBuf>,
    #[arg(long)]
    serial: bool,
}

enum CliError {
    Usage(String),
    Data(String),
}

impl<E: std::error::Error> From<E> for CliError {
    fn from(error: E) -> Self {
        CliError::Data(error.to_string())
    }
}

fn load_matrix(path: &Path) -> Result<VoteMatrix, CliError> {
    let file = File::open(path)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
    crowdsim::load_matrix(file)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_file<F>(path: &Path, write: F) -> Result<(), CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let file = File::create(path)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", path.display())))?;
    let mut writer = BufWriter::new(file);
    write(&mut writer).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    writer
        .flush()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let mut text = String::new();
    File::open(&args.spec)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", args.spec.display())))?
        .read_to_string(&mut text)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.spec.display())))?;
    let spec = CrowdSpec::parse(&text)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.spec.display())))?;
    let mut matrix = crowdsim::synthesize_crowd(&spec)?;
    if !args.noise_ids.is_empty() {
        let noise = NoiseSpec {
            labeler_ids: args.noise_ids.clone(),
            flip_prob: args.flip_prob,
        };
        let mut rng = harness::lane_rng(spec.rng_seed, 0, Lane::Noise);
        matrix = crowdsim::inject_noise(&matrix, &noise, &mut rng)?;
    }
    write_file(&args.out, |w| crowdsim::save_matrix(&matrix, w))?;
    println!(
        "wrote {} ({} examples x {} labelers)",
        args.out.display(),
        matrix.n_examples(),
        matrix.n_labelers()
    );
    Ok(())
}

fn run(args: &RunArgs) -> Result<(), CliError> {
    let matrix = load_matrix(&args.flags.matrix)?;
    let plan = args.flags.plan(args.algorithm)?;
    let outcomes = harness::repeat_runs(&matrix, &plan)?;
    let include_gold = !args.flags.exclude_gold_cost;

    if let Some(path) = &args.trace_out {
        write_file(path, |w| harness::write_trace_csv(w, &outcomes, &matrix))?;
    }
    if let Some(path) = &args.metrics_out {
        write_file(path, |w| harness::write_metrics_csv(w, &outcomes, include_gold))?;
    }
    if let Some(path) = &args.running_out {
        write_file(path, |w| harness::write_running_csv(w, &outcomes, include_gold))?;
    }

    let agg = harness::aggregate_outcomes(&outcomes)?;
    let gold_cost = outcomes.first().map_or(0, |o| o.gold_cost);
    let mean_votes = if include_gold {
        agg.mean_total_votes
    } else {
        agg.mean_total_votes - gold_cost as f64
    };
    println!(
        "runs={} mean_accuracy={:.4} std_accuracy={:.4} mean_total_votes={:.2}",
        agg.n_runs, agg.mean_accuracy, agg.std_accuracy, mean_votes
    );
    Ok(())
}

fn sweep(args: &SweepArgs) -> Result<(), CliError> {
    let matrix = load_matrix(&args.flags.matrix)?;
    let result = match (args.algorithm, args.param) {
        (AlgorithmArg::Crowdsense, SweepParamArg::Epsilon) => {
            harness::sweep_epsilon(&matrix, &args.grid, &args.flags.plan(args.algorithm)?)
        }
        (AlgorithmArg::Crowdsense, SweepParamArg::K) => {
            harness::sweep_k(&matrix, &args.grid, &args.flags.plan(args.algorithm)?)
        }
        (AlgorithmArg::Iethresh, SweepParamArg::Epsilon) => {
            harness::sweep_iethresh_epsilon(&matrix, &args.grid, &args.flags.plan(args.algorithm)?)
        }
        (AlgorithmArg::Iethresh, SweepParamArg::K) => {
            return Err(CliError::Usage(
                "iethresh has no K parameter to sweep".into(),
            ))
        }
        (AlgorithmArg::RandomSubset, _) => {
            return Err(CliError::Usage(
                "random-subset has no parameters to sweep".into(),
            ))
        }
    };
    let result = match result {
        Ok(result) => result,
        Err(harness::HarnessError::BadGridValue { param, value }) => {
            return Err(CliError::Usage(format!(
                "{param} grid value {value} out of range"
            )))
        }
        Err(e) => return Err(e.into()),
    };
    match &args.out {
        Some(path) => write_file(path, |w| harness::write_sweep_csv(w, &result))?,
        None => {
            let stdout = std::io::stdout();
            harness::write_sweep_csv(stdout.lock(), &result)
                .map_err(|e| CliError::Data(e.to_string()))?;
        }
    }
    for row in &result.rows {
        eprintln!(
            "{}={} mean_total_votes={:.2} mean_accuracy={:.4} std_accuracy={:.4}",
            result.param.as_str(),
            row.value,
            row.mean_total_votes,
            row.mean_accuracy,
            row.std_accuracy
        );
    }
    Ok(())
}

fn baselines_cmd(args: &BaselinesArgs) -> Result<(), CliError> {
    let matrix = load_matrix(&args.matrix)?;
    println!(
        "average_labeler={:.2}%",
        baselines::average_labeler(&matrix)
    );
    println!("best_labeler={:.2}%", baselines::best_labeler(&matrix));

    if args.runs == 0 {
        return Err(CliError::Usage("--runs must be at least 1".into()));
    }
    let plan = Plan {
        algorithm: Algorithm::RandomSubset,
        gold_pos: 0,
        gold_neg: 0,
        n_runs: args.runs,
        root_seed: args.seed,
        parallel: !args.serial,
    };
    let outcomes = harness::repeat_runs(&matrix, &plan)?;
    if let Some(path) = &args.metrics_out {
        write_file(path, |w| harness::write_metrics_csv(w, &outcomes, true))?;
    }
    let agg = harness::aggregate_outcomes(&outcomes)?;
    println!(
        "random_subset(size={}) runs={} mean_accuracy={:.4} std_accuracy={:.4} mean_total_votes={:.2}",
        baselines::just_over_half(matrix.n_labelers()),
        agg.n_runs,
        agg.mean_accuracy,
        agg.std_accuracy,
        agg.mean_total_votes
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Run(args) => run(args),
        Command::Sweep(args) => sweep(args),
        Command::Baselines(args) => baselines_cmd(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(message)) => {
            eprintln!("usage error: {message}");
            ExitCode::from(2)
        }
        Err(CliError::Data(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(3)
        }
    }
}
