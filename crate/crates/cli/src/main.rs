use std::path::PathBuf;
use std::process::ExitCode;

use arsk_cli::commands::{
    self, BenchArgs, EvalArgs, FitArgs, SimulateArgs, TuneArgs,
};
use arsk_core::arsk::RestoreMode;
use arsk_core::model::DEFAULT_SCAD_A;
use arsk_core::simgen::CovarianceKind;
use arsk_core::PenaltyKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PenaltyArg {
    Soft,
    Scad,
}

impl From<PenaltyArg> for PenaltyKind {
    fn from(p: PenaltyArg) -> Self {
        match p {
            PenaltyArg::Soft => PenaltyKind::Lasso,
            PenaltyArg::Scad => PenaltyKind::Scad,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CovArg {
    Identity,
    Rotated,
}

impl From<CovArg> for CovarianceKind {
    fn from(c: CovArg) -> Self {
        match c {
            CovArg::Identity => CovarianceKind::Identity,
            CovArg::Rotated => CovarianceKind::RotatedEquicorrelation,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RestoreArg {
    Sqrt,
    Linear,
}

impl From<RestoreArg> for RestoreMode {
    fn from(r: RestoreArg) -> Self {
        match r {
            RestoreArg::Sqrt => RestoreMode::Sqrt,
            RestoreArg::Linear => RestoreMode::Linear,
        }
    }
}

/// Robust and sparse k-means clustering with outlier absorption.
#[derive(Parser)]
#[command(name = "arsk", version, about)]
struct Cli {
    /// Worker threads (overrides ARSK_THREADS; 0 = one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct FitCli {
    /// Input CSV (numeric matrix, no header unless --header).
    data: PathBuf,
    #[arg(short, long)]
    k: usize,
    /// Group penalty strength on error rows (robustness).
    #[arg(long)]
    lambda1: f64,
    /// Scalar penalty strength on variable weights (sparsity).
    #[arg(long)]
    lambda2: f64,
    /// Threshold family for the error update.
    #[arg(long, value_enum, default_value = "soft")]
    penalty_e: PenaltyArg,
    /// Threshold family for the weight update.
    #[arg(long, value_enum, default_value = "soft")]
    penalty_w: PenaltyArg,
    /// SCAD shape parameter.
    #[arg(long, default_value_t = DEFAULT_SCAD_A)]
    scad_a: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "result.json")]
    out: PathBuf,
    /// Center and scale columns before fitting.
    #[arg(long)]
    standardize: bool,
    /// Skip one header line in the CSV.
    #[arg(long)]
    header: bool,
    #[arg(long, default_value_t = 20)]
    restarts: usize,
    #[arg(long, default_value_t = 50)]
    max_outer_iter: usize,
    #[arg(long, default_value_t = 0.8)]
    init_error_fraction: f64,
    #[arg(long, value_enum, default_value = "sqrt")]
    restore_mode: RestoreArg,
}

#[derive(Args)]
struct TuneCli {
    data: PathBuf,
    #[arg(short, long)]
    k: usize,
    /// Number of permuted reference datasets.
    #[arg(short, long, default_value_t = 25)]
    b: usize,
    #[arg(long, default_value_t = 10)]
    grid_size: usize,
    #[arg(long, default_value_t = 0.5)]
    decay: f64,
    /// Pinned lambda1 for the first sweep (default: derived from the data).
    #[arg(long)]
    lambda1_dagger: Option<f64>,
    #[arg(long, value_enum, default_value = "soft")]
    penalty_e: PenaltyArg,
    #[arg(long, value_enum, default_value = "soft")]
    penalty_w: PenaltyArg,
    #[arg(long, default_value_t = DEFAULT_SCAD_A)]
    scad_a: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "tune.json")]
    out: PathBuf,
    #[arg(long)]
    header: bool,
    #[arg(long, default_value_t = 20)]
    restarts: usize,
    #[arg(long, default_value_t = 0.8)]
    init_error_fraction: f64,
    #[arg(long, value_enum, default_value = "sqrt")]
    restore_mode: RestoreArg,
}

#[derive(Args)]
struct SimulateCli {
    #[arg(short, long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 50)]
    n_per_cluster: usize,
    #[arg(short, long)]
    p: usize,
    #[arg(short, long)]
    q: usize,
    /// Contamination proportion.
    #[arg(long, default_value_t = 0.0)]
    pi: f64,
    #[arg(long, value_enum, default_value = "identity")]
    cov: CovArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Writes <prefix>.csv and <prefix>.truth.json.
    #[arg(long)]
    out_prefix: PathBuf,
}

#[derive(Args)]
struct BenchCli {
    #[arg(long)]
    scenario_file: PathBuf,
    /// Override the replication count from the scenario file.
    #[arg(long)]
    reps: Option<usize>,
    /// Comma-separated subset of the scenario file's methods.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long, default_value = "table.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalCli {
    result: PathBuf,
    truth: PathBuf,
    #[arg(long, default_value = "metrics.json")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one model at fixed penalties.
    Fit(FitCli),
    /// Search (lambda2, lambda1) by the robust Gap statistic.
    Tune(TuneCli),
    /// Generate a contaminated Gaussian-mixture dataset with ground truth.
    Simulate(SimulateCli),
    /// Replicate scenarios and tabulate method performance.
    Bench(BenchCli),
    /// Score a fit result against a ground-truth sidecar.
    Eval(EvalCli),
}

fn run(cli: Cli) -> arsk_cli::CliResult<()> {
    commands::configure_threads(cli.threads)?;
    match cli.command {
        Command::Fit(a) => commands::cmd_fit(&FitArgs {
            data: a.data,
            k: a.k,
            lambda1: a.lambda1,
            lambda2: a.lambda2,
            penalty_e: a.penalty_e.into(),
            penalty_w: a.penalty_w.into(),
            scad_a: a.scad_a,
            seed: a.seed,
            out: a.out,
            standardize: a.standardize,
            header: a.header,
            restarts: a.restarts,
            max_outer_iter: a.max_outer_iter,
            init_error_fraction: a.init_error_fraction,
            restore_mode: a.restore_mode.into(),
        }),
        Command::Tune(a) => commands::cmd_tune(&TuneArgs {
            data: a.data,
            k: a.k,
            b: a.b,
            grid_size: a.grid_size,
            decay: a.decay,
            lambda1_dagger: a.lambda1_dagger,
            penalty_e: a.penalty_e.into(),
            penalty_w: a.penalty_w.into(),
            scad_a: a.scad_a,
            seed: a.seed,
            out: a.out,
            header: a.header,
            restarts: a.restarts,
            init_error_fraction: a.init_error_fraction,
            restore_mode: a.restore_mode.into(),
        }),
        Command::Simulate(a) => commands::cmd_simulate(&SimulateArgs {
            k: a.k,
            n_per_cluster: a.n_per_cluster,
            p: a.p,
            q: a.q,
            pi: a.pi,
            covariance: a.cov.into(),
            seed: a.seed,
            out_prefix: a.out_prefix,
        }),
        Command::Bench(a) => commands::cmd_bench(&BenchArgs {
            scenario_file: a.scenario_file,
            reps: a.reps,
            methods: a.methods,
            out: a.out,
        }),
        Command::Eval(a) => commands::cmd_eval(&EvalArgs {
            result: a.result,
            truth: a.truth,
            out: a.out,
        }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
