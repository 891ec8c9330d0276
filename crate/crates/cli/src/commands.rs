//! Command implementations behind the CLI surface.

use std::collections::BTreeSet;
use std::path::PathBuf;

use arsk_core::arsk::{self, ArskOptions, RestoreMode};
use arsk_core::metrics;
use arsk_core::simgen::{gen_dataset, CovarianceKind, SimConfig};
use arsk_core::tuning::{tune, TuneConfig};

use arsk_core::{FitResult, PenaltyKind, PenaltySpec};

use crate::bench::{parse_csv, render_csv, BenchConfig};
use crate::error::{CliError, CliResult};
use crate::io::{
    read_json, read_matrix_csv, write_json, write_matrix_csv, EvalReport, GroundTruth,
};
use crate::standardize::standardize;

pub struct FitArgs {
    pub data: PathBuf,
    pub k: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub penalty_e: PenaltyKind,
    pub penalty_w: PenaltyKind,
    pub scad_a: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub standardize: bool,
    pub header: bool,
    pub restarts: usize,
    pub max_outer_iter: usize,
    pub init_error_fraction: f64,
    pub restore_mode: RestoreMode,
}

pub fn cmd_fit(args: &FitArgs) -> CliResult<()> {
    let mut x = read_matrix_csv(&args.data, args.header)?;
    if args.standardize {
        let (z, constant) = standardize(&x);
        for j in &constant {
            eprintln!("warning: column {j} is constant; centered but not scaled");
        }
        x = z;
    }
    let mut opts = ArskOptions::new(
        args.k,
        PenaltySpec::new(args.penalty_e, args.lambda1, args.scad_a)?,
        PenaltySpec::new(args.penalty_w, args.lambda2, args.scad_a)?,
    );
    opts.seed = args.seed;
    opts.kmeans.restarts = args.restarts;
    opts.max_outer_iter = args.max_outer_iter;
    opts.init_error_fraction = args.init_error_fraction;
    opts.restore_mode = args.restore_mode;

    let fit = arsk::fit(&x, &opts)?;
    write_json(&args.out, &fit)?;
    eprintln!(
        "fit: {} outer iterations, {} outliers, {} nonzero weights, converged = {}",
        fit.outer_iterations,
        fit.outlier_indices.len(),
        fit.weights.support().len(),
        fit.converged
    );
    if !fit.converged {
        return Err(CliError::NonConvergence(format!(
            "outer loop did not converge within {} iterations (result written to {})",
            opts.max_outer_iter,
            args.out.display()
        )));
    }
    Ok(())
}

pub struct TuneArgs {
    pub data: PathBuf,
    pub k: usize,
    pub b: usize,
    pub grid_size: usize,
    pub decay: f64,
    pub lambda1_dagger: Option<f64>,
    pub penalty_e: PenaltyKind,
    pub penalty_w: PenaltyKind,
    pub scad_a: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub header: bool,
    pub restarts: usize,
    pub init_error_fraction: f64,
    pub restore_mode: RestoreMode,
}

pub fn cmd_tune(args: &TuneArgs) -> CliResult<()> {
    let x = read_matrix_csv(&args.data, args.header)?;
    let mut base = ArskOptions::new(
        args.k,
        PenaltySpec::new(args.penalty_e, 1.0, args.scad_a)?,
        PenaltySpec::new(args.penalty_w, 0.0, args.scad_a)?,
    );
    base.kmeans.restarts = args.restarts;
    base.init_error_fraction = args.init_error_fraction;
    base.restore_mode = args.restore_mode;
    let cfg = TuneConfig {
        b: args.b,
        grid_size: args.grid_size,
        decay: args.decay,
        lambda1_dagger: args.lambda1_dagger,
        seed: args.seed,
    };
    let result = tune(&x, args.k, &cfg, &base)?;
    write_json(&args.out, &result)?;
    eprintln!(
        "tune: lambda2* = {}, lambda1* = {}",
        result.lambda2_star, result.lambda1_star
    );
    Ok(())
}

pub struct SimulateArgs {
    pub k: usize,
    pub n_per_cluster: usize,
    pub p: usize,
    pub q: usize,
    pub pi: f64,
    pub covariance: CovarianceKind,
    pub seed: u64,
    pub out_prefix: PathBuf,
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<()> {
    let cfg = SimConfig {
        k: args.k,
        n_per_cluster: args.n_per_cluster,
        p: args.p,
        q: args.q,
        pi: args.pi,
        covariance: args.covariance,
        seed: args.seed,
    };
    let data = gen_dataset(&cfg)?;
    let csv_path = args.out_prefix.with_extension("csv");
    let truth_path = args.out_prefix.with_extension("truth.json");
    write_matrix_csv(&csv_path, data.x.values())?;
    write_json(&truth_path, &GroundTruth::from_dataset(&data))?;
    eprintln!(
        "simulate: wrote {} ({} x {}) and {}",
        csv_path.display(),
        data.x.n(),
        data.x.p(),
        truth_path.display()
    );
    Ok(())
}

pub struct BenchArgs {
    pub scenario_file: PathBuf,
    pub reps: Option<usize>,
    pub methods: Option<Vec<String>>,
    pub out: PathBuf,
}

pub fn cmd_bench(args: &BenchArgs) -> CliResult<()> {
    let mut cfg: BenchConfig = read_json(&args.scenario_file)?;
    if let Some(reps) = args.reps {
        cfg.reps = reps;
    }
    if let Some(names) = &args.methods {
        let mut methods = Vec::new();
        for name in names {
            match cfg.methods.iter().find(|m| &m.name == name) {
                Some(m) => methods.push(m.clone()),
                None => {
                    return Err(CliError::Parse(format!(
                        "method {name:?} not defined in {}",
                        args.scenario_file.display()
                    )))
                }
            }
        }
        cfg.methods = methods;
    }
    let rows = crate::bench::run_bench(&cfg)?;
    let text = render_csv(&rows);
    std::fs::write(&args.out, &text)?;
    // The emitted table must parse back to the in-memory report exactly.
    debug_assert_eq!(parse_csv(&text).unwrap(), rows);
    eprintln!("bench: wrote {} rows to {}", rows.len(), args.out.display());
    Ok(())
}

pub struct EvalArgs {
    pub result: PathBuf,
    pub truth: PathBuf,
    pub out: PathBuf,
}

pub fn cmd_eval(args: &EvalArgs) -> CliResult<()> {
    let fit: FitResult = read_json(&args.result)?;
    let truth: GroundTruth = read_json(&args.truth)?;
    let report = evaluate(&fit, &truth)?;
    write_json(&args.out, &report)?;
    eprintln!(
        "eval: cer = {}, cer+outliers = {}, tpr = {}, tnr = {}",
        report.cer, report.cer_with_outliers, report.tpr, report.tnr
    );
    Ok(())
}

pub fn evaluate(fit: &FitResult, truth: &GroundTruth) -> CliResult<EvalReport> {
    let n = truth.labels.len();
    if fit.model.n() != n || truth.outlier_flags.len() != n {
        return Err(CliError::Parse(format!(
            "result has {} observations, truth has {n}",
            fit.model.n()
        )));
    }
    let p = fit.weights.p();
    let informative: BTreeSet<usize> = truth.informative.iter().copied().collect();
    if informative.iter().any(|&j| j >= p) {
        return Err(CliError::Parse(
            "informative set indexes beyond the fitted variables".to_string(),
        ));
    }
    let k = fit.model.k();
    let cer = metrics::cer(&truth.labels, fit.model.labels())?;
    let cer_with_outliers = metrics::cer_with_outliers(
        &truth.labels,
        &truth.outlier_flags,
        fit.model.labels(),
        &fit.outlier_indices,
        k,
    )?;
    let (tpr, tnr) = metrics::tpr_tnr(fit.weights.as_slice(), &informative, p);
    let outlier_confusion = metrics::outlier_confusion(&truth.outlier_flags, &fit.outlier_indices);
    Ok(EvalReport {
        cer,
        cer_with_outliers,
        tpr,
        tnr,
        outlier_confusion,
    })
}

/// Configure the global worker pool from `--threads` or `ARSK_THREADS`.
/// Zero or absence leaves the rayon default (one worker per core).
pub fn configure_threads(flag: Option<usize>) -> CliResult<()> {
    let from_env = std::env::var("ARSK_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    let threads = flag.or(from_env).unwrap_or(0);
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Parse(format!("cannot configure {threads} threads: {e}")))?;
    }
    Ok(())
}

