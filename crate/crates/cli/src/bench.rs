//! Monte Carlo bench harness: replicate synthetic scenarios, run the
//! requested methods, and tabulate mean and standard error of CER (with
//! the outlier pseudo-cluster), TPR, TNR, and detected-outlier counts.
//!
//! Replicates share datasets across methods (seeds derive from scenario
//! and replicate indices only), run in parallel, and reduce in index
//! order, so serial and concurrent executions produce identical tables.

use std::collections::BTreeSet;

use arsk_core::arsk::{self, ArskOptions, RestoreMode};
use arsk_core::metrics;
use arsk_core::rng::{derive_seed, stream};
use arsk_core::simgen::{gen_dataset, CovarianceKind, SimConfig, SimDataset};
use arsk_core::tuning::{tune, TuneConfig};
use arsk_core::wkmeans::{lloyd_weighted, trimmed_kmeans, KMeansOptions};
use arsk_core::{ArskError, PenaltyKind, PenaltySpec, WeightVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// One synthetic scenario.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub k: usize,
    pub n_per_cluster: usize,
    pub p: usize,
    pub q: usize,
    pub pi: f64,
    #[serde(default)]
    pub covariance: CovarianceKind,
}

/// How penalty strengths are chosen per replicate.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "lowercase")]
pub enum LambdaPolicy {
    Fixed {
        lambda1: f64,
        lambda2: f64,
    },
    Gap {
        #[serde(default = "default_b")]
        b: usize,
        #[serde(default = "default_grid_size")]
        grid_size: usize,
        #[serde(default = "default_decay")]
        decay: f64,
        #[serde(default)]
        lambda1_dagger: Option<f64>,
    },
}

fn default_b() -> usize {
    25
}
fn default_grid_size() -> usize {
    10
}
fn default_decay() -> f64 {
    0.5
}

impl Default for LambdaPolicy {
    fn default() -> Self {
        LambdaPolicy::Gap {
            b: default_b(),
            grid_size: default_grid_size(),
            decay: default_decay(),
            lambda1_dagger: None,
        }
    }
}

/// A method entry in the scenario file. Recognized names: `kc`, `tkm`,
/// and the four threshold combinations `soft-soft-arsk`, `soft-scad-arsk`,
/// `scad-soft-arsk`, `scad-scad-arsk` (weight threshold first, error
/// threshold second).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MethodSpec {
    pub name: String,
    /// Trim fraction for `tkm`.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub lambda: LambdaPolicy,
}

/// Fit knobs shared by every ARSK run of a bench.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct FitSettings {
    pub restarts: usize,
    pub max_outer_iter: usize,
    pub init_error_fraction: f64,
    pub restore_mode: RestoreMode,
    pub scad_a: f64,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            restarts: 20,
            max_outer_iter: 50,
            init_error_fraction: 0.8,
            restore_mode: RestoreMode::Sqrt,
            scad_a: arsk_core::model::DEFAULT_SCAD_A,
        }
    }
}

/// The whole bench configuration file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchConfig {
    pub seed: u64,
    pub reps: usize,
    pub scenarios: Vec<Scenario>,
    pub methods: Vec<MethodSpec>,
    #[serde(default)]
    pub fit: FitSettings,
}

enum Method {
    Kc,
    Tkm { alpha: f64 },
    Arsk { weight: PenaltyKind, error: PenaltyKind },
}

fn parse_method(spec: &MethodSpec) -> CliResult<Method> {
    let kind = |s: &str| match s {
        "soft" => Ok(PenaltyKind::Lasso),
        "scad" => Ok(PenaltyKind::Scad),
        other => Err(CliError::Parse(format!("unknown threshold {other:?}"))),
    };
    match spec.name.as_str() {
        "kc" => Ok(Method::Kc),
        "tkm" => Ok(Method::Tkm {
            alpha: spec.alpha.unwrap_or(0.1),
        }),
        name => match name.strip_suffix("-arsk") {
            Some(combo) => {
                let Some((w, e)) = combo.split_once('-') else {
                    return Err(CliError::Parse(format!("unknown method {name:?}")));
                };
                Ok(Method::Arsk {
                    weight: kind(w)?,
                    error: kind(e)?,
                })
            }
            None => Err(CliError::Parse(format!("unknown method {name:?}"))),
        },
    }
}

struct RepMetrics {
    cer: f64,
    tpr: f64,
    tnr: f64,
    detected: usize,
}

fn run_method(
    method: &Method,
    spec: &MethodSpec,
    data: &SimDataset,
    settings: &FitSettings,
    seed: u64,
) -> Result<RepMetrics, ArskError> {
    let k = data.config.k;
    let p = data.config.p;
    let kmeans = KMeansOptions {
        restarts: settings.restarts,
        seed,
        ..KMeansOptions::default()
    };

    let (labels, outliers, weights): (Vec<usize>, BTreeSet<usize>, Vec<f64>) = match method {
        Method::Kc => {
            let fit = lloyd_weighted(&data.x, &WeightVector::uniform(p), k, &kmeans)?;
            (fit.model.labels().to_vec(), BTreeSet::new(), vec![1.0; p])
        }
        Method::Tkm { alpha } => {
            let fit = trimmed_kmeans(&data.x, k, *alpha, &kmeans)?;
            (fit.model.labels().to_vec(), fit.outliers, vec![1.0; p])
        }
        Method::Arsk { weight, error } => {
            let mut opts = ArskOptions::new(
                k,
                PenaltySpec::new(*error, 1.0, settings.scad_a)?,
                PenaltySpec::new(*weight, 0.0, settings.scad_a)?,
            );
            opts.kmeans = kmeans;
            opts.max_outer_iter = settings.max_outer_iter;
            opts.init_error_fraction = settings.init_error_fraction;
            opts.restore_mode = settings.restore_mode;
            opts.seed = derive_seed(seed, stream::BENCH_METHOD, 1);

            let (lambda1, lambda2) = match spec.lambda {
                LambdaPolicy::Fixed { lambda1, lambda2 } => (lambda1, lambda2),
                LambdaPolicy::Gap {
                    b,
                    grid_size,
                    decay,
                    lambda1_dagger,
                } => {
                    let cfg = TuneConfig {
                        b,
                        grid_size,
                        decay,
                        lambda1_dagger,
                        seed: derive_seed(seed, stream::BENCH_METHOD, 2),
                    };
                    let result = tune(&data.x, k, &cfg, &opts)?;
                    (result.lambda1_star, result.lambda2_star)
                }
            };
            opts.penalty_e = opts.penalty_e.with_lambda(lambda1)?;
            opts.penalty_w = opts.penalty_w.with_lambda(lambda2)?;
            let fit = arsk::fit(&data.x, &opts)?;
            (
                fit.model.labels().to_vec(),
                fit.outlier_indices,
                fit.weights.as_slice().to_vec(),
            )
        }
    };

    let cer = metrics::cer_with_outliers(
        &data.true_labels,
        &data.outlier_flags,
        &labels,
        &outliers,
        k,
    )?;
    let (tpr, tnr) = metrics::tpr_tnr(&weights, &data.informative, p);
    Ok(RepMetrics {
        cer,
        tpr,
        tnr,
        detected: outliers.len(),
    })
}

/// One aggregated table row.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub scenario: String,
    pub method: String,
    pub reps: usize,
    pub failures: usize,
    pub cer_mean: f64,
    pub cer_se: f64,
    pub tpr_mean: f64,
    pub tpr_se: f64,
    pub tnr_mean: f64,
    pub tnr_se: f64,
    pub outliers_mean: f64,
    pub outliers_se: f64,
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Run the full bench. Replicates of every (scenario, method) pair run in
/// parallel on the current rayon pool; rows come back ordered by
/// (scenario index, method index).
pub fn run_bench(cfg: &BenchConfig) -> CliResult<Vec<BenchRow>> {
    if cfg.reps == 0 {
        return Err(CliError::Parse("reps must be >= 1".to_string()));
    }
    let methods: Vec<Method> = cfg
        .methods
        .iter()
        .map(parse_method)
        .collect::<CliResult<_>>()?;

    // Datasets are shared across methods within a replicate.
    let mut tasks = Vec::new();
    for si in 0..cfg.scenarios.len() {
        for mi in 0..cfg.methods.len() {
            for rep in 0..cfg.reps {
                tasks.push((si, mi, rep));
            }
        }
    }

    let outcomes: Vec<Result<RepMetrics, ArskError>> = tasks
        .par_iter()
        .map(|&(si, mi, rep)| {
            let scenario = &cfg.scenarios[si];
            let scen_seed = derive_seed(cfg.seed, stream::BENCH_DATA, si as u64);
            let sim = SimConfig {
                k: scenario.k,
                n_per_cluster: scenario.n_per_cluster,
                p: scenario.p,
                q: scenario.q,
                pi: scenario.pi,
                covariance: scenario.covariance,
                seed: derive_seed(scen_seed, stream::BENCH_DATA, rep as u64),
            };
            let data = gen_dataset(&sim)?;
            let method_seed = derive_seed(
                derive_seed(scen_seed, stream::BENCH_METHOD, mi as u64),
                stream::BENCH_METHOD,
                rep as u64,
            );
            run_method(&methods[mi], &cfg.methods[mi], &data, &cfg.fit, method_seed)
        })
        .collect();

    let mut rows = Vec::new();
    for (si, scenario) in cfg.scenarios.iter().enumerate() {
        for (mi, method) in cfg.methods.iter().enumerate() {
            let base = (si * cfg.methods.len() + mi) * cfg.reps;
            let mut cer = Vec::new();
            let mut tpr = Vec::new();
            let mut tnr = Vec::new();
            let mut detected = Vec::new();
            let mut failures = 0usize;
            for rep in 0..cfg.reps {
                match &outcomes[base + rep] {
                    Ok(m) => {
                        cer.push(m.cer);
                        tpr.push(m.tpr);
                        tnr.push(m.tnr);
                        detected.push(m.detected as f64);
                    }
                    Err(ArskError::DegenerateWeights)
                    | Err(ArskError::TuningFailed(_))
                    | Err(ArskError::InfeasibleLambda { .. })
                    | Err(ArskError::DegenerateStructure { .. }) => failures += 1,
                    Err(other) => {
                        return Err(CliError::Parse(format!(
                            "scenario {:?} method {:?} rep {rep}: {other}",
                            scenario.name, method.name
                        )))
                    }
                }
            }
            let (cer_mean, cer_se) = mean_se(&cer);
            let (tpr_mean, tpr_se) = mean_se(&tpr);
            let (tnr_mean, tnr_se) = mean_se(&tnr);
            let (outliers_mean, outliers_se) = mean_se(&detected);
            rows.push(BenchRow {
                scenario: scenario.name.clone(),
                method: method.name.clone(),
                reps: cfg.reps,
                failures,
                cer_mean,
                cer_se,
                tpr_mean,
                tpr_se,
                tnr_mean,
                tnr_se,
                outliers_mean,
                outliers_se,
            });
        }
    }
    Ok(rows)
}

pub const BENCH_CSV_HEADER: &str = "scenario,method,reps,failures,cer_mean,cer_se,tpr_mean,tpr_se,tnr_mean,tnr_se,outliers_mean,outliers_se";

/// Render the table as CSV with shortest round-trip floats, so parsing it
/// back reproduces the in-memory rows exactly.
pub fn render_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(BENCH_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.scenario,
            r.method,
            r.reps,
            r.failures,
            r.cer_mean,
            r.cer_se,
            r.tpr_mean,
            r.tpr_se,
            r.tnr_mean,
            r.tnr_se,
            r.outliers_mean,
            r.outliers_se
        ));
    }
    out
}

/// Parse a table written by [`render_csv`].
pub fn parse_csv(text: &str) -> CliResult<Vec<BenchRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == BENCH_CSV_HEADER => {}
        other => {
            return Err(CliError::Parse(format!(
                "unexpected bench CSV header: {other:?}"
            )))
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 12 {
            return Err(CliError::Parse(format!(
                "bench CSV line {}: expected 12 fields, found {}",
                i + 2,
                fields.len()
            )));
        }
        let num = |s: &str| -> CliResult<f64> {
            s.parse()
                .map_err(|_| CliError::Parse(format!("bench CSV line {}: bad number {s:?}", i + 2)))
        };
        rows.push(BenchRow {
            scenario: fields[0].to_string(),
            method: fields[1].to_string(),
            reps: fields[2]
                .parse()
                .map_err(|_| CliError::Parse("bad reps".to_string()))?,
            failures: fields[3]
                .parse()
                .map_err(|_| CliError::Parse("bad failures".to_string()))?,
            cer_mean: num(fields[4])?,
            cer_se: num(fields[5])?,
            tpr_mean: num(fields[6])?,
            tpr_se: num(fields[7])?,
            tnr_mean: num(fields[8])?,
            tnr_se: num(fields[9])?,
            outliers_mean: num(fields[10])?,
            outliers_se: num(fields[11])?,
        });
    }
    Ok(rows)
}
