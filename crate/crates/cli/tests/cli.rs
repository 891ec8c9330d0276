//! End-to-end tests of the command-line surface: exit codes, file formats,
//! and the simulate -> fit -> eval pipeline.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use arsk_cli::bench::{parse_csv, render_csv, run_bench, BenchConfig};
use arsk_cli::io::{read_json, read_matrix_csv, GroundTruth};
use arsk_core::tuning::TuneResult;
use arsk_core::FitResult;

fn arsk(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arsk"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn pipeline_simulate_fit_eval_runs_clean() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let sim = arsk(
        d,
        &[
            "simulate",
            "--p",
            "10",
            "--q",
            "5",
            "--n-per-cluster",
            "20",
            "--pi",
            "0.0",
            "--seed",
            "7",
            "--out-prefix",
            "demo",
        ],
    );
    assert_eq!(code(&sim), 0, "{}", String::from_utf8_lossy(&sim.stderr));
    assert!(d.join("demo.csv").exists());
    assert!(d.join("demo.truth.json").exists());

    let fit = arsk(
        d,
        &[
            "fit",
            "demo.csv",
            "--k",
            "3",
            "--lambda1",
            "1e12",
            "--lambda2",
            "0",
            "--seed",
            "3",
            "--out",
            "result.json",
        ],
    );
    assert_eq!(code(&fit), 0, "{}", String::from_utf8_lossy(&fit.stderr));

    let eval = arsk(
        d,
        &["eval", "result.json", "demo.truth.json", "--out", "metrics.json"],
    );
    assert_eq!(code(&eval), 0, "{}", String::from_utf8_lossy(&eval.stderr));

    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("metrics.json")).unwrap()).unwrap();
    let cer = metrics["cer_with_outliers"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&cer));
    // Separated clusters recover the truth.
    assert_eq!(cer, 0.0);
    assert_eq!(metrics["tpr"].as_f64().unwrap(), 1.0);
}

#[test]
fn same_seed_gives_byte_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for prefix in ["a", "b"] {
        let out = arsk(
            d,
            &[
                "simulate", "--p", "8", "--q", "2", "--n-per-cluster", "10", "--pi", "0.2",
                "--cov", "rotated", "--seed", "99", "--out-prefix", prefix,
            ],
        );
        assert_eq!(code(&out), 0);
    }
    assert_eq!(
        fs::read(d.join("a.csv")).unwrap(),
        fs::read(d.join("b.csv")).unwrap()
    );
    let ta: GroundTruth = read_json(&d.join("a.truth.json")).unwrap();
    let tb: GroundTruth = read_json(&d.join("b.truth.json")).unwrap();
    assert_eq!(ta, tb);
    // Sidecar has exactly q informative entries.
    assert_eq!(ta.informative.len(), 2);
}

#[test]
fn ragged_csv_is_a_parse_error_citing_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("bad.csv"), "1.0,2.0\n3.0\n4.0,5.0\n").unwrap();
    let out = arsk(
        d,
        &["fit", "bad.csv", "--k", "2", "--lambda1", "1", "--lambda2", "0"],
    );
    assert_eq!(code(&out), 2);
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("2"), "message should cite the line: {msg}");
}

#[test]
fn non_numeric_cell_is_a_parse_error_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("bad.csv"), "1.0,2.0\n3.0,oops\n").unwrap();
    let out = arsk(
        d,
        &["fit", "bad.csv", "--k", "2", "--lambda1", "1", "--lambda2", "0"],
    );
    assert_eq!(code(&out), 2);
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("line 2") && msg.contains("column 2"), "{msg}");
    assert!(msg.contains("oops"), "{msg}");
}

#[test]
fn huge_lambda2_exits_with_degenerate_weights_code() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let sim = arsk(
        d,
        &[
            "simulate", "--p", "6", "--q", "2", "--n-per-cluster", "10", "--seed", "5",
            "--out-prefix", "demo",
        ],
    );
    assert_eq!(code(&sim), 0);
    let out = arsk(
        d,
        &[
            "fit", "demo.csv", "--k", "3", "--lambda1", "8", "--lambda2", "1e15",
        ],
    );
    assert_eq!(code(&out), 3);
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("lambda2"), "diagnostic names lambda2: {msg}");
}

#[test]
fn unconverged_fit_exits_with_code_four_but_writes_the_result() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let sim = arsk(
        d,
        &[
            "simulate", "--p", "8", "--q", "3", "--n-per-cluster", "12", "--pi", "0.1",
            "--seed", "3", "--out-prefix", "demo",
        ],
    );
    assert_eq!(code(&sim), 0);
    // One outer iteration moves the weights from uniform to BCSS-driven,
    // so the relative-change criterion cannot be met yet.
    let out = arsk(
        d,
        &[
            "fit", "demo.csv", "--k", "3", "--lambda1", "2.5", "--lambda2", "0",
            "--max-outer-iter", "1", "--out", "result.json",
        ],
    );
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
    let written: FitResult = read_json(&d.join("result.json")).unwrap();
    assert!(!written.converged);
    assert_eq!(written.outer_iterations, 1);
}

#[test]
fn tune_writes_aligned_gap_grids() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let sim = arsk(
        d,
        &[
            "simulate", "--p", "6", "--q", "2", "--n-per-cluster", "10", "--seed", "11",
            "--out-prefix", "demo",
        ],
    );
    assert_eq!(code(&sim), 0);
    let out = arsk(
        d,
        &[
            "tune", "demo.csv", "--k", "3", "--b", "2", "--grid-size", "4", "--seed", "2",
            "--restarts", "5", "--init-error-fraction", "0.2", "--out", "tune.json",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let tune: TuneResult = read_json(&d.join("tune.json")).unwrap();
    assert_eq!(tune.gap_grid_2.len(), 4);
    assert!(tune
        .gap_grid_2
        .iter()
        .any(|p| p.lambda == tune.lambda2_star));
    assert!(tune
        .gap_grid_1
        .iter()
        .any(|p| p.lambda == tune.lambda1_star));
}

#[test]
fn eval_rejects_mismatched_lengths() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for (prefix, n, seed) in [("a", "10", "1"), ("b", "12", "1")] {
        let out = arsk(
            d,
            &[
                "simulate", "--p", "5", "--q", "2", "--n-per-cluster", n, "--seed", seed,
                "--out-prefix", prefix,
            ],
        );
        assert_eq!(code(&out), 0);
    }
    let fit = arsk(
        d,
        &[
            "fit", "a.csv", "--k", "3", "--lambda1", "1e12", "--lambda2", "0", "--out",
            "result.json",
        ],
    );
    assert_eq!(code(&fit), 0);
    let out = arsk(d, &["eval", "result.json", "b.truth.json"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn eval_cer_is_invariant_to_relabeling() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let sim = arsk(
        d,
        &[
            "simulate", "--p", "8", "--q", "3", "--n-per-cluster", "15", "--seed", "21",
            "--out-prefix", "demo",
        ],
    );
    assert_eq!(code(&sim), 0);
    let fit = arsk(
        d,
        &[
            "fit", "demo.csv", "--k", "3", "--lambda1", "1e12", "--lambda2", "0", "--out",
            "result.json",
        ],
    );
    assert_eq!(code(&fit), 0);

    // Permute the predicted cluster ids in the result file.
    let mut fitres: FitResult = read_json(&d.join("result.json")).unwrap();
    let perm = |l: usize| (l % 3) + 1;
    let relabeled: Vec<usize> = fitres.model.labels().iter().map(|&l| perm(l)).collect();
    let mut centers = fitres.model.centers().clone();
    for l in 1..=3usize {
        let row = fitres.model.centers().row(l - 1).to_vec();
        for (j, v) in row.iter().enumerate() {
            centers[[perm(l) - 1, j]] = *v;
        }
    }
    fitres.model = arsk_core::ClusterModel::new(relabeled, 3, centers).unwrap();
    arsk_cli::io::write_json(&d.join("relabel.json"), &fitres).unwrap();

    let e1 = arsk(d, &["eval", "result.json", "demo.truth.json", "--out", "m1.json"]);
    let e2 = arsk(d, &["eval", "relabel.json", "demo.truth.json", "--out", "m2.json"]);
    assert_eq!(code(&e1), 0);
    assert_eq!(code(&e2), 0);
    let m1: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("m1.json")).unwrap()).unwrap();
    let m2: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("m2.json")).unwrap()).unwrap();
    assert_eq!(m1["cer"], m2["cer"]);
}

fn smoke_bench_config() -> BenchConfig {
    serde_json::from_value(serde_json::json!({
        "seed": 414243,
        "reps": 2,
        "scenarios": [
            {"name": "smoke", "k": 2, "n_per_cluster": 12, "p": 6, "q": 2, "pi": 0.0,
             "covariance": "identity"}
        ],
        "methods": [
            {"name": "kc"},
            {"name": "tkm", "alpha": 0.1},
            {"name": "soft-soft-arsk", "lambda": {"policy": "fixed", "lambda1": 1e12, "lambda2": 0.0}}
        ],
        "fit": {"restarts": 5, "init_error_fraction": 0.2}
    }))
    .unwrap()
}

#[test]
fn bench_smoke_has_full_schema_and_sane_ranges() {
    let rows = run_bench(&smoke_bench_config()).unwrap();
    assert_eq!(rows.len(), 3);
    for row in &rows {
        assert_eq!(row.reps, 2);
        assert_eq!(row.failures, 0);
        assert!((0.0..=1.0).contains(&row.cer_mean), "{row:?}");
        assert!((0.0..=1.0).contains(&row.tpr_mean));
        assert!((0.0..=1.0).contains(&row.tnr_mean));
        assert!(row.outliers_mean >= 0.0);
    }
    // The emitted CSV parses back to the exact in-memory report.
    let text = render_csv(&rows);
    assert_eq!(parse_csv(&text).unwrap(), rows);
}

#[test]
fn bench_rejects_unknown_method() {
    let mut cfg = smoke_bench_config();
    cfg.methods[0].name = "banana".to_string();
    let err = run_bench(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("banana"));
}

#[test]
fn bench_cli_round_trip_and_method_filter() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = smoke_bench_config();
    fs::write(
        d.join("scenario.json"),
        serde_json::to_string(&cfg).unwrap(),
    )
    .unwrap();
    let out = arsk(
        d,
        &[
            "bench",
            "--scenario-file",
            "scenario.json",
            "--methods",
            "kc,soft-soft-arsk",
            "--out",
            "table.csv",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = parse_csv(&fs::read_to_string(d.join("table.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].method, "kc");
    assert_eq!(rows[1].method, "soft-soft-arsk");

    let missing = arsk(
        d,
        &[
            "bench",
            "--scenario-file",
            "scenario.json",
            "--methods",
            "rskc",
            "--out",
            "t2.csv",
        ],
    );
    assert_eq!(code(&missing), 2);
}

#[test]
fn written_matrix_csv_round_trips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let sim = arsk(
        d,
        &[
            "simulate", "--p", "7", "--q", "3", "--n-per-cluster", "9", "--pi", "0.3",
            "--seed", "13", "--out-prefix", "demo",
        ],
    );
    assert_eq!(code(&sim), 0);
    let x = read_matrix_csv(&d.join("demo.csv"), false).unwrap();
    assert_eq!(x.n(), 27);
    assert_eq!(x.p(), 7);
    // Re-emit and compare bytes: shortest round-trip floats are stable.
    arsk_cli::io::write_matrix_csv(&d.join("again.csv"), x.values()).unwrap();
    assert_eq!(
        fs::read(d.join("demo.csv")).unwrap(),
        fs::read(d.join("again.csv")).unwrap()
    );
}
