use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;
use tracereg::designs::{generate_ground_truth, write_observations_file, Design, ObservationSet, Samples};
use tracereg::linalg::text::read_matrix_text;
use tracereg::linalg::DenseMatrix;

fn tracereg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tracereg"))
        .args(args)
        .output()
        .unwrap()
}

fn code(args: &[&str]) -> i32 {
    tracereg(args).status.code().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validation_errors_exit_one() {
    assert_eq!(code(&["rate-sweep", "--rank", "0", "--out", "/dev/null"]), 1);
    assert_eq!(code(&["rate-sweep", "--lambda", "0.1", "--out", "/dev/null"]), 1);
    assert_eq!(code(&["rate-sweep", "--no-such-flag"]), 1);
    assert_eq!(code(&["rate-sweep", "--trials", "2"]), 1);
    assert_eq!(
        code(&["estimate", "--input", "/nonexistent/obs.txt", "--out", "/dev/null"]),
        1
    );
    let out = tracereg(&[
        "simulate",
        "--noise",
        "bounded",
        "--a",
        "2",
        "--eta",
        "1",
        "--out",
        "/dev/null",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("eta"));
}

#[test]
fn help_exits_zero() {
    assert_eq!(code(&["--help"]), 0);
}

#[test]
fn non_finite_results_exit_two() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("s.csv");
    assert_eq!(
        code(&["rate-sweep", "--sigma", "1e200", "--trials", "2", "--out", path(&out)]),
        2
    );
}

#[test]
fn failed_packing_check_exits_three() {
    let dir = TempDir::new().unwrap();
    let args = [
        "packing",
        "--m1",
        "16",
        "--m2",
        "8",
        "--rank",
        "1",
        "--n",
        "1000000",
        "--gamma",
        "1",
        "--out",
        path(dir.path()),
    ];
    assert_eq!(code(&args), 3);
}

#[test]
fn sweep_output_is_bit_identical_across_runs_and_thread_counts() {
    let dir = TempDir::new().unwrap();
    let mut csvs = Vec::new();
    for threads in ["1", "4"] {
        let out = dir.path().join(format!("s{threads}.csv"));
        let run = Command::new(env!("CARGO_BIN_EXE_tracereg"))
            .env("RAYON_NUM_THREADS", threads)
            .args([
                "rate-sweep",
                "--m1",
                "10",
                "--m2",
                "12",
                "--n-grid",
                "200,400,800",
                "--trials",
                "5",
                "--seed",
                "9",
                "--out",
                path(&out),
            ])
            .output()
            .unwrap();
        assert!(run.status.success());
        csvs.push((
            std::fs::read(&out).unwrap(),
            std::fs::read(out.with_extension("dat")).unwrap(),
        ));
    }
    assert_eq!(csvs[0], csvs[1]);
    let text = String::from_utf8(csvs[0].0.clone()).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "trial,m1,m2,n,rank_true,lambda,lambda_rule,frob_err_sq_norm,rank_hat,oracle_rhs_fast,oracle_rhs_slow,m_norm,bound_m,seed"
    );
    assert_eq!(lines.count(), 15);
    let dat = String::from_utf8(csvs[0].1.clone()).unwrap();
    assert_eq!(dat.lines().count(), 4);
}

#[test]
fn simulate_then_estimate_round_trip() {
    let dir = TempDir::new().unwrap();
    let obs = dir.path().join("obs.txt");
    assert_eq!(
        code(&[
            "simulate",
            "--m1",
            "8",
            "--m2",
            "6",
            "--n",
            "300",
            "--seed",
            "4",
            "--out",
            path(&obs)
        ]),
        0
    );
    let text = std::fs::read_to_string(&obs).unwrap();
    assert!(text.starts_with("USR 8 6 300\n"));
    assert_eq!(text.lines().count(), 301);
    let a0 = obs.with_extension("a0.txt");
    let est = dir.path().join("est.txt");
    assert_eq!(
        code(&[
            "estimate",
            "--input",
            path(&obs),
            "--a0",
            path(&a0),
            "--out",
            path(&est)
        ]),
        0
    );
    let a_hat: DenseMatrix<f64> = read_matrix_text(&std::fs::read_to_string(&est).unwrap()).unwrap();
    assert_eq!(a_hat.shape(), (8, 6));
    let side: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(est.with_extension("json")).unwrap()).unwrap();
    assert_eq!(side["rule"], "oracle");
    assert_eq!(side["iterations"], 0);
}

#[test]
fn estimate_on_noiseless_full_observation_recovers_a0() {
    let dir = TempDir::new().unwrap();
    let (m1, m2) = (5, 4);
    let a0 = generate_ground_truth(m1, m2, 2, 1.0, 17).unwrap();
    let mut samples = Vec::new();
    for i in 0..m1 {
        for j in 0..m2 {
            samples.push((DenseMatrix::basis(m1, m2, i, j), a0[(i, j)]));
        }
    }
    let matrices = samples.iter().map(|s| s.0.clone()).collect();
    let obs = ObservationSet::new(Design::fixed(matrices).unwrap(), Samples::Matrices(samples)).unwrap();
    let input = dir.path().join("full.txt");
    write_observations_file(&obs, &input).unwrap();
    assert!(std::fs::read_to_string(&input).unwrap().starts_with("FULL 5 4 20\n"));

    let est = dir.path().join("est.txt");
    let args = [
        "estimate",
        "--input",
        path(&input),
        "--lambda-rule",
        "fixed",
        "--lambda",
        "1e-9",
        "--tol",
        "1e-14",
        "--out",
        path(&est),
    ];
    assert_eq!(code(&args), 0);
    let a_hat: DenseMatrix<f64> = read_matrix_text(&std::fs::read_to_string(&est).unwrap()).unwrap();
    let gap = a_hat.sub(&a0).unwrap().max_abs();
    // Shrinkage per singular value is λ n/2 = 1e-8.
    assert!(gap < 1e-7, "gap {gap}");
}

#[test]
fn packing_writes_matrices_and_index() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("pk");
    let run = tracereg(&[
        "packing",
        "--m1",
        "16",
        "--m2",
        "8",
        "--rank",
        "1",
        "--n",
        "1000",
        "--seed",
        "13",
        "--out",
        path(&out),
    ]);
    assert!(run.status.success());
    let report: serde_json::Value = serde_json::from_slice(&run.stdout).unwrap();
    assert_eq!(report["passed"], true);
    let index: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("index.json")).unwrap()).unwrap();
    let card = index["cardinality"].as_u64().unwrap() as usize;
    assert!(card >= 5);
    for k in 0..card {
        assert!(out.join(format!("matrix_{k:04}.txt")).exists());
    }
}

#[test]
fn lasso_fits_a_csv_file() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("lin.csv");
    std::fs::write(&input, "4 2\n1 0 2\n0 1 -1\n1 1 1\n1 -1 3\n").unwrap();
    let run = tracereg(&[
        "lasso",
        "--input",
        path(&input),
        "--lambda-rule",
        "fixed",
        "--lambda",
        "0.1",
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let rep: serde_json::Value = serde_json::from_slice(&run.stdout).unwrap();
    assert_eq!(rep["converged"], true);
    assert_eq!(rep["beta"].as_array().unwrap().len(), 2);
}
