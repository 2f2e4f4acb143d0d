use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use sylvadi::block::from_real;
use sylvadi::sparse::{read_block, write_block, write_matrix_market};
use sylvadi::SparseMatrix;

fn sylvadi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sylvadi")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn write_manifest(dir: &Path, manifest: &Value) -> PathBuf {
    let path = dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(manifest).unwrap()).unwrap();
    path
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn small_spec() -> Value {
    json!({"dimension": "3d", "n0_A": 5, "n0_B": 4, "r": 2, "seed": 7})
}

fn solve(manifest: &Path) -> Output {
    sylvadi(&["solve", "--manifest", manifest.to_str().unwrap()])
}

#[test]
fn gen_writes_stencil_matrices() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, r#"{"dimension": "3d", "n0_A": 2, "n0_B": 2, "r": 1, "seed": 0}"#).unwrap();
    let out = dir.path().join("gen");
    let res = sylvadi(&["gen", "--spec", spec.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let text = std::fs::read_to_string(out.join("A.mtx")).unwrap();
    let mut diagonal = Vec::new();
    for line in text.lines().filter(|l| !l.starts_with('%')).skip(1) {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f[0] == f[1] {
            diagonal.push(f[2].parse::<f64>().unwrap());
        }
    }
    assert_eq!(diagonal.len(), 8);
    assert!(diagonal.iter().all(|d| (d + 54.0).abs() < 1e-12));
    for name in ["B.mtx", "f.mtx", "g.mtx"] {
        assert!(out.join(name).exists());
    }
}

#[test]
fn empty_strategy_list_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(
        dir.path(),
        &json!({"problem": {"generate": small_spec()}, "strategies": [], "out": "out"}),
    );
    let res = solve(&m);
    assert_eq!(code(&res), 2);
    assert!(String::from_utf8_lossy(&res.stderr).contains("no strategies"));
}

#[test]
fn missing_matrix_file_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let files = json!({"a": "A.mtx", "b": "B.mtx", "f": "f.mtx", "g": "g.mtx"});
    let m = write_manifest(
        dir.path(),
        &json!({"problem": {"files": files}, "strategies": [{"kind": "dynamic_mid"}], "out": "out"}),
    );
    assert_eq!(code(&solve(&m)), 2);
}

#[test]
fn malformed_manifest_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("manifest.json");
    std::fs::write(&path, "{ not json").unwrap();
    assert_eq!(code(&solve(&path)), 2);
}

#[test]
fn paired_strategies_share_shifts_and_report_savings() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(
        dir.path(),
        &json!({
            "problem": {"generate": small_spec()},
            "strategies": [{"kind": "fixed", "delta": 5e-10}, {"kind": "dynamic_mid_bl"}],
            "save_factors": true,
            "solvers": {"preconditioner_a": {"kind": "ict", "droptol": 0.1},
                        "preconditioner_b": {"kind": "ict", "droptol": 0.1}},
            "out": "out"
        }),
    );
    let res = solve(&m);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let out = dir.path().join("out");
    let summary = read_json(&out.join("summary.json"));
    let runs = summary["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 2);
    let header = "step,scaled_res,delta_A,delta_B,achieved_rA,achieved_rB,inner_it_A,inner_it_B,u,v,wall_ms\n";
    for run in runs {
        let csv = std::fs::read_to_string(out.join(run["directory"].as_str().unwrap()).join("report.csv")).unwrap();
        assert!(csv.starts_with(header), "{}", csv.lines().next().unwrap());
        assert_eq!(csv.lines().count(), 1 + run["outer_iters"].as_u64().unwrap() as usize);
        for key in [
            "outer_iters",
            "dim",
            "scaled_true_residual",
            "sum_inner_A",
            "sum_inner_B",
            "wall_ms",
        ] {
            assert!(run.get(key).is_some(), "missing {key}");
        }
        assert!(run["scaled_true_residual"].as_f64().unwrap() < 1e-7);
    }
    let fixed = runs[0]["wall_ms"].as_f64().unwrap();
    let dynamic = runs[1]["wall_ms"].as_f64().unwrap();
    let save = runs[1]["savings_vs_fixed"].as_f64().unwrap();
    assert!((save - (1.0 - dynamic / fixed)).abs() < 1e-12);
    assert_eq!(runs[0]["savings_vs_fixed"].as_f64(), Some(0.0));
    // pinned shifts: every run stepped through the same serialized sequence
    let shifts = read_json(&out.join("shifts.json"));
    let npairs = shifts["alpha"].as_array().unwrap().len();
    for run in runs {
        let state = read_json(&out.join(run["directory"].as_str().unwrap()).join("state.json"));
        for (k, (alpha, beta)) in state["alpha"]
            .as_array()
            .unwrap()
            .iter()
            .zip(state["beta"].as_array().unwrap())
            .enumerate()
        {
            assert_eq!(alpha, &shifts["alpha"][k % npairs]);
            assert_eq!(beta, &shifts["beta"][k % npairs]);
        }
    }
}

fn random_stable(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let shift = 0.5 * n as f64 + 1.0;
    DMatrix::from_fn(n, n, |i, j| {
        let v = rng.random::<f64>() - 0.5;
        if i == j {
            v - shift
        } else {
            v
        }
    })
}

/// `A X + X B = -f g^T` by the Kronecker system.
fn kronecker(a: &DMatrix<f64>, b: &DMatrix<f64>, f: &DMatrix<f64>, g: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, m) = (a.nrows(), b.nrows());
    let big = DMatrix::<f64>::identity(m, m).kronecker(a) + b.transpose().kronecker(&DMatrix::identity(n, n));
    let rhs = -(f * g.transpose());
    let x = big.lu().solve(&DVector::from_column_slice(rhs.as_slice())).unwrap();
    DMatrix::from_column_slice(n, m, x.as_slice())
}

#[test]
fn exact_direct_matches_kronecker_and_verifies_with_zero_gap() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    let a = random_stable(40, &mut rng);
    let b = random_stable(30, &mut rng);
    let f = DMatrix::from_fn(40, 2, |_, _| rng.random::<f64>() - 0.5);
    let g = DMatrix::from_fn(30, 2, |_, _| rng.random::<f64>() - 0.5);
    write_matrix_market(&SparseMatrix::from_dense(&a), dir.path().join("A.mtx")).unwrap();
    write_matrix_market(&SparseMatrix::from_dense(&b), dir.path().join("B.mtx")).unwrap();
    write_block(&from_real(&f), dir.path().join("f.mtx")).unwrap();
    write_block(&from_real(&g), dir.path().join("g.mtx")).unwrap();
    let tau = 1e-8;
    let m = write_manifest(
        dir.path(),
        &json!({
            "problem": {"files": {"a": "A.mtx", "b": "B.mtx", "f": "f.mtx", "g": "g.mtx"}},
            "strategies": [{"kind": "exact_direct"}],
            "config": {"outer_tolerance": tau, "keep_diagnostics": true},
            "save_factors": true,
            "out": "out"
        }),
    );
    let res = solve(&m);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let out = dir.path().join("out");
    let summary = read_json(&out.join("summary.json"));
    let run = &summary["runs"][0];
    assert!(run["scaled_true_residual"].as_f64().unwrap() < tau);
    assert_eq!(run["sum_inner_A"].as_u64(), Some(0));

    let run_dir = out.join(run["directory"].as_str().unwrap());
    let z = read_block(run_dir.join("Z.mtx")).unwrap();
    let y = read_block(run_dir.join("Y.mtx")).unwrap();
    let gamma = read_block(run_dir.join("gamma.mtx")).unwrap();
    let mut zg = z.clone();
    for (j, gj) in gamma.iter().enumerate() {
        zg.column_mut(j).iter_mut().for_each(|v| *v *= *gj);
    }
    let x = zg * y.adjoint();
    let oracle = from_real(&kronecker(&a, &b, &f, &g));
    assert!((x - &oracle).norm() <= 1e-6 * oracle.norm());

    let res = sylvadi(&["verify", "--dir", out.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let diag = read_json(&out.join("verify.json"));
    let d = &diag[0];
    assert!(d["gap"].as_f64().unwrap() <= 1e-10);
    assert!(d["identity_defect"].as_f64().unwrap() <= 1e-10);
    assert!(d["scaled_true_residual"].as_f64().unwrap() < tau);
}

#[test]
fn non_convergence_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(
        dir.path(),
        &json!({
            "problem": {"generate": small_spec()},
            "strategies": [{"kind": "dynamic_mid"}],
            "config": {"max_steps": 1},
            "out": "out"
        }),
    );
    let res = solve(&m);
    assert_eq!(code(&res), 3);
    let summary = read_json(&dir.path().join("out/summary.json"));
    assert_eq!(summary["runs"][0]["converged"], json!(false));
}

#[test]
fn shift_file_is_loaded_and_parallel_runs_are_flagged() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("pinned.json"),
        r#"{"alpha": [[-100.0, 0.0], [-400.0, 0.0]], "beta": [[-80.0, 0.0], [-300.0, 0.0]]}"#,
    )
    .unwrap();
    let m = write_manifest(
        dir.path(),
        &json!({
            "problem": {"generate": {"dimension": "2d", "n0_A": 6, "n0_B": 5, "r": 1, "seed": 2}},
            "strategies": [{"kind": "dynamic_mid"}, {"kind": "dynamic_b"}],
            "shifts": {"file": "pinned.json"},
            "config": {"max_steps": 50},
            "parallel": true,
            "out": "out"
        }),
    );
    let res = solve(&m);
    assert!(matches!(code(&res), 0 | 3), "{}", String::from_utf8_lossy(&res.stderr));
    let summary = read_json(&dir.path().join("out/summary.json"));
    assert_eq!(summary["shift_pairs"], json!(2));
    assert!(summary["timing_note"].is_string());
    let echoed = read_json(&dir.path().join("out/shifts.json"));
    assert_eq!(echoed["alpha"][1][0].as_f64(), Some(-400.0));
}

#[test]
fn singleton_ritz_data_echoes_one_pair() {
    let dir = tempfile::tempdir().unwrap();
    write_matrix_market(&SparseMatrix::from_diagonal(&[-2.0]), dir.path().join("A.mtx")).unwrap();
    write_matrix_market(&SparseMatrix::from_diagonal(&[-3.0]), dir.path().join("B.mtx")).unwrap();
    let out = dir.path().join("shifts.json");
    let p = |n: &str| dir.path().join(n).to_str().unwrap().to_string();
    let res = sylvadi(&[
        "shifts",
        "--a",
        &p("A.mtx"),
        "--b",
        &p("B.mtx"),
        "--pairs",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let s = read_json(&out);
    assert_eq!(s["alpha"].as_array().unwrap().len(), 1);
    assert!((s["alpha"][0][0].as_f64().unwrap() + 2.0).abs() < 1e-12);
    assert!((s["beta"][0][0].as_f64().unwrap() + 3.0).abs() < 1e-12);
}

#[test]
fn bad_thread_count_is_rejected() {
    let out = Command::new(env!("CARGO_BIN_EXE_sylvadi"))
        .args(["verify", "--dir", "."])
        .env("SYLVADI_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn verify_without_saved_runs_fails() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&sylvadi(&["verify", "--dir", dir.path().to_str().unwrap()])), 2);
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(code(&sylvadi(&["frobnicate"])), 2);
}
