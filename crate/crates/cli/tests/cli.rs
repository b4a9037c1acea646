use std::path::Path;
use std::process::{Command, Output};

use snmf_core::mtx;

fn snmf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snmf"))
        .args(args)
        .output()
        .expect("failed to run snmf")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn summary(prefix: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(format!("{}_summary.json", prefix.display())).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn generate_round_trips_through_matrix_market() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ck.mtx");
    let o = snmf(&["generate", "--gen-method", "ck", "--gen-n", "15", "--gen-m", "3", "--seed", "4", "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = mtx::read_path(&out).unwrap();
    assert_eq!(m.n(), 15);
    let again = mtx::parse(&mtx::to_string(&m), Path::new("again")).unwrap();
    for i in 0..15 {
        for j in 0..15 {
            assert_eq!(m.get(i, j), again.get(i, j));
            assert_eq!(m.get(i, j), m.get(j, i));
        }
    }
}

#[test]
fn sgk_output_is_sparse() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sgk.mtx");
    let o = snmf(&["generate", "--gen-method", "sgk", "--gen-n", "100", "--gen-m", "2", "--seed", "1", "--out", path_str(&out)]);
    assert!(o.status.success());
    let m = mtx::read_path(&out).unwrap();
    assert_eq!(m.n(), 100);
    assert!(m.nnz() < 100 * 100, "nnz = {}", m.nnz());
}

#[test]
fn generate_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.mtx"), dir.path().join("b.mtx"));
    for p in [&a, &b] {
        let o = snmf(&["generate", "--gen-method", "sgk", "--gen-n", "40", "--gen-m", "3", "--seed", "9", "--out", path_str(p)]);
        assert!(o.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn permuted_solves_repeat_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let prefix = dir.path().join(name);
        let o = snmf(&[
            "solve", "--gen-method", "ck", "--gen-n", "25", "--rank", "3", "--engine", "sbsum",
            "--policy", "permute", "--seed", "7", "--max-sweeps", "50", "--out", path_str(&prefix),
        ]);
        assert!(matches!(o.status.code(), Some(0 | 2)), "{}", String::from_utf8_lossy(&o.stderr));
        let mut s = summary(&prefix);
        s.as_object_mut().unwrap().remove("wall_time_s");
        let factor = std::fs::read(format!("{}_factor.csv", prefix.display())).unwrap();
        runs.push((s, factor));
    }
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn zero_sweeps_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("z");
    let o = snmf(&["solve", "--gen-method", "ck", "--gen-n", "10", "--rank", "2", "--max-sweeps", "0", "--out", path_str(&prefix)]);
    assert_eq!(o.status.code(), Some(2));
    let trace = std::fs::read_to_string(format!("{}_trace.csv", prefix.display())).unwrap();
    assert_eq!(trace.lines().collect::<Vec<_>>(), ["sweep,elapsed_s,objective,rel_residual_pct,opt_gap,blocks"]);
    assert_eq!(summary(&prefix)["sweeps"], 0);
}

#[test]
fn noiseless_instance_converges() {
    let dir = tempfile::tempdir().unwrap();
    for engine in ["sbsum", "vbsum"] {
        let prefix = dir.path().join(engine);
        let o = snmf(&[
            "solve", "--gen-method", "ck", "--gen-n", "20", "--gen-m", "4", "--gen-noise", "0", "--rank", "4",
            "--engine", engine, "--seed", "1", "--gap-tol", "1e-4", "--max-sweeps", "1000", "--out", path_str(&prefix),
        ]);
        assert_eq!(o.status.code(), Some(0), "{engine}: {}", String::from_utf8_lossy(&o.stderr));
        let s = summary(&prefix);
        assert!(s["optimality_gap"].as_f64().unwrap() <= 1e-4);
        assert!(s["sweeps"].as_u64().unwrap() <= 1000);

        let trace = std::fs::read_to_string(format!("{}_trace.csv", prefix.display())).unwrap();
        assert_eq!(trace.lines().count() as u64, s["sweeps"].as_u64().unwrap() + 1);
        let factor = std::fs::read_to_string(format!("{}_factor.csv", prefix.display())).unwrap();
        assert_eq!(factor.lines().count(), 20);
        assert!(factor.lines().all(|l| l.split(',').count() == 4));
    }
}

#[test]
fn parallel_solve_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("p");
    let o = snmf(&[
        "solve", "--gen-method", "ck", "--gen-n", "30", "--rank", "3", "--workers", "3",
        "--stepsize", "0.8", "--stepsize-decay", "--max-sweeps", "20", "--out", path_str(&prefix),
    ]);
    assert!(matches!(o.status.code(), Some(0 | 2)), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(summary(&prefix)["workers"], 3);
}

#[test]
fn bad_invocations_exit_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("bad");
    let input = dir.path().join("missing.mtx");
    let cases: [&[&str]; 4] = [
        &["solve", "--rank", "2", "--out", path_str(&prefix)],
        &["solve", "--input", path_str(&input), "--gen-method", "ck", "--gen-n", "5", "--rank", "2", "--out", path_str(&prefix)],
        &["solve", "--input", path_str(&input), "--rank", "2", "--out", path_str(&prefix)],
        &["solve", "--gen-method", "ck", "--gen-n", "5", "--rank", "2", "--stepsize", "0.5", "--out", path_str(&prefix)],
    ];
    for args in cases {
        let o = snmf(args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
    }
}

#[test]
fn rank_above_size_warns() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("w");
    let o = snmf(&["solve", "--gen-method", "ck", "--gen-n", "3", "--rank", "5", "--max-sweeps", "2", "--out", path_str(&prefix)]);
    assert!(matches!(o.status.code(), Some(0 | 2)));
    assert!(String::from_utf8_lossy(&o.stderr).contains("exceeds"));
}
