use std::path::Path;
use std::process::{Command, Output};

fn slowfast(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slowfast"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env("SLOWFAST_THREADS", "1")
        .output()
        .unwrap()
}

#[test]
fn converge_writes_reproducible_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let args = ["converge", "--epsilon", "0.05,0.02", "--paths", "8", "--seed", "4"];
    assert_eq!(slowfast(&args, &a).status.code(), Some(0));
    assert_eq!(slowfast(&args, &b).status.code(), Some(0));
    let csv_a = std::fs::read_to_string(a.join("convergence.csv")).unwrap();
    let csv_b = std::fs::read_to_string(b.join("convergence.csv")).unwrap();
    assert_eq!(csv_a, csv_b);
    let mut lines = csv_a.lines();
    assert!(lines.next().unwrap().starts_with("# slowfast 0.1.0 seed=4 config_hash="));
    assert_eq!(lines.next().unwrap(), "epsilon,mean_sup_dist,stderr,n_paths,seed");
    assert_eq!(lines.count(), 2);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["name"], "converge");
}

#[test]
fn flags_override_the_run_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, "command = \"quasipotential\"\nx_grid = [0.0]\nseed = 9\n").unwrap();
    let out = slowfast(&["--config", cfg.to_str().unwrap(), "--x-grid", "1.0"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(tmp.path().join("quasipotential.csv")).unwrap();
    let row = csv.lines().nth(2).unwrap();
    assert!(row.starts_with("1,2,2.25"), "{row}");
}

#[test]
fn errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = slowfast(&["invariant", "--model", "quadratic_bowl", "--param", "m=3", "--y0", "0,0,0"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("quadrature supports m ≤ 2"));

    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "command = \"simulate\"\nepsilom = [0.1]\n").unwrap();
    let out = slowfast(&["--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epsilom"));

    let out = slowfast(&["simulate", "--alpha", "0"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha must lie in (0,1)"));

    let out = slowfast(&["simulate", "--no-such-flag"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn failed_flag_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(
        &cfg,
        "command = \"reproduce\"\nexample = \"example_2_1\"\nepsilon = [0.05, 0.02]\npaths = 6\n\n[reproduce]\nconvergence_max_dist = 0.001\nlimit_dt = 0.01\n",
    )
    .unwrap();
    let out = slowfast(&["--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["flags"]["convergence_max_dist"], false);
}

#[test]
fn bad_thread_count_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_slowfast"))
        .args(["quasipotential", "--out"])
        .arg(tmp.path())
        .env("SLOWFAST_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
