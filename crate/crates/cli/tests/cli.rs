use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_shuffle-align"))
}

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/two_user.txt")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn two_user_fixture_reaches_rank_one() {
    let o = run(&["single", "--instance", fixture().to_str().unwrap(), "--solvers", "dc"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.starts_with("dc: rank=1 dof=1 "), "{out}");
}

#[test]
fn nuclear_on_fixture_is_feasible_and_full_rank() {
    let o = run(&["single", "--instance", fixture().to_str().unwrap(), "--solvers", "nuclear"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let line = out.lines().next().unwrap();
    assert!(line.starts_with("nuclear: rank=2 "), "{line}");
    let feas: f64 = line
        .split_whitespace()
        .find_map(|w| w.strip_prefix("feasibility="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(feas <= 1e-6);
}

#[test]
fn verify_writes_report_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "single",
        "--instance",
        fixture().to_str().unwrap(),
        "--verify",
        "--trace",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("verify (dc rank 1): pass"), "{out}");
    assert!(out.contains("decode: max relative error"));
    let report = std::fs::read_to_string(dir.path().join("ia_report.csv")).unwrap();
    assert!(report.starts_with("k,l,desired_residual,worst_interference_residual,pass\n"));
    assert_eq!(report.lines().count(), 3);
    for solver in ["dc", "irls", "nuclear"] {
        let trace = std::fs::read_to_string(dir.path().join(format!("{solver}.csv"))).unwrap();
        assert!(trace.starts_with("iter,objective,step_norm,sigma_kplus1,residual\n"));
    }
}

#[test]
fn config_errors_exit_with_two() {
    let o = run(&["users", "--values", "7", "--reps", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mu*K"));

    let o = run(&["storage", "--solvers", "dc,simplex", "--reps", "1"]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["storage", "--verify", "--reps", "1"]);
    assert_eq!(o.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "# comment\nreps=2\nplacement=diagonal\n").unwrap();
    let o = run(&["storage", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_instance_file_is_an_io_error() {
    let o = run(&["single", "--instance", "/nonexistent/instance.txt"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_csv_has_schema_header_and_one_row_per_record() {
    let o = run(&["storage", "--reps", "2", "--values", "5,9", "--solvers", "dc,nuclear"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(
        lines.next().unwrap(),
        "scenario,sweep_value,trial,solver,rank,dof,dof_decimal,iterations,wall_ms,seed,feasibility_residual,status"
    );
    assert_eq!(lines.count(), 2 * 2 * 2);
}

#[test]
fn config_file_sets_the_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "reps=1\nvalues=6\nsolvers=nuclear\n").unwrap();
    let o = run(&["storage", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 2);
    assert!(out.lines().nth(1).unwrap().starts_with("storage,6,0,nuclear,"));
}

#[test]
fn sweep_csv_is_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for workers in ["1", "3"] {
        let path = dir.path().join(format!("w{workers}.csv"));
        let o = run(&[
            "antennas",
            "--reps",
            "3",
            "--values",
            "1,2",
            "--workers",
            workers,
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        files.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(files[0], files[1]);
}
