use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn chfd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chfd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("run.cfg");
    fs::write(&path, body).unwrap();
    path
}

const PROTOCOL: &str = "\
grid.N = 32
grid.L = 3.2
scheme.eps = 1
scheme.dt = 0.01
scheme.T = 0.16
init.kind = manufactured
forcing = manufactured
output.dir = out
";

#[test]
fn simulate_writes_one_row_per_step() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), PROTOCOL);
    let o = chfd(&["simulate", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(tmp.path().join("out/energy.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "step,time,mass,E_h,modified_E,newton_iters,residual");
    assert_eq!(lines.len(), 17);
    assert!(lines[16].starts_with("16,1.6000000000000000e-1,"));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("l2_error:"), "{stdout}");
    assert!(tmp.path().join("out/summary.json").exists());
}

#[test]
fn simulate_is_byte_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let body = "grid.N = 12\nscheme.eps = 0.1\nscheme.dt = 0.001\nscheme.T = 0.005\n\
                init.kind = random\ninit.seed = 3\nforcing = none\noutput.dir = a\n";
    let cfg = write_config(tmp.path(), body);
    let p = cfg.to_str().unwrap();
    assert!(chfd(&["simulate", p]).status.success());
    assert!(chfd(&["simulate", p, "--set", "output.dir=b"]).status.success());
    let a = fs::read(tmp.path().join("a/energy.csv")).unwrap();
    let b = fs::read(tmp.path().join("b/energy.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn simulate_snapshots_round_trip_as_initial_data() {
    let tmp = tempfile::tempdir().unwrap();
    let body = "grid.N = 8\nscheme.eps = 0.2\nscheme.dt = 0.001\nscheme.T = 0.002\n\
                init.kind = random\nforcing = none\noutput.dir = s\noutput.snapshot_every = 1\noutput.vtk = true\n";
    let cfg = write_config(tmp.path(), body);
    assert!(chfd(&["simulate", cfg.to_str().unwrap()]).status.success());
    for step in 0..=2 {
        assert!(tmp.path().join(format!("s/phi_{step:06}.chf4")).exists());
        assert!(tmp.path().join(format!("s/phi_{step:06}.vtk")).exists());
    }
    let body2 = "grid.N = 8\nscheme.eps = 0.2\nscheme.dt = 0.001\nscheme.T = 0.001\n\
                 init.kind = file\ninit.path = s/phi_000002.chf4\nforcing = none\noutput.dir = t\n";
    let cfg2 = tmp.path().join("resume.cfg");
    fs::write(&cfg2, body2).unwrap();
    let o = chfd(&["simulate", cfg2.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn missing_config_exits_2_with_path() {
    let o = chfd(&["simulate", "/nonexistent/run.cfg"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/run.cfg"));
}

#[test]
fn weak_regularization_warns_but_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let body = "grid.N = 8\nscheme.eps = 0.2\nscheme.dt = 0.001\nscheme.T = 0.001\nscheme.A = 0.01\n\
                monitor.energy_decay = true\ninit.kind = random\nforcing = none\noutput.dir = w\n";
    let cfg = write_config(tmp.path(), body);
    let o = chfd(&["simulate", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
}

#[test]
fn corrupt_initial_file_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.chf4"), b"nope").unwrap();
    let body = "grid.N = 8\ninit.kind = file\ninit.path = bad.chf4\nforcing = none\noutput.dir = o\n";
    let cfg = write_config(tmp.path(), body);
    let o = chfd(&["simulate", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not a CHF4 field file"));
}

#[test]
fn solver_failure_exits_3_with_step() {
    let tmp = tempfile::tempdir().unwrap();
    let body = "grid.N = 8\nscheme.eps = 0.2\nscheme.dt = 0.001\nscheme.T = 0.001\n\
                scheme.newton_max = 1\nscheme.newton_tol = 1e-30\ninit.kind = random\nforcing = none\noutput.dir = o\n";
    let cfg = write_config(tmp.path(), body);
    let o = chfd(&["simulate", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("step 1"));
}

#[test]
fn converge_single_resolution_has_no_slope() {
    let tmp = tempfile::tempdir().unwrap();
    let o = chfd(&["converge", "--resolutions", "16", "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("slope: n/a"));
    let csv = fs::read_to_string(tmp.path().join("errors.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.starts_with("N,h,dt,l2_error,linf_error\n16,"));
}

#[test]
fn converge_two_resolutions_reports_slope() {
    let tmp = tempfile::tempdir().unwrap();
    let o = chfd(&["converge", "--resolutions", "16,32", "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success());
    let stdout = String::from_utf8_lossy(&o.stdout);
    let slope: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("l2 slope: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((-4.3..=-3.7).contains(&slope), "{stdout}");
}

#[test]
fn converge_rejects_non_divisible_resolution() {
    let tmp = tempfile::tempdir().unwrap();
    let o = chfd(&["converge", "--resolutions", "16,20", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("N = 20"));
}

#[test]
fn lemma_check_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = chfd(&[
        "check", "--suite", "lemmas", "--seed", "7", "--trials", "10", "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let report = read_json(&tmp.path().join("report.json"));
    assert_eq!(report["passed"], true);
    assert!(report["lemmas"]["checks"].as_array().unwrap().len() > 10);
    assert!(report.get("stability").is_none());
}

#[test]
fn wrong_stencil_weight_fails_summation_by_parts() {
    let tmp = tempfile::tempdir().unwrap();
    let o = chfd(&[
        "check", "--suite", "lemmas", "--trials", "3", "--resolutions", "15",
        "--lap4-weights", "-1,16,-30,15,-1", "--out", tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("FAIL") && l.contains("summation_by_parts")), "{stdout}");
}

#[test]
fn check_all_is_union() {
    let tmp = tempfile::tempdir().unwrap();
    let o = chfd(&[
        "check", "--suite", "all", "--trials", "2", "--resolutions", "9", "--n", "8",
        "--steps", "3", "--out", tmp.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let report = read_json(&tmp.path().join("report.json"));
    assert!(report.get("lemmas").is_some());
    assert_eq!(report["stability"].as_array().unwrap().len(), 2);
}
