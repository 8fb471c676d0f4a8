use std::process::Command;

fn ionflux() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ionflux"))
}

#[test]
fn invalid_scheme_exits_with_usage_status() {
    let out = ionflux().args(["run", "--scheme", "fd"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solver_failure_prints_a_json_error_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = ionflux()
        .args(["run", "--scheme", "fv", "--steps", "2", "--tau=-1", "--no-steady", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    let v: serde_json::Value = serde_json::from_str(stderr.lines().last().unwrap()).unwrap();
    assert_eq!(v["error"], "InvalidParameter");
}

#[test]
fn run_writes_one_row_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let status = ionflux()
        .args(["run", "--scenario", "calcium", "--scheme", "fe", "--steps", "4", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(dir.path().join("timeseries.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "step,time,entropy_rel,mass_1,mass_2,mass_3,l1_dist_1,l1_dist_2,l1_dist_3,min_u0,max_sum_u,newton_iters"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[3].starts_with("4,"));
    let vtk = std::fs::read_to_string(dir.path().join("final.vtk")).unwrap();
    assert!(vtk.contains("POINT_DATA") && vtk.contains("CELL_DATA 74"));
}

#[test]
fn sweep_reports_rectification_for_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("sweep.toml");
    std::fs::write(&manifest, "scenario = \"calcium\"\nscheme = \"fv\"\n[newton]\nmax_iter = 30\n").unwrap();
    let out = ionflux()
        .args(["sweep", "--voltage=-0.5,0.5", "--config"])
        .arg(&manifest)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0][2].is_empty());
    let r: f64 = rows[1][2].parse().unwrap();
    assert!(r > 0.0);
}

#[test]
fn meshinfo_and_check() {
    let out = ionflux().args(["meshinfo", "--scenario", "bipolar"]).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["admissible"], true);
    let out = ionflux().args(["check", "--scenario", "calcium", "--steps", "3", "--scheme", "fv"]).output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(out.status.success(), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 4);
}
