use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use kscross_cli::output::DIAG_HEADER;
use tempfile::TempDir;

fn kscross(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kscross")).current_dir(dir).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) {
    fs::write(dir.join("cfg.json"), body).unwrap();
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const STEADY: &str = r#"{
  "scheme": "pp",
  "params": {"delta": 1e-3, "alpha": 1.0},
  "grid": {"kind": "polar", "resolution": [4, 8]},
  "init": {"kind": "constant", "value": 1.0},
  "time": {"T": 0.05, "dt": 0.01, "fixed": true},
  "outputs": {"diag_csv": "out/diag.csv", "snapshot_dir": "out/snaps", "record_times": [0.0, 0.05]}
}"#;

#[test]
fn run_on_steady_data_is_constant() {
    let tmp = TempDir::new().unwrap();
    write_config(tmp.path(), STEADY);
    let o = kscross(tmp.path(), &["run", "cfg.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let csv = fs::read_to_string(tmp.path().join("out/diag.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(DIAG_HEADER));
    let rows: Vec<Vec<f64>> =
        lines.map(|l| l.split(',').map(|c| c.parse::<f64>().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 6);
    for row in &rows {
        assert_eq!(row.len(), 11);
        assert!((row[1] - rows[0][1]).abs() <= 1e-13 * rows[0][1]);
        assert!((row[2] - 1.0).abs() < 1e-12 && (row[3] - 1.0).abs() < 1e-12);
        assert_eq!(row[10], 0.0);
    }

    let snap = fs::read_to_string(tmp.path().join("out/snaps/rho_00001.txt")).unwrap();
    let snap: Vec<&str> = snap.lines().collect();
    assert!(snap[0].starts_with("# grid polar 4 8 "), "{}", snap[0]);
    assert!(snap[1].starts_with("# t 5.0000000000000") && snap[1].ends_with("variable rho"), "{}", snap[1]);
    assert_eq!(snap.len(), 2 + 32);
    assert!(tmp.path().join("out/snaps/c_00000.txt").exists());
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let cfg = r#"{
      "scheme": "log",
      "params": {"delta": 1e-2, "alpha": 1.0, "eps": 1},
      "grid": {"kind": "polar", "resolution": [4, 8]},
      "time": {"T": 0.02, "dt": 0.005, "dt_max": 0.01},
      "outputs": {"record_times": [0.01]}
    }"#;
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for d in [&a, &b] {
        write_config(d.path(), cfg);
        let o = kscross(d.path(), &["run", "cfg.json"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for f in ["diagnostics.csv", "snapshots/rho_00000.txt", "snapshots/c_00000.txt"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn config_errors_exit_with_two_and_name_the_key() {
    let tmp = TempDir::new().unwrap();
    write_config(tmp.path(), &STEADY.replace(r#""alpha": 1.0"#, r#""alpha": 1.0, "eps": 2"#));
    let o = kscross(tmp.path(), &["run", "cfg.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("params.eps"), "{}", stderr(&o));

    write_config(tmp.path(), &STEADY.replace(r#""fixed": true"#, r#""fixed": true, "dtt": 1"#));
    let o = kscross(tmp.path(), &["run", "cfg.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("dtt"), "{}", stderr(&o));

    let o = kscross(tmp.path(), &["run", "missing.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_needs_two_deltas() {
    let tmp = TempDir::new().unwrap();
    write_config(tmp.path(), STEADY);
    let o = kscross(tmp.path(), &["sweep", "cfg.json", "--deltas", "1e-3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("at least 2 deltas"), "{}", stderr(&o));
}

#[test]
fn sweep_writes_errors_and_fit() {
    let tmp = TempDir::new().unwrap();
    write_config(
        tmp.path(),
        r#"{
      "scheme": "pp",
      "params": {"delta": 0.0, "alpha": 1.0},
      "grid": {"kind": "radial", "resolution": [32]},
      "time": {"T": 0.01, "dt": 1e-3, "fixed": true},
      "outputs": {"record_times": [0.005, 0.01], "report_csv": "s.csv", "fit_csv": "f.csv"}
    }"#,
    );
    let o = kscross(tmp.path(), &["sweep", "cfg.json", "--deltas", "1e-2,5e-3,2e-3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = fs::read_to_string(tmp.path().join("s.csv")).unwrap();
    let rows: Vec<&str> = s.lines().collect();
    assert_eq!(rows[0], "delta,error,error_rho,breakdown");
    assert_eq!(rows.len(), 4);
    let errs: Vec<f64> = rows[1..].iter().map(|r| r.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    let f = fs::read_to_string(tmp.path().join("f.csv")).unwrap();
    assert!(f.starts_with("quantity,exponent,r2,poor_fit\nerror,"));
}

#[test]
fn blowup_reports_breakdown_time() {
    let tmp = TempDir::new().unwrap();
    write_config(
        tmp.path(),
        r#"{
      "scheme": "pp",
      "params": {"delta": 1e-4, "alpha": 2.5},
      "grid": {"kind": "polar", "resolution": [8, 16]},
      "time": {"T": 0.05, "dt": 1e-4, "dt_max": 1e-3}
    }"#,
    );
    let o = kscross(tmp.path(), &["blowup", "cfg.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("blowup.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "alpha,delta,breakdown,t_break,final_dt,final_linf");
    let cols: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(cols[2], "1");
    let t: f64 = cols[3].parse().unwrap();
    assert!(t > 0.0 && t < 0.05, "{t}");
}

#[test]
fn run_breakdown_exits_three_with_partial_output() {
    let tmp = TempDir::new().unwrap();
    write_config(
        tmp.path(),
        r#"{
      "scheme": "pp",
      "params": {"delta": 1e-4, "alpha": 2.5},
      "grid": {"kind": "polar", "resolution": [8, 16]},
      "time": {"T": 0.05, "dt": 1e-4, "dt_max": 1e-3}
    }"#,
    );
    let o = kscross(tmp.path(), &["run", "cfg.json"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("diagnostics.csv")).unwrap();
    assert!(csv.lines().count() > 2);
}

#[test]
fn bumps_writes_table_and_fit() {
    let tmp = TempDir::new().unwrap();
    write_config(
        tmp.path(),
        r#"{
      "scheme": "pp",
      "params": {"delta": 0.0, "alpha": 1.0, "c_boundary": "dirichlet0"},
      "grid": {"kind": "radial", "resolution": [200]},
      "init": {"kind": "experiment4"},
      "time": {"T": 50.0, "dt": 1e-4, "dt_max": 1.0}
    }"#,
    );
    let o = kscross(tmp.path(), &["bumps", "cfg.json", "--deltas", "1e-2,5e-3,2e-3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let t = fs::read_to_string(tmp.path().join("bumps.csv")).unwrap();
    assert_eq!(t.lines().count(), 4);
    assert!(t.lines().skip(1).all(|l| l.split(',').nth(3) == Some("1")), "{t}");
    let f = fs::read_to_string(tmp.path().join("bumps_fit.csv")).unwrap();
    assert!(f.contains("radius_a,") && f.contains("height_b,"));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        kscross_cli::load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        n += 1;
    }
    assert!(n >= 4);
}
