//! Text output: diagnostics, snapshots and study tables. Floats are written
//! with 17 significant digits so that they round-trip.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use kscross_core::diagnostics::DiagRecord;
use kscross_core::harness::{BlowupReport, BumpReport, PowerFit, Snapshot, SweepResult};
use kscross_core::mesh::{Field, GridKind};

pub const DIAG_HEADER: &str = "t,mass,rho_min,rho_max,H1,H2p,H3p,diss_sqrt,diss_grad,entropy_residual,clamped";

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn write_file(path: &Path, text: &str) -> io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)
}

pub fn diagnostics_csv(records: &[DiagRecord]) -> String {
    let mut s = String::from(DIAG_HEADER);
    s.push('\n');
    for r in records {
        let cols = [r.t, r.mass, r.rho_min, r.rho_max, r.h1, r.h2p, r.h3p, r.diss_sqrt, r.diss_grad, r.entropy_residual];
        for c in cols {
            s.push_str(&num(c));
            s.push(',');
        }
        s.push_str(flag(r.clamped));
        s.push('\n');
    }
    s
}

pub fn write_diagnostics(path: &Path, records: &[DiagRecord]) -> io::Result<()> {
    write_file(path, &diagnostics_csv(records))
}

pub fn grid_header(kind: &GridKind) -> String {
    match kind {
        GridKind::Rect { nx, ny, bounds } => {
            format!("# grid rect {nx} {ny} {} {} {} {}", num(bounds.x0), num(bounds.x1), num(bounds.y0), num(bounds.y1))
        }
        GridKind::Polar { nr, ntheta, radius } => format!("# grid polar {nr} {ntheta} {}", num(*radius)),
        GridKind::Radial { nr, radius } => format!("# grid radial {nr} {}", num(*radius)),
    }
}

pub fn snapshot_text(field: &Field, t: f64) -> String {
    let mut s = grid_header(field.grid().kind());
    let _ = write!(s, "\n# t {} variable {}\n", num(t), field.tag());
    for v in field.values() {
        s.push_str(&num(*v));
        s.push('\n');
    }
    s
}

/// Writes `rho_XXXXX.txt` and `c_XXXXX.txt` for every snapshot and returns
/// the paths.
pub fn write_snapshots(dir: &Path, snapshots: &[Snapshot]) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for (i, snap) in snapshots.iter().enumerate() {
        for field in [&snap.rho, &snap.c] {
            let path = dir.join(format!("{}_{i:05}.txt", field.tag()));
            fs::write(&path, snapshot_text(field, snap.t))?;
            paths.push(path);
        }
    }
    Ok(paths)
}

pub fn sweep_csv(r: &SweepResult) -> String {
    let mut s = String::from("delta,error,error_rho,breakdown\n");
    for e in &r.entries {
        let _ = writeln!(s, "{},{},{},{}", num(e.delta), opt(e.error), opt(e.error_rho), flag(e.error.is_none()));
    }
    s
}

fn fit_row(s: &mut String, name: &str, fit: Option<PowerFit>) {
    let _ = writeln!(
        s,
        "{name},{},{},{}",
        opt(fit.map(|f| f.exponent)),
        opt(fit.map(|f| f.r2)),
        flag(fit.is_none_or(|f| f.is_poor()))
    );
}

pub fn sweep_fit_csv(r: &SweepResult) -> String {
    let mut s = String::from("quantity,exponent,r2,poor_fit\n");
    fit_row(&mut s, "error", r.fit);
    fit_row(&mut s, "error_rho", r.fit_rho);
    s
}

pub fn blowup_csv(r: &BlowupReport) -> String {
    format!(
        "alpha,delta,breakdown,t_break,final_dt,final_linf\n{},{},{},{},{},{}\n",
        num(r.alpha),
        num(r.delta),
        flag(r.breakdown),
        opt(r.t_break),
        num(r.final_dt),
        num(r.final_linf)
    )
}

pub fn bumps_csv(r: &BumpReport) -> String {
    let mut s = String::from("delta,radius,rho_max,steady,t_final,steady_residual\n");
    for e in &r.entries {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            num(e.delta),
            num(e.radius),
            num(e.rho_max),
            flag(e.steady),
            num(e.t_final),
            num(e.steady_residual)
        );
    }
    s
}

pub fn bumps_fit_csv(r: &BumpReport) -> String {
    let mut s = String::from("quantity,exponent,r2,poor_fit\n");
    fit_row(&mut s, "radius_a", r.a);
    fit_row(&mut s, "height_b", r.b);
    s
}

pub fn write_text(path: &Path, text: &str) -> io::Result<()> {
    write_file(path, text)
}
