//! Command-line front end: JSON configs in, CSV and snapshot text out.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;

use std::path::{Path, PathBuf};

use kscross_core::harness::{blowup_probe, bump_study, delta_sweep, run, BumpSpec, RunSpec, SweepSpec};
use kscross_core::Error;

use config::{Config, ConfigError, Resolved};

/// Why a command did not complete normally.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("breakdown: {0}")]
    Breakdown(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Breakdown(_) => 3,
            Failure::Numerical(_) => 4,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::InvalidGrid(_) | Error::SchemeMismatch { .. } | Error::NotRadial => {
                Failure::Config(ConfigError { key: "config".into(), msg: e.to_string() })
            }
            Error::Breakdown { .. } => Failure::Breakdown(e.to_string()),
            other => Failure::Numerical(other.to_string()),
        }
    }
}

pub fn load_config(path: &Path) -> Result<Config, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError { key: "<file>".into(), msg: format!("cannot read {}: {e}", path.display()) })?;
    Ok(config::parse_config(&text)?)
}

fn write(key: &str, path: &Path, text: &str) -> Result<(), Failure> {
    output::write_text(path, text)
        .map_err(|e| Failure::Config(ConfigError { key: key.into(), msg: format!("cannot write {}: {e}", path.display()) }))
}

fn run_spec(r: &Resolved) -> RunSpec {
    RunSpec::new(r.grid.clone(), r.params, r.scheme, r.init.clone(), r.t_end, r.ctrl)
        .with_record_times(r.record_times.clone())
        .with_newton(r.newton)
}

fn check_deltas(deltas: &[f64], min: usize) -> Result<(), Failure> {
    if deltas.len() < min {
        let msg = format!("at least {min} deltas required, got {}", deltas.len());
        return Err(ConfigError { key: "--deltas".into(), msg }.into());
    }
    if let Some(d) = deltas.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
        return Err(ConfigError { key: "--deltas".into(), msg: format!("deltas must be positive, got {d}") }.into());
    }
    Ok(())
}

fn report_path(cfg: &Config, default: &str) -> PathBuf {
    cfg.outputs.report_csv.clone().unwrap_or_else(|| default.into())
}

fn fit_path(cfg: &Config, default: &str) -> PathBuf {
    cfg.outputs.fit_csv.clone().unwrap_or_else(|| default.into())
}

/// Single simulation. Outputs are written even when the run breaks down.
pub fn cmd_run(cfg: &Config) -> Result<String, Failure> {
    let r = cfg.resolve()?;
    let mut spec = run_spec(&r);
    if cfg.study.stop_at_steady {
        spec = spec.with_steady(r.steady);
    }
    let res = run(&spec)?;
    write("outputs.diag_csv", &cfg.outputs.diag_csv, &output::diagnostics_csv(&res.records))?;
    output::write_snapshots(&cfg.outputs.snapshot_dir, &res.snapshots).map_err(|e| {
        Failure::Config(ConfigError { key: "outputs.snapshot_dir".into(), msg: e.to_string() })
    })?;
    if res.breakdown {
        return Err(Failure::Breakdown(format!(
            "time step fell below {:e} at t = {}",
            r.ctrl.dt_min, res.final_state.t
        )));
    }
    Ok(format!(
        "{} steps ({} rejected) to t = {}{}",
        res.steps,
        res.rejected,
        res.final_state.t,
        res.steady_at.map(|t| format!(", steady at t = {t}")).unwrap_or_default()
    ))
}

/// Delta sweep against the `delta = 0` reference on a fixed step `time.dt`.
pub fn cmd_sweep(cfg: &Config, deltas: &[f64]) -> Result<String, Failure> {
    check_deltas(deltas, 2)?;
    let r = cfg.resolve()?;
    let record_times = if r.record_times.is_empty() { vec![r.t_end] } else { r.record_times.clone() };
    let spec = SweepSpec {
        deltas: deltas.to_vec(),
        base: r.params,
        scheme: r.scheme,
        grid: r.grid.clone(),
        init: r.init.clone(),
        t_end: r.t_end,
        dt: r.ctrl.dt,
        record_times,
        error_norm: r.error_norm,
        newton: r.newton,
    };
    let res = delta_sweep(&spec)?;
    write("outputs.report_csv", &report_path(cfg, "sweep.csv"), &output::sweep_csv(&res))?;
    write("outputs.fit_csv", &fit_path(cfg, "sweep_fit.csv"), &output::sweep_fit_csv(&res))?;
    match res.fit {
        Some(f) => Ok(format!("exponent {:.4} (r2 {:.4}){}", f.exponent, f.r2, if f.is_poor() { ", poor fit" } else { "" })),
        None => Err(Failure::Breakdown("too few delta runs survived to fit a rate".into())),
    }
}

/// Runs until breakdown or `time.T`; a breakdown is the expected result
/// and not an error.
pub fn cmd_blowup(cfg: &Config) -> Result<String, Failure> {
    let r = cfg.resolve()?;
    let rep = blowup_probe(&run_spec(&r))?;
    write("outputs.report_csv", &report_path(cfg, "blowup.csv"), &output::blowup_csv(&rep))?;
    Ok(match rep.t_break {
        Some(t) => format!("breakdown at t = {t}"),
        None => format!("no breakdown up to t = {}", r.t_end),
    })
}

/// Bump study: every delta run to steady state within `time.T`.
pub fn cmd_bumps(cfg: &Config, deltas: &[f64]) -> Result<String, Failure> {
    check_deltas(deltas, 2)?;
    let r = cfg.resolve()?;
    let spec = BumpSpec {
        deltas: deltas.to_vec(),
        base: r.params,
        scheme: r.scheme,
        grid: r.grid.clone(),
        init: r.init.clone(),
        t_max: r.t_end,
        ctrl: r.ctrl,
        newton: r.newton,
        steady: r.steady,
        level: cfg.study.level,
    };
    let rep = bump_study(&spec)?;
    write("outputs.report_csv", &report_path(cfg, "bumps.csv"), &output::bumps_csv(&rep))?;
    write("outputs.fit_csv", &fit_path(cfg, "bumps_fit.csv"), &output::bumps_fit_csv(&rep))?;
    let e = |f: Option<kscross_core::harness::PowerFit>| f.map_or(f64::NAN, |f| f.exponent);
    Ok(format!("a = {:.4}, b = {:.4}{}", e(rep.a), e(rep.b), if rep.poor_fit() { ", poor fit" } else { "" }))
}
