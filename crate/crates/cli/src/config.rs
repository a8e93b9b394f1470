//! JSON run configuration.

use std::path::PathBuf;
use std::sync::Arc;

use kscross_core::harness::{ErrorNorm, SteadyCriterion};
use kscross_core::linalg::LinearSolver;
use kscross_core::mesh::{build_polar, build_radial, build_rect, BoundaryCondition, Bounds, Grid};
use kscross_core::model::{Bump, InitialData, Params};
use kscross_core::solver::{JacobianMode, NewtonSettings, Scheme, TimeController};
use serde::Deserialize;

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("config error at `{key}`: {msg}")]
pub struct ConfigError {
    pub key: String,
    pub msg: String,
}

impl ConfigError {
    fn new(key: &str, msg: impl Into<String>) -> Self {
        Self { key: key.to_owned(), msg: msg.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeName {
    Pp,
    Pe,
    Log,
}

impl From<SchemeName> for Scheme {
    fn from(s: SchemeName) -> Self {
        match s {
            SchemeName::Pp => Scheme::Pp,
            SchemeName::Pe => Scheme::Pe,
            SchemeName::Log => Scheme::Log,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryName {
    #[default]
    Neumann,
    Dirichlet0,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub delta: f64,
    pub alpha: f64,
    /// Defaults to the scheme's natural value.
    pub eps: Option<u8>,
    #[serde(default)]
    pub eta: f64,
    #[serde(default)]
    pub c_boundary: BoundaryName,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKindName {
    Rect,
    Polar,
    Radial,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub kind: GridKindName,
    /// `[nx, ny]`, `[nr, ntheta]` or `[nr]`.
    pub resolution: Vec<usize>,
    #[serde(rename = "R")]
    pub radius: Option<f64>,
    /// `[x0, x1, y0, y1]`.
    pub bounds: Option<[f64; 4]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpConfig {
    pub x0: f64,
    pub y0: f64,
    pub mass: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitConfig {
    #[default]
    Experiment1,
    Experiment3,
    Experiment4,
    Constant {
        value: f64,
    },
    Bumps {
        bumps: Vec<BumpConfig>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    #[serde(rename = "T")]
    pub t_end: f64,
    pub dt: f64,
    pub dt_min: f64,
    pub dt_max: Option<f64>,
    pub growth_guard: f64,
    /// Keep `dt` constant; any failed step is a breakdown.
    pub fixed: bool,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self { t_end: 1.0, dt: 1e-3, dt_min: 1e-13, dt_max: None, growth_guard: 2.0, fixed: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JacobianName {
    #[default]
    Analytic,
    Fd,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewtonConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub jacobian: JacobianName,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        let d = NewtonSettings::default();
        Self { tol: d.tol_residual, max_iter: d.max_iter, jacobian: JacobianName::Analytic }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputsConfig {
    pub diag_csv: PathBuf,
    pub snapshot_dir: PathBuf,
    pub record_times: Vec<f64>,
    /// Table written by `sweep`, `blowup` and `bumps`.
    pub report_csv: Option<PathBuf>,
    /// Fit summary written by `sweep` and `bumps`.
    pub fit_csv: Option<PathBuf>,
}

impl Default for OutputsConfig {
    fn default() -> Self {
        Self {
            diag_csv: "diagnostics.csv".into(),
            snapshot_dir: "snapshots".into(),
            record_times: Vec::new(),
            report_csv: None,
            fit_csv: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormName {
    L2,
    #[default]
    H2,
}

/// Settings for the studies and the optional steady stop of `run`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyConfig {
    pub error_norm: NormName,
    pub level: f64,
    pub steady_tol: f64,
    /// Stop `run` once the steady criterion is met.
    pub stop_at_steady: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self { error_norm: NormName::H2, level: 1e-2, steady_tol: SteadyCriterion::default().tol, stop_at_steady: false }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub scheme: SchemeName,
    pub params: ParamsConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub init: InitConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub newton: NewtonConfig,
    #[serde(default)]
    pub outputs: OutputsConfig,
    #[serde(default)]
    pub study: StudyConfig,
}

/// Parses and validates a JSON configuration.
pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| {
        let key = e.path().to_string();
        ConfigError { key, msg: e.into_inner().to_string() }
    })?;
    cfg.resolve()?;
    Ok(cfg)
}

/// Core objects built from a validated [`Config`].
#[derive(Debug, Clone)]
pub struct Resolved {
    pub scheme: Scheme,
    pub params: Params,
    pub grid: Arc<Grid>,
    pub init: InitialData,
    pub t_end: f64,
    pub ctrl: TimeController,
    pub newton: NewtonSettings,
    pub record_times: Vec<f64>,
    pub error_norm: ErrorNorm,
    pub steady: SteadyCriterion,
}

fn positive(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::new(key, format!("must be positive and finite, got {v}")))
    }
}

impl Config {
    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        let scheme = Scheme::from(self.scheme);
        let p = &self.params;
        if !(p.delta >= 0.0 && p.delta.is_finite()) {
            return Err(ConfigError::new("params.delta", format!("must be >= 0, got {}", p.delta)));
        }
        if !(p.alpha > 0.0 && p.alpha.is_finite()) {
            return Err(ConfigError::new("params.alpha", format!("must be positive, got {}", p.alpha)));
        }
        if !(p.eta >= 0.0 && p.eta.is_finite()) {
            return Err(ConfigError::new("params.eta", format!("must be >= 0, got {}", p.eta)));
        }
        let eps = p.eps.unwrap_or(scheme.default_eps());
        if eps > 1 {
            return Err(ConfigError::new("params.eps", format!("must be 0 or 1, got {eps}")));
        }
        let bc = match p.c_boundary {
            BoundaryName::Neumann => BoundaryCondition::Neumann,
            BoundaryName::Dirichlet0 => BoundaryCondition::Dirichlet0,
        };
        let params = Params::new(p.delta, eps, p.alpha)
            .map_err(|e| ConfigError::new("params", e.to_string()))?
            .with_eta(p.eta)
            .with_c_boundary(bc);
        params.validate().map_err(|e| ConfigError::new("params", e.to_string()))?;
        match (scheme, eps) {
            (Scheme::Pp, 0) | (Scheme::Pe, 1) => {
                return Err(ConfigError::new("params.eps", format!("scheme {scheme} does not support eps = {eps}")));
            }
            (Scheme::Log, _) if p.delta == 0.0 => {
                return Err(ConfigError::new("params.delta", "the log scheme needs delta > 0"));
            }
            _ => {}
        }

        let grid = Arc::new(self.grid.build()?);
        let init = self.init.build()?;
        let t = &self.time;
        let t_end = positive("time.T", t.t_end)?;
        let dt = positive("time.dt", t.dt)?;
        positive("time.dt_min", t.dt_min)?;
        let mut ctrl = if t.fixed {
            TimeController::fixed(dt)
        } else {
            TimeController::new(dt, positive("time.dt_max", t.dt_max.unwrap_or(dt))?)
        }
        .map_err(|e| ConfigError::new("time", e.to_string()))?;
        if !t.fixed {
            ctrl.dt_min = t.dt_min;
        }
        ctrl.growth_guard = t.growth_guard;
        ctrl.validate().map_err(|e| ConfigError::new("time", e.to_string()))?;

        let n = &self.newton;
        positive("newton.tol", n.tol)?;
        if n.max_iter == 0 {
            return Err(ConfigError::new("newton.max_iter", "must be at least 1"));
        }
        let newton = NewtonSettings {
            tol_residual: n.tol,
            max_iter: n.max_iter,
            jacobian: match n.jacobian {
                JacobianName::Analytic => JacobianMode::Analytic,
                JacobianName::Fd => JacobianMode::Fd,
            },
            linear: LinearSolver::with_tol(NewtonSettings::default().linear.tol),
        };

        let record_times = self.outputs.record_times.clone();
        if let Some(bad) = record_times.iter().find(|&&r| !(r >= 0.0 && r <= t_end)) {
            return Err(ConfigError::new("outputs.record_times", format!("{bad} lies outside [0, {t_end}]")));
        }
        let s = &self.study;
        positive("study.level", s.level)?;
        positive("study.steady_tol", s.steady_tol)?;
        Ok(Resolved {
            scheme,
            params,
            grid,
            init,
            t_end,
            ctrl,
            newton,
            record_times,
            error_norm: match s.error_norm {
                NormName::L2 => ErrorNorm::L2,
                NormName::H2 => ErrorNorm::H2,
            },
            steady: SteadyCriterion { tol: s.steady_tol },
        })
    }
}

impl GridConfig {
    fn build(&self) -> Result<Grid, ConfigError> {
        let res = &self.resolution;
        let want = match self.kind {
            GridKindName::Rect | GridKindName::Polar => 2,
            GridKindName::Radial => 1,
        };
        if res.len() != want {
            return Err(ConfigError::new("grid.resolution", format!("expected {want} entries, got {}", res.len())));
        }
        let radius = || positive("grid.R", self.radius.unwrap_or(1.0));
        let grid = match self.kind {
            GridKindName::Rect => {
                if self.radius.is_some() {
                    return Err(ConfigError::new("grid.R", "not used by rect grids"));
                }
                let [x0, x1, y0, y1] = self.bounds.unwrap_or([0.0, 1.0, 0.0, 1.0]);
                build_rect(res[0], res[1], Bounds::new(x0, x1, y0, y1))
            }
            GridKindName::Polar | GridKindName::Radial if self.bounds.is_some() => {
                return Err(ConfigError::new("grid.bounds", "only rect grids take bounds"));
            }
            GridKindName::Polar => build_polar(res[0], res[1], radius()?),
            GridKindName::Radial => build_radial(res[0], radius()?),
        };
        grid.map_err(|e| ConfigError::new("grid", e.to_string()))
    }
}

impl InitConfig {
    fn build(&self) -> Result<InitialData, ConfigError> {
        let init = match self {
            InitConfig::Experiment1 => InitialData::Experiment1,
            InitConfig::Experiment3 => InitialData::experiment3(),
            InitConfig::Experiment4 => InitialData::experiment4(),
            InitConfig::Constant { value } => InitialData::Constant(*value),
            InitConfig::Bumps { bumps } => {
                InitialData::BumpSum(bumps.iter().map(|b| Bump::new(b.x0, b.y0, b.mass, b.theta)).collect())
            }
        };
        init.validate().map_err(|e| ConfigError::new("init", e.to_string()))?;
        Ok(init)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"scheme": "pp", "grid": {"kind": "polar", "resolution": [4, 8]},
        "params": {"alpha": 1.0, "delta": 1e-3}}"#;

    fn with(params: &str) -> String {
        format!(r#"{{"scheme": "pp", "grid": {{"kind": "polar", "resolution": [4, 8]}}, "params": {params}}}"#)
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        let r = cfg.resolve().unwrap();
        assert_eq!(r.params.eps, 1);
        assert_eq!(r.params.eta, 0.0);
        assert_eq!(r.params.c_boundary, BoundaryCondition::Neumann);
        assert_eq!(r.ctrl.dt_min, 1e-13);
        assert_eq!(r.newton.jacobian, JacobianMode::Analytic);
        assert!(matches!(r.init, InitialData::Experiment1));
    }

    #[test]
    fn eps_two_is_rejected() {
        let e = parse_config(&with(r#"{"alpha": 1.0, "delta": 1e-3, "eps": 2}"#)).unwrap_err();
        assert_eq!(e.key, "params.eps");
    }

    #[test]
    fn negative_delta_is_rejected() {
        let e = parse_config(&with(r#"{"alpha": 1.0, "delta": -1e-3}"#)).unwrap_err();
        assert_eq!(e.key, "params.delta");
    }

    #[test]
    fn unknown_key_is_named() {
        let e = parse_config(&with(r#"{"alpha": 1.0, "delta": 1e-3, "chi": 2}"#)).unwrap_err();
        assert!(e.to_string().contains("chi"), "{e}");
    }

    #[test]
    fn scheme_and_eps_must_agree() {
        let e = parse_config(&with(r#"{"alpha": 1.0, "delta": 1e-3, "eps": 0}"#)).unwrap_err();
        assert_eq!(e.key, "params.eps");
    }

    #[test]
    fn record_times_must_fit_in_the_run() {
        let text = r#"{"scheme": "pp", "grid": {"kind": "radial", "resolution": [8]},
            "params": {"alpha": 1.0, "delta": 0.0}, "time": {"T": 0.1},
            "outputs": {"record_times": [0.05, 0.2]}}"#;
        assert_eq!(parse_config(text).unwrap_err().key, "outputs.record_times");
    }
}
