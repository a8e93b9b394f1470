use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::mesh::{Field, Grid, Variable};
use crate::model::{Params, State};

use super::newton::{newton, NewtonSettings, NonlinearSystem};
use super::system::{bilaplacian, jacobian_pattern, row_weights, ChemicalEq, DensityVar, Form, StepProblem};
use super::Scheme;

/// Relative mass defect a Newton iterate must reach before it is accepted.
const MASS_DEFECT_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeController {
    pub dt: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub shrink: f64,
    pub grow: f64,
    /// Largest accepted `max|rho_new| / max|rho_old|` per step.
    pub growth_guard: f64,
}

impl TimeController {
    pub fn new(dt: f64, dt_max: f64) -> Result<Self> {
        let c = Self { dt, dt_min: 1e-13, dt_max, shrink: 0.5, grow: 1.2, growth_guard: 2.0 };
        c.validate()?;
        Ok(c)
    }

    /// Constant step: any failure is a breakdown.
    pub fn fixed(dt: f64) -> Result<Self> {
        let c = Self { dt, dt_min: dt, dt_max: dt, shrink: 0.5, grow: 1.0, growth_guard: 2.0 };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.dt_min > 0.0
            && self.dt_min <= self.dt
            && self.dt <= self.dt_max
            && self.dt_max.is_finite()
            && self.shrink > 0.0
            && self.shrink < 1.0
            && self.grow >= 1.0
            && self.growth_guard > 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid time controller {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    Accepted,
    RetrySmallerDt,
    Breakdown,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub status: StepStatus,
    pub new_state: Option<State>,
    pub newton_iters: usize,
    pub dt_used: f64,
    /// Rejected attempts before this outcome.
    pub retries: usize,
}

pub(crate) struct ProblemSystem<'a> {
    pub prob: &'a StepProblem,
    pub mass_check: bool,
}

impl NonlinearSystem for ProblemSystem<'_> {
    fn dim(&self) -> usize {
        2 * self.prob.grid.len()
    }

    fn residual(&self, x: &[f64], r: &mut [f64]) -> Result<()> {
        self.prob.scaled_residual(x, r)
    }

    fn jacobian(&self, x: &[f64]) -> Result<CsrMatrix> {
        self.prob.scaled_jacobian(x)
    }

    fn accept(&self, x: &[f64]) -> bool {
        if !self.mass_check {
            return true;
        }
        let p = self.prob;
        let m = p.grid.measures();
        let mut defect = 0.0;
        let mut scale = 0.0;
        for k in 0..m.len() {
            let rho = match p.form.density {
                DensityVar::Rho => x[2 * k],
                DensityVar::Log => (x[2 * k] / p.params.delta).exp(),
            };
            let f = p.source.as_ref().map_or(0.0, |s| s[2 * k]);
            defect += m[k] * (rho - p.rho_old[k] - p.dt * f);
            scale += m[k] * p.rho_old[k].abs();
        }
        defect.abs() <= MASS_DEFECT_TOL * scale.max(f64::MIN_POSITIVE)
    }
}

/// Forcing `t -> [f_0, g_0, f_1, g_1, ...]` added to the density and
/// chemical equations, evaluated at the new time level. Used for
/// manufactured solutions.
#[derive(Clone)]
pub struct Source(Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>);

impl Source {
    pub fn new(f: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }
}

impl std::fmt::Debug for Source {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Source(..)")
    }
}

/// Reusable stepper for one grid, parameter set and scheme.
#[derive(Debug, Clone)]
pub struct Stepper {
    grid: Arc<Grid>,
    params: Params,
    scheme: Scheme,
    form: Form,
    newton: NewtonSettings,
    pattern: Arc<CsrMatrix>,
    bilaplacian: Option<Arc<CsrMatrix>>,
    source: Option<Source>,
}

impl Stepper {
    pub fn new(grid: Arc<Grid>, params: Params, scheme: Scheme, newton: NewtonSettings) -> Result<Self> {
        params.validate()?;
        newton.validate()?;
        let form = Form::for_scheme(scheme, &params)?;
        let bilap = (form.density == DensityVar::Log && params.eta > 0.0).then(|| Arc::new(bilaplacian(&grid)));
        let pattern = Arc::new(jacobian_pattern(&grid, bilap.as_deref()));
        Ok(Self { grid, params, scheme, form, newton, pattern, bilaplacian: bilap, source: None })
    }

    pub fn with_source(mut self, source: Source) -> Self {
        self.source = Some(source);
        self
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// One Newton solve at step `dt`; no controller logic.
    pub fn attempt_step(&self, state: &State, dt: f64, growth_guard: f64) -> Result<StepOutcome> {
        if !Arc::ptr_eq(state.grid(), &self.grid) && **state.grid() != *self.grid {
            return Err(Error::GridMismatch);
        }
        let n = self.grid.len();
        let delta = self.params.delta;
        let rho_old = state.rho.values();
        let chem_old: Vec<f64> = match self.form.chemical {
            ChemicalEq::Parabolic => state.c.values().to_vec(),
            ChemicalEq::Elliptic => state.c.values().iter().zip(rho_old).map(|(c, r)| c + delta * r).collect(),
        };
        let mut guess = Vec::with_capacity(2 * n);
        for k in 0..n {
            let d = match self.form.density {
                DensityVar::Rho => rho_old[k],
                DensityVar::Log => {
                    if !(rho_old[k] > 0.0) {
                        return Err(Error::InvalidParameter(format!(
                            "log scheme needs a positive density, cell {k} has {}",
                            rho_old[k]
                        )));
                    }
                    delta * rho_old[k].ln()
                }
            };
            guess.push(d);
            guess.push(chem_old[k]);
        }
        let source = match &self.source {
            Some(Source(f)) => {
                let s = f(state.t + dt);
                if s.len() != 2 * n {
                    return Err(Error::LengthMismatch { expected: 2 * n, got: s.len() });
                }
                Some(s)
            }
            None => None,
        };
        let prob = StepProblem {
            grid: self.grid.clone(),
            params: self.params,
            form: self.form,
            dt,
            rho_old: rho_old.to_vec(),
            weights: row_weights(&self.grid, self.form, &self.params, dt, rho_old, &chem_old),
            chem_old,
            bilaplacian: self.bilaplacian.clone(),
            pattern: self.pattern.clone(),
            source,
        };
        let sys = ProblemSystem { prob: &prob, mass_check: !(self.params.eta > 0.0 && self.form.density == DensityVar::Log) };
        let retry = |retries| StepOutcome { status: StepStatus::RetrySmallerDt, new_state: None, newton_iters: 0, dt_used: dt, retries };
        let report = match newton(&sys, &guess, &self.newton) {
            Ok(r) => r,
            Err(e) if recoverable(&e) => return Ok(retry(0)),
            Err(e) => return Err(e),
        };
        let x = report.x;
        let mut rho = Vec::with_capacity(n);
        let mut c = Vec::with_capacity(n);
        for k in 0..n {
            let r = match self.form.density {
                DensityVar::Rho => x[2 * k],
                DensityVar::Log => (x[2 * k] / delta).exp(),
            };
            rho.push(r);
            c.push(match self.form.chemical {
                ChemicalEq::Parabolic => x[2 * k + 1],
                ChemicalEq::Elliptic => x[2 * k + 1] - delta * r,
            });
        }
        let old_max = state.rho.max_abs();
        let new_max = rho.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if old_max > 0.0 && new_max > growth_guard * old_max {
            return Ok(retry(0));
        }
        let new_state = State::new(
            Field::from_raw(self.grid.clone(), rho, Variable::Rho),
            Field::from_raw(self.grid.clone(), c, Variable::C),
            state.t + dt,
        )?;
        Ok(StepOutcome {
            status: StepStatus::Accepted,
            new_state: Some(new_state),
            newton_iters: report.iterations,
            dt_used: dt,
            retries: 0,
        })
    }

    /// Steps from `state`, halving `ctrl.dt` on failure until a step is
    /// accepted or `dt` would drop below `dt_min`. The step is clipped so
    /// that it does not pass `t_limit`.
    pub fn advance(&self, state: &State, ctrl: &mut TimeController, t_limit: Option<f64>) -> Result<StepOutcome> {
        ctrl.validate()?;
        let mut retries = 0;
        loop {
            let (dt, clipped) = match t_limit {
                Some(t_end) if t_end - state.t < ctrl.dt * (1.0 + 1e-9) => ((t_end - state.t).max(0.0), true),
                _ => (ctrl.dt, false),
            };
            if !(dt > 0.0) {
                return Err(Error::InvalidParameter(format!("no time left before {t_limit:?}")));
            }
            let mut out = self.attempt_step(state, dt, ctrl.growth_guard)?;
            out.retries = retries;
            match out.status {
                StepStatus::Accepted => {
                    if let (true, Some(s)) = (clipped, out.new_state.as_mut()) {
                        s.t = t_limit.unwrap_or(s.t);
                    } else {
                        ctrl.dt = (ctrl.dt * ctrl.grow).min(ctrl.dt_max);
                    }
                    return Ok(out);
                }
                _ => {
                    let next = dt * ctrl.shrink;
                    if next < ctrl.dt_min {
                        out.status = StepStatus::Breakdown;
                        return Ok(out);
                    }
                    ctrl.dt = next;
                    retries += 1;
                }
            }
        }
    }
}

fn recoverable(e: &Error) -> bool {
    matches!(
        e,
        Error::NewtonFailed(_) | Error::Range(_) | Error::LinearSolveFailed { .. } | Error::Singular(_) | Error::NonFinite(_)
    )
}

/// One controlled step with default Newton settings.
pub fn advance(state: &State, ctrl: &mut TimeController, p: &Params, scheme: Scheme) -> Result<StepOutcome> {
    Stepper::new(state.grid().clone(), *p, scheme, NewtonSettings::default())?.advance(state, ctrl, None)
}
