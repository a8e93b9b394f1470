//! Whole experiments: single runs, delta sweeps, blow-up probes and the
//! steady bump study.

use std::sync::Arc;

use rayon::prelude::*;

use crate::diagnostics::{discrete_h2_norms, level_set_radius, DiagRecord, DiffNorms};
use crate::error::{Error, Result};
use crate::mesh::{Field, Grid, GridKind, Variable};
use crate::model::{InitialData, Params, State};
use crate::solver::{initial_state, NewtonSettings, Scheme, StepStatus, Stepper, TimeController};

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub rho: Field,
    pub c: Field,
}

/// Stop a run once `||rho_new - rho_old||_inf / dt < tol * max(rho_new)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyCriterion {
    pub tol: f64,
}

impl Default for SteadyCriterion {
    fn default() -> Self {
        Self { tol: 1e-6 }
    }
}

#[derive(Debug, Clone)]
pub struct RunSpec {
    pub grid: Arc<Grid>,
    pub params: Params,
    pub scheme: Scheme,
    pub init: InitialData,
    pub t_end: f64,
    pub record_times: Vec<f64>,
    pub ctrl: TimeController,
    pub newton: NewtonSettings,
    pub steady: Option<SteadyCriterion>,
}

impl RunSpec {
    pub fn new(grid: Arc<Grid>, params: Params, scheme: Scheme, init: InitialData, t_end: f64, ctrl: TimeController) -> Self {
        Self {
            grid,
            params,
            scheme,
            init,
            t_end,
            record_times: Vec::new(),
            ctrl,
            newton: NewtonSettings::default(),
            steady: None,
        }
    }

    pub fn with_record_times(mut self, times: Vec<f64>) -> Self {
        self.record_times = times;
        self
    }

    pub fn with_steady(mut self, steady: SteadyCriterion) -> Self {
        self.steady = Some(steady);
        self
    }

    pub fn with_newton(mut self, newton: NewtonSettings) -> Self {
        self.newton = newton;
        self
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    /// One record for `t = 0` and one per accepted step.
    pub records: Vec<DiagRecord>,
    pub snapshots: Vec<Snapshot>,
    pub final_state: State,
    pub breakdown: bool,
    /// Step attempted when the controller gave up.
    pub final_dt: f64,
    pub steps: usize,
    pub rejected: usize,
    /// Time the steady criterion was first met, when requested.
    pub steady_at: Option<f64>,
    /// Last value of `||rho_new - rho_old||_inf / (dt max(rho_new))`.
    pub steady_residual: f64,
}

fn snapshot(s: &State) -> Snapshot {
    Snapshot { t: s.t, rho: s.rho.clone(), c: s.c.clone() }
}

/// Integrates from `t = 0` to `t_end`, stopping early on breakdown or when
/// the steady criterion is met. Steps are clipped to land on every record time.
pub fn run(spec: &RunSpec) -> Result<RunResult> {
    if !(spec.t_end > 0.0 && spec.t_end.is_finite()) {
        return Err(Error::InvalidParameter(format!("final time must be positive, got {}", spec.t_end)));
    }
    let mut times: Vec<f64> = spec.record_times.clone();
    if times.iter().any(|t| !(*t >= 0.0 && *t <= spec.t_end)) {
        return Err(Error::InvalidParameter(format!("record times must lie in [0, {}]", spec.t_end)));
    }
    times.sort_by(f64::total_cmp);
    times.dedup();

    let stepper = Stepper::new(spec.grid.clone(), spec.params, spec.scheme, spec.newton)?;
    let mut ctrl = spec.ctrl;
    ctrl.validate()?;
    let mut state = initial_state(&spec.grid, &spec.init, &spec.params)?;
    let mut records = vec![DiagRecord::new(&state, None, &spec.params)];
    let mut snapshots = Vec::new();
    let mut next = 0;
    while next < times.len() && times[next] <= 0.0 {
        snapshots.push(snapshot(&state));
        next += 1;
    }

    let mut res = RunResult {
        records: Vec::new(),
        snapshots: Vec::new(),
        final_state: state.clone(),
        breakdown: false,
        final_dt: ctrl.dt,
        steps: 0,
        rejected: 0,
        steady_at: None,
        steady_residual: f64::INFINITY,
    };

    while state.t < spec.t_end {
        let limit = if next < times.len() { times[next] } else { spec.t_end };
        let out = stepper.advance(&state, &mut ctrl, Some(limit))?;
        res.rejected += out.retries;
        res.final_dt = out.dt_used;
        if out.status == StepStatus::Breakdown {
            res.breakdown = true;
            break;
        }
        let new = out.new_state.expect("accepted step carries a state");
        records.push(DiagRecord::new(&new, Some((&state, out.dt_used)), &spec.params));
        res.steps += 1;
        let change = new
            .rho
            .values()
            .iter()
            .zip(state.rho.values())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let rho_max = new.rho.max();
        res.steady_residual = change / out.dt_used / rho_max.abs().max(f64::MIN_POSITIVE);
        state = new;
        while next < times.len() && times[next] <= state.t {
            snapshots.push(snapshot(&state));
            next += 1;
        }
        if let Some(sc) = spec.steady {
            if res.steady_residual < sc.tol {
                res.steady_at = Some(state.t);
                break;
            }
        }
    }
    res.records = records;
    res.snapshots = snapshots;
    res.final_state = state;
    Ok(res)
}

/// Least-squares power law `y ~ x^exponent` in log-log coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerFit {
    pub exponent: f64,
    pub r2: f64,
}

impl PowerFit {
    /// Fits with `r2 < 0.95` are flagged as poor.
    pub fn is_poor(&self) -> bool {
        !(self.r2 >= 0.95)
    }
}

pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<PowerFit> {
    if xs.len() != ys.len() {
        return Err(Error::DegenerateFit(format!("{} abscissae but {} ordinates", xs.len(), ys.len())));
    }
    if xs.len() < 2 {
        return Err(Error::DegenerateFit("need at least two points".into()));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::DegenerateFit("all values must be positive and finite".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 1e-24 * (1.0 + mx * mx) {
        return Err(Error::DegenerateFit("abscissae are all equal".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r2 = if ss_tot <= 1e-300 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(PowerFit { exponent: slope, r2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorNorm {
    L2,
    #[default]
    H2,
}

impl ErrorNorm {
    fn pick(&self, n: DiffNorms) -> f64 {
        match self {
            ErrorNorm::L2 => n.l2,
            ErrorNorm::H2 => n.h2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    /// Non-increasing, all positive.
    pub deltas: Vec<f64>,
    /// `delta` is ignored.
    pub base: Params,
    /// Scheme for the `delta > 0` runs; the `delta = 0` reference uses `pp`
    /// for `eps = 1` and `pe` for `eps = 0`.
    pub scheme: Scheme,
    pub grid: Arc<Grid>,
    pub init: InitialData,
    pub t_end: f64,
    pub dt: f64,
    pub record_times: Vec<f64>,
    pub error_norm: ErrorNorm,
    pub newton: NewtonSettings,
}

impl SweepSpec {
    fn validate(&self) -> Result<()> {
        if self.deltas.len() < 2 {
            return Err(Error::InvalidParameter("a sweep needs at least two deltas".into()));
        }
        if self.deltas.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(Error::InvalidParameter("sweep deltas must be positive".into()));
        }
        if self.deltas.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidParameter("sweep deltas must be sorted in descending order".into()));
        }
        if !(self.t_end > 0.0) {
            return Err(Error::InvalidParameter("sweep final time must be positive".into()));
        }
        if self.record_times.is_empty() {
            return Err(Error::InvalidParameter("a sweep needs at least one record time".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub delta: f64,
    /// `max_t sqrt(||rho_R||^2 + ||c_R||^2)` (the `c` part only for `eps = 1`);
    /// `None` when the run broke down.
    pub error: Option<f64>,
    /// `max_t ||rho_R||`.
    pub error_rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub entries: Vec<SweepEntry>,
    pub fit: Option<PowerFit>,
    pub fit_rho: Option<PowerFit>,
}

impl SweepResult {
    pub fn fitted_exponent(&self) -> Option<f64> {
        self.fit.map(|f| f.exponent)
    }

    pub fn poor_fit(&self) -> bool {
        self.fit.is_none_or(|f| f.is_poor())
    }
}

fn fit_entries(entries: &[SweepEntry], pick: impl Fn(&SweepEntry) -> Option<f64>) -> Option<PowerFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = entries.iter().filter_map(|e| pick(e).map(|y| (e.delta, y))).unzip();
    fit_power_law(&xs, &ys).ok()
}

/// Runs the reference and every `delta` on the same grid and the same fixed
/// time partition, then measures the differences at the record times.
pub fn delta_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let ctrl = TimeController::fixed(spec.dt)?;
    let reference_scheme = if spec.base.eps == 1 { Scheme::Pp } else { Scheme::Pe };
    let mut jobs = vec![(0.0, reference_scheme)];
    jobs.extend(spec.deltas.iter().map(|&d| (d, spec.scheme)));
    let runs: Vec<Result<RunResult>> = jobs
        .par_iter()
        .map(|&(delta, scheme)| {
            let rs = RunSpec::new(spec.grid.clone(), spec.base.with_delta(delta), scheme, spec.init.clone(), spec.t_end, ctrl)
                .with_record_times(spec.record_times.clone())
                .with_newton(spec.newton);
            run(&rs)
        })
        .collect();
    let mut runs = runs.into_iter();
    let reference = runs.next().expect("reference job")?;
    if reference.breakdown {
        return Err(Error::Breakdown { t: reference.final_state.t });
    }
    let with_c = spec.base.eps == 1;
    let mut entries = Vec::with_capacity(spec.deltas.len());
    for (&delta, r) in spec.deltas.iter().zip(runs) {
        let r = r?;
        if r.breakdown {
            entries.push(SweepEntry { delta, error: None, error_rho: None });
            continue;
        }
        let mut e_pair = 0.0f64;
        let mut e_rho = 0.0f64;
        for (a, b) in r.snapshots.iter().zip(&reference.snapshots) {
            let n_rho = spec.error_norm.pick(discrete_h2_norms(&difference(&a.rho, &b.rho)?));
            let n_c = if with_c { spec.error_norm.pick(discrete_h2_norms(&difference(&a.c, &b.c)?)) } else { 0.0 };
            e_rho = e_rho.max(n_rho.sqrt());
            e_pair = e_pair.max((n_rho + n_c).sqrt());
        }
        entries.push(SweepEntry { delta, error: Some(e_pair), error_rho: Some(e_rho) });
    }
    let fit = fit_entries(&entries, |e| e.error);
    let fit_rho = fit_entries(&entries, |e| e.error_rho);
    Ok(SweepResult { entries, fit, fit_rho })
}

fn difference(a: &Field, b: &Field) -> Result<Field> {
    if a.values().len() != b.values().len() {
        return Err(Error::GridMismatch);
    }
    let v = a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
    Field::new(a.grid().clone(), v, Variable::Other)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupReport {
    pub alpha: f64,
    pub delta: f64,
    pub breakdown: bool,
    /// Time of the last accepted level when the controller gave up.
    pub t_break: Option<f64>,
    pub final_dt: f64,
    pub final_linf: f64,
    pub steps: usize,
}

/// Runs until breakdown or `t_cap`.
pub fn blowup_probe(spec: &RunSpec) -> Result<BlowupReport> {
    let r = run(&RunSpec { record_times: Vec::new(), steady: None, ..spec.clone() })?;
    Ok(BlowupReport {
        alpha: spec.params.alpha,
        delta: spec.params.delta,
        breakdown: r.breakdown,
        t_break: r.breakdown.then_some(r.final_state.t),
        final_dt: r.final_dt,
        final_linf: r.final_state.rho.max_abs(),
        steps: r.steps,
    })
}

#[derive(Debug, Clone)]
pub struct BumpSpec {
    pub deltas: Vec<f64>,
    /// `alpha = 1` with a Dirichlet chemical boundary; `delta` is ignored.
    pub base: Params,
    pub scheme: Scheme,
    pub grid: Arc<Grid>,
    pub init: InitialData,
    /// Step budget in time.
    pub t_max: f64,
    pub ctrl: TimeController,
    pub newton: NewtonSettings,
    pub steady: SteadyCriterion,
    pub level: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpEntry {
    pub delta: f64,
    pub radius: f64,
    pub rho_max: f64,
    pub steady: bool,
    pub t_final: f64,
    pub steady_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BumpReport {
    pub entries: Vec<BumpEntry>,
    /// `radius ~ delta^a`.
    pub a: Option<PowerFit>,
    /// `rho_max ~ delta^-b`; the stored exponent is `b`.
    pub b: Option<PowerFit>,
}

impl BumpReport {
    pub fn poor_fit(&self) -> bool {
        self.a.is_none_or(|f| f.is_poor()) || self.b.is_none_or(|f| f.is_poor())
    }
}

/// Integrates every `delta` towards its steady state and fits the radius of
/// the `level` set and the peak height against `delta`.
pub fn bump_study(spec: &BumpSpec) -> Result<BumpReport> {
    if !matches!(spec.grid.kind(), GridKind::Radial { .. }) {
        return Err(Error::NotRadial);
    }
    if spec.deltas.is_empty() {
        return Err(Error::InvalidParameter("bump study needs at least one delta".into()));
    }
    let results: Vec<Result<BumpEntry>> = spec
        .deltas
        .par_iter()
        .map(|&delta| {
            let rs = RunSpec::new(spec.grid.clone(), spec.base.with_delta(delta), spec.scheme, spec.init.clone(), spec.t_max, spec.ctrl)
                .with_newton(spec.newton)
                .with_steady(spec.steady);
            let r = run(&rs)?;
            if r.breakdown {
                return Err(Error::Breakdown { t: r.final_state.t });
            }
            Ok(BumpEntry {
                delta,
                radius: level_set_radius(&r.final_state.rho, spec.level)?,
                rho_max: r.final_state.rho.max(),
                steady: r.steady_at.is_some(),
                t_final: r.final_state.t,
                steady_residual: r.steady_residual,
            })
        })
        .collect();
    let entries = results.into_iter().collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = entries.iter().map(|e| e.delta).collect();
    let radii: Vec<f64> = entries.iter().map(|e| e.radius).collect();
    let maxima: Vec<f64> = entries.iter().map(|e| e.rho_max).collect();
    let a = fit_power_law(&xs, &radii).ok();
    let b = fit_power_law(&xs, &maxima).ok().map(|f| PowerFit { exponent: -f.exponent, r2: f.r2 });
    Ok(BumpReport { entries, a, b })
}
