#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use kscross_core::harness::fit_power_law;
use kscross_core::mesh::{build_rect, Bounds, Field, Grid, Variable};
use kscross_core::model::{Params, State};
use kscross_core::solver::{residual_pp, NewtonSettings, Scheme, Source, Stepper, TimeController};

pub fn unit_square(n: usize) -> Arc<Grid> {
    Arc::new(build_rect(n, n, Bounds::new(0.0, 1.0, 0.0, 1.0)).unwrap())
}

pub fn state_from(grid: &Arc<Grid>, t: f64, rho: impl Fn(f64, f64) -> f64, c: impl Fn(f64, f64) -> f64) -> State {
    State::new(
        Field::from_fn(grid.clone(), Variable::Rho, rho).unwrap(),
        Field::from_fn(grid.clone(), Variable::C, c).unwrap(),
        t,
    )
    .unwrap()
}

pub fn max_error(s: &State, e: &State) -> f64 {
    let d = |a: &Field, b: &Field| a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    d(&s.rho, &e.rho).max(d(&s.c, &e.c))
}

/// Steady pair with zero normal derivatives on the unit square, and the
/// pointwise forcing that makes it a steady solution of the pp system.
struct SteadyMms {
    p: Params,
}

impl SteadyMms {
    fn rho(x: f64, y: f64) -> f64 {
        2.0 + 0.5 * (PI * x).cos() * (PI * y).cos()
    }

    fn c(x: f64, y: f64) -> f64 {
        1.0 + 0.3 * (PI * x).cos() * (2.0 * PI * y).cos()
    }

    fn forcing(&self, x: f64, y: f64) -> [f64; 2] {
        let (cx, sx, cy, sy) = ((PI * x).cos(), (PI * x).sin(), (PI * y).cos(), (PI * y).sin());
        let (c2y, s2y) = ((2.0 * PI * y).cos(), (2.0 * PI * y).sin());
        let rho = Self::rho(x, y);
        let grad_rho = [-0.5 * PI * sx * cy, -0.5 * PI * cx * sy];
        let lap_rho = -PI * PI * cx * cy;
        let grad_c = [-0.3 * PI * sx * c2y, -0.6 * PI * cx * s2y];
        let lap_c = -1.5 * PI * PI * cx * c2y;
        let f_rho = -lap_rho + grad_rho[0] * grad_c[0] + grad_rho[1] * grad_c[1] + rho * lap_c;
        let f_c = -lap_c - self.p.delta * lap_rho + Self::c(x, y) - rho.powf(self.p.alpha);
        [f_rho, f_c]
    }
}

/// Max-norm errors of `scheme` against a steady manufactured solution on
/// `n x n` unit squares. Returns `(h, error)` pairs.
pub fn spatial_mms(scheme: Scheme, levels: &[usize], p: Params) -> Vec<(f64, f64)> {
    let mms = SteadyMms { p };
    levels
        .iter()
        .map(|&n| {
            let grid = unit_square(n);
            let m = grid.measures();
            let mut f: Vec<f64> = grid.centers().iter().flat_map(|&[x, y]| mms.forcing(x, y)).collect();
            // The continuous density forcing integrates to zero; remove the
            // quadrature remainder so the discrete mass stays fixed.
            let mean = (0..m.len()).map(|k| m[k] * f[2 * k]).sum::<f64>() / grid.total_measure();
            (0..m.len()).for_each(|k| f[2 * k] -= mean);
            let exact = state_from(&grid, 0.0, SteadyMms::rho, SteadyMms::c);
            let stepper = Stepper::new(grid.clone(), p, scheme, NewtonSettings::default())
                .unwrap()
                .with_source(Source::new(move |_| f.clone()));
            let mut ctrl = TimeController::fixed(1.0).unwrap();
            let mut s = exact.clone();
            for _ in 0..10 {
                s = stepper.advance(&s, &mut ctrl, None).unwrap().new_state.expect("steady mms step failed");
            }
            (1.0 / n as f64, max_error(&s, &exact))
        })
        .collect()
}

fn rho_t(x: f64, y: f64, t: f64) -> f64 {
    2.0 + 0.5 * (-t).exp() * (PI * x).cos() * (PI * y).cos()
}

fn c_t(x: f64, y: f64, t: f64) -> f64 {
    1.0 + 0.3 * t.exp() * (PI * x).cos() * (2.0 * PI * y).cos()
}

/// Max-norm errors at `t_end` of the pp scheme against a time-dependent
/// manufactured solution. The forcing uses the discrete spatial operator,
/// so the cell values of the exact solution solve the semi-discrete
/// problem and the error is purely temporal. Returns `(dt, error)` pairs.
pub fn temporal_mms(n: usize, t_end: f64, steps: &[usize], p: Params) -> Vec<(f64, f64)> {
    let grid = unit_square(n);
    let g = grid.clone();
    let source = Source::new(move |t| {
        let u = state_from(&g, t, |x, y| rho_t(x, y, t), |x, y| c_t(x, y, t));
        let spatial = residual_pp(&u, &u, 1.0, &p).unwrap();
        g.centers()
            .iter()
            .enumerate()
            .flat_map(|(k, &[x, y])| {
                let drho = -0.5 * (-t).exp() * (PI * x).cos() * (PI * y).cos();
                let dc = 0.3 * t.exp() * (PI * x).cos() * (2.0 * PI * y).cos();
                [drho + spatial[2 * k], f64::from(p.eps) * dc + spatial[2 * k + 1]]
            })
            .collect()
    });
    let stepper = Stepper::new(grid.clone(), p, Scheme::Pp, NewtonSettings::default()).unwrap().with_source(source);
    let exact = state_from(&grid, t_end, |x, y| rho_t(x, y, t_end), |x, y| c_t(x, y, t_end));
    steps
        .iter()
        .map(|&m| {
            let dt = t_end / m as f64;
            let mut ctrl = TimeController::fixed(dt).unwrap();
            let mut s = state_from(&grid, 0.0, |x, y| rho_t(x, y, 0.0), |x, y| c_t(x, y, 0.0));
            for _ in 0..m {
                s = stepper.advance(&s, &mut ctrl, Some(t_end)).unwrap().new_state.expect("temporal mms step failed");
            }
            (dt, max_error(&s, &exact))
        })
        .collect()
}

pub fn slope(pairs: &[(f64, f64)]) -> f64 {
    let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    fit_power_law(&xs, &ys).unwrap().exponent
}
