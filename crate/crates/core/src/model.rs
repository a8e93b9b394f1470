//! Model parameters, nonlinearities and initial data.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{BoundaryCondition, Field, Grid, Variable};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    /// Cross-diffusion strength.
    pub delta: f64,
    /// 1: parabolic-parabolic, 0: parabolic-elliptic.
    pub eps: u8,
    /// Signal-production exponent.
    pub alpha: f64,
    pub c_boundary: BoundaryCondition,
    /// Regularization of the log-variable scheme; 0 disables it.
    pub eta: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self { delta: 1e-3, eps: 1, alpha: 1.0, c_boundary: BoundaryCondition::Neumann, eta: 0.0 }
    }
}

impl Params {
    pub fn new(delta: f64, eps: u8, alpha: f64) -> Result<Self> {
        let p = Self { delta, eps, alpha, ..Self::default() };
        p.validate()?;
        Ok(p)
    }

    pub fn with_c_boundary(mut self, bc: BoundaryCondition) -> Self {
        self.c_boundary = bc;
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("delta must be >= 0, got {}", self.delta)));
        }
        if self.eps > 1 {
            return Err(Error::InvalidParameter(format!("eps must be 0 or 1, got {}", self.eps)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidParameter(format!("eta must be >= 0, got {}", self.eta)));
        }
        Ok(())
    }
}

/// Cell density, chemical concentration and the simulation clock.
#[derive(Debug, Clone)]
pub struct State {
    pub rho: Field,
    pub c: Field,
    pub t: f64,
}

impl State {
    pub fn new(rho: Field, c: Field, t: f64) -> Result<Self> {
        rho.check_same_grid(&c)?;
        Ok(Self { rho, c, t })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.rho.grid()
    }
}

/// Gaussian bump `W_{x0,y0,M}` of width `theta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub x0: f64,
    pub y0: f64,
    pub mass: f64,
    pub theta: f64,
}

impl Bump {
    pub fn new(x0: f64, y0: f64, mass: f64, theta: f64) -> Self {
        Self { x0, y0, mass, theta }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        eval_bump(x, y, self.x0, self.y0, self.mass, self.theta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    /// `80 (x^2 + y^2 - 1)^2 (x - 0.1)^2 + 5` on the unit disk.
    Experiment1,
    BumpSum(Vec<Bump>),
    Constant(f64),
    /// Cell values in canonical order.
    Table(Vec<f64>),
}

impl InitialData {
    /// Eight-bump datum with `theta = 1e-2`.
    pub fn experiment3() -> Self {
        let th = 1e-2;
        let b = |x0, y0, m| Bump::new(x0, y0, m, th);
        InitialData::BumpSum(vec![
            b(0.25, 0.0, 10.0 * PI),
            b(-0.25, 0.0, 4.0 * PI),
            b(0.0, -0.25, 4.0 * PI),
            b(0.0, 0.25, 4.0 * PI),
            b(0.0, 0.5, 4.0 * PI),
            b(0.0, 0.35, 4.0 * PI),
            b(0.5, 0.0, 4.0 * PI),
            b(0.5, 0.25, 4.0 * PI),
        ])
    }

    /// Single centered bump of mass `20 pi`, `theta = 1/400`.
    pub fn experiment4() -> Self {
        InitialData::BumpSum(vec![Bump::new(0.0, 0.0, 20.0 * PI, 1.0 / 400.0)])
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            InitialData::BumpSum(bumps) => {
                if bumps.is_empty() {
                    return Err(Error::InvalidParameter("bump_sum needs at least one bump".into()));
                }
                for b in bumps {
                    if !(b.mass > 0.0 && b.theta > 0.0) {
                        return Err(Error::InvalidParameter(format!(
                            "bump mass and theta must be positive, got M={} theta={}",
                            b.mass, b.theta
                        )));
                    }
                }
                Ok(())
            }
            InitialData::Constant(v) if !(*v >= 0.0 && v.is_finite()) => {
                Err(Error::InvalidParameter(format!("constant density must be >= 0, got {v}")))
            }
            InitialData::Table(values) if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) => {
                Err(Error::InvalidParameter("tabulated density must be finite and >= 0".into()))
            }
            _ => Ok(()),
        }
    }

    /// Initial density evaluated at cell centers.
    pub fn rho0(&self, grid: &Arc<Grid>) -> Result<Field> {
        self.validate()?;
        match self {
            InitialData::Experiment1 => Field::from_fn(grid.clone(), Variable::Rho, eval_rho0_experiment1),
            InitialData::BumpSum(bumps) => Field::from_fn(grid.clone(), Variable::Rho, |x, y| {
                bumps.iter().map(|b| b.eval(x, y)).sum()
            }),
            InitialData::Constant(v) => Ok(Field::constant(grid.clone(), *v, Variable::Rho)),
            InitialData::Table(values) => Field::new(grid.clone(), values.clone(), Variable::Rho),
        }
    }
}

pub fn eval_rho0_experiment1(x: f64, y: f64) -> f64 {
    let s = x * x + y * y - 1.0;
    let t = x - 0.1;
    80.0 * s * s * t * t + 5.0
}

pub fn eval_bump(x: f64, y: f64, x0: f64, y0: f64, mass: f64, theta: f64) -> f64 {
    let d2 = (x - x0).powi(2) + (y - y0).powi(2);
    mass / (2.0 * PI * theta) * (-d2 / (2.0 * theta)).exp()
}

/// `max(rho, 0)^alpha`, plus whether any value had to be clamped.
pub fn signal_production(rho: &Field, alpha: f64) -> (Field, bool) {
    let clamped = rho.values().iter().any(|&r| r < 0.0);
    (rho.map(|r| production(r, alpha)).with_tag(Variable::Other), clamped)
}

#[inline]
pub(crate) fn production(rho: f64, alpha: f64) -> f64 {
    if rho > 0.0 {
        if alpha == 1.0 {
            rho
        } else {
            rho.powf(alpha)
        }
    } else {
        0.0
    }
}

#[inline]
pub(crate) fn production_derivative(rho: f64, alpha: f64) -> f64 {
    if rho > 0.0 {
        if alpha == 1.0 {
            1.0
        } else {
            alpha * rho.powf(alpha - 1.0)
        }
    } else if rho == 0.0 && alpha == 1.0 {
        // right derivative
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

/// Eigenvalues `1 +- i sqrt(delta rho)` of the diffusion matrix
/// `[[1, -rho], [delta, 1]]` of the `(rho, c)` system.
pub fn diffusion_eigenvalues(rho: f64, delta: f64) -> Result<[Complex; 2]> {
    if rho < 0.0 || delta < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "eigenvalues need rho >= 0 and delta >= 0, got rho={rho} delta={delta}"
        )));
    }
    let w = (delta * rho).sqrt();
    Ok([Complex { re: 1.0, im: w }, Complex { re: 1.0, im: -w }])
}

/// `v = c + delta rho`.
pub fn reformulate(state: &State, delta: f64) -> Field {
    let v = state
        .c
        .values()
        .iter()
        .zip(state.rho.values())
        .map(|(c, r)| c + delta * r)
        .collect();
    Field::from_raw(state.grid().clone(), v, Variable::V)
}

/// Inverse of [`reformulate`]: `c = v - delta rho`.
pub fn recover_c(v: &Field, rho: &Field, delta: f64) -> Result<Field> {
    v.check_same_grid(rho)?;
    let c = v.values().iter().zip(rho.values()).map(|(v, r)| v - delta * r).collect();
    Ok(Field::from_raw(v.grid().clone(), c, Variable::C))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_polar, build_radial, integrate};

    #[test]
    fn experiment1_datum() {
        assert!((eval_rho0_experiment1(0.1, 0.0) - 5.0).abs() < 1e-15);
        let (x, y) = (0.6, 0.8);
        assert!((eval_rho0_experiment1(x, y) - 5.0).abs() < 1e-12);
        assert!((eval_rho0_experiment1(0.0, 0.0) - 5.8).abs() < 1e-12);
    }

    #[test]
    fn bump_center_value() {
        let (m, th) = (3.0, 0.02);
        assert!((eval_bump(0.3, -0.1, 0.3, -0.1, m, th) - m / (2.0 * PI * th)).abs() < 1e-12);
    }

    #[test]
    fn bump_mass_on_disk() {
        let g = Arc::new(build_radial(2000, 1.0).unwrap());
        let f = InitialData::BumpSum(vec![Bump::new(0.0, 0.0, 2.0, 1e-2)]).rho0(&g).unwrap();
        assert!((integrate(&f) / 2.0 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn invalid_bumps_rejected() {
        assert!(InitialData::BumpSum(vec![Bump::new(0.0, 0.0, -1.0, 0.1)]).validate().is_err());
        assert!(InitialData::BumpSum(vec![Bump::new(0.0, 0.0, 1.0, 0.0)]).validate().is_err());
        assert!(InitialData::BumpSum(vec![]).validate().is_err());
        assert!(InitialData::Constant(-1.0).validate().is_err());
    }

    #[test]
    fn production_values() {
        let g = Arc::new(build_radial(3, 1.0).unwrap());
        let rho = Field::new(g, vec![4.0, -1e-9, 2.0], Variable::Rho).unwrap();
        let (s, clamped) = signal_production(&rho, 0.5);
        assert!(clamped);
        assert_eq!(s.values()[0], 2.0);
        assert_eq!(s.values()[1], 0.0);
        let (s, _) = signal_production(&rho, 2.5);
        assert!((s.values()[2] - 5.656854249492381).abs() < 1e-12);
        let pos = rho.map(f64::abs);
        assert!(!signal_production(&pos, 1.0).1);
    }

    #[test]
    fn eigenvalues() {
        let e = diffusion_eigenvalues(0.0, 0.3).unwrap();
        assert_eq!(e[0], Complex { re: 1.0, im: 0.0 });
        let e = diffusion_eigenvalues(5.0, 0.0).unwrap();
        assert_eq!(e[1].im, 0.0);
        let e = diffusion_eigenvalues(4.0, 0.25).unwrap();
        assert_eq!(e[0], Complex { re: 1.0, im: 1.0 });
        assert_eq!(e[1], Complex { re: 1.0, im: -1.0 });
        assert!(diffusion_eigenvalues(-1.0, 0.1).is_err());
    }

    #[test]
    fn eigenvalues_match_characteristic_polynomial() {
        // det([[1 - l, -rho], [delta, 1 - l]]) = (1 - l)^2 + delta rho
        for &(rho, delta) in &[(0.5, 0.1), (10.0, 1e-3), (3.0, 2.0)] {
            for l in diffusion_eigenvalues(rho, delta).unwrap() {
                let (a, b) = (1.0 - l.re, -l.im);
                let re = a * a - b * b + delta * rho;
                let im = 2.0 * a * b;
                assert!(re.abs() < 1e-12 && im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reformulation_arithmetic() {
        let g = Arc::new(build_polar(3, 4, 1.0).unwrap());
        let rho = Field::constant(g.clone(), 2.0, Variable::Rho);
        let c = Field::constant(g, 3.0, Variable::C);
        let s = State::new(rho, c, 0.0).unwrap();
        assert!(reformulate(&s, 0.5).values().iter().all(|&v| v == 4.0));
        assert!(reformulate(&s, 0.0).values().iter().all(|&v| v == 3.0));
    }

    #[test]
    fn params_validation() {
        assert!(Params::new(-1e-3, 1, 1.0).is_err());
        assert!(Params::new(1e-3, 2, 1.0).is_err());
        assert!(Params::new(1e-3, 0, 0.0).is_err());
        assert!(Params::new(0.0, 0, 1.0).is_ok());
        assert!(Params::default().with_eta(-1.0).validate().is_err());
    }
}
