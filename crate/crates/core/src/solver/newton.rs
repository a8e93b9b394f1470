use crate::error::{Error, Result};
use crate::linalg::{norm_inf, CsrMatrix, LinearSolver, TripletBuilder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JacobianMode {
    #[default]
    Analytic,
    /// Column-wise forward differences.
    Fd,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings {
    /// Max-norm tolerance on the (scaled) residual.
    pub tol_residual: f64,
    pub max_iter: usize,
    pub jacobian: JacobianMode,
    pub linear: LinearSolver,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self {
            tol_residual: 1e-10,
            max_iter: 50,
            jacobian: JacobianMode::Analytic,
            linear: LinearSolver::with_tol(1e-10),
        }
    }
}

impl NewtonSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_residual > 0.0) || self.max_iter < 1 {
            return Err(Error::InvalidParameter(format!(
                "newton needs tol > 0 and max_iter >= 1, got {} and {}",
                self.tol_residual, self.max_iter
            )));
        }
        Ok(())
    }
}

/// A square nonlinear system `r(x) = 0`.
pub trait NonlinearSystem {
    fn dim(&self) -> usize;

    fn residual(&self, x: &[f64], r: &mut [f64]) -> Result<()>;

    /// Analytic Jacobian; systems without one fall back to differences.
    fn jacobian(&self, x: &[f64]) -> Result<CsrMatrix> {
        fd_jacobian(self, x)
    }

    /// Extra acceptance test once the residual is below tolerance.
    fn accept(&self, _x: &[f64]) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Forward-difference Jacobian, one residual evaluation per column.
pub fn fd_jacobian<S: NonlinearSystem + ?Sized>(sys: &S, x: &[f64]) -> Result<CsrMatrix> {
    let n = sys.dim();
    let mut r0 = vec![0.0; n];
    sys.residual(x, &mut r0)?;
    let mut xp = x.to_vec();
    let mut rp = vec![0.0; n];
    let sqrt_eps = f64::EPSILON.sqrt();
    let mut t = TripletBuilder::new(n, n);
    for j in 0..n {
        let h = sqrt_eps * x[j].abs().max(1.0);
        xp[j] = x[j] + h;
        let h = xp[j] - x[j];
        sys.residual(&xp, &mut rp)?;
        for i in 0..n {
            let d = (rp[i] - r0[i]) / h;
            if d != 0.0 {
                t.push(i, j, d);
            }
        }
        xp[j] = x[j];
    }
    for i in 0..n {
        t.push(i, i, 0.0);
    }
    Ok(t.build())
}

/// Undamped Newton iteration `x <- x - J^{-1} r(x)`.
pub fn newton<S: NonlinearSystem + ?Sized>(sys: &S, guess: &[f64], s: &NewtonSettings) -> Result<NewtonReport> {
    s.validate()?;
    let n = sys.dim();
    let mut x = guess.to_vec();
    let mut r = vec![0.0; n];
    for it in 0..=s.max_iter {
        sys.residual(&x, &mut r)?;
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::NewtonFailed(format!("non-finite residual at iteration {it}")));
        }
        let norm = norm_inf(&r);
        if norm <= s.tol_residual && sys.accept(&x) {
            return Ok(NewtonReport { x, iterations: it, residual: norm });
        }
        if it == s.max_iter {
            return Err(Error::NewtonFailed(format!(
                "no convergence in {} iterations (residual {norm:e})",
                s.max_iter
            )));
        }
        let jac = match s.jacobian {
            JacobianMode::Analytic => sys.jacobian(&x)?,
            JacobianMode::Fd => fd_jacobian(sys, &x)?,
        };
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let dx = s.linear.solve(&jac, &rhs)?;
        x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
    }
    unreachable!()
}

/// Closure-backed system with a difference Jacobian.
pub struct FnSystem<F> {
    dim: usize,
    f: F,
}

impl<F> FnSystem<F>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()>,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> NonlinearSystem for FnSystem<F>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()>,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn residual(&self, x: &[f64], r: &mut [f64]) -> Result<()> {
        (self.f)(x, r)
    }
}
