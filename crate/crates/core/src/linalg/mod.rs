//! Sparse matrices and the linear solvers behind the Newton iterations.

mod banded;
mod gmres;
mod sparse;

pub use banded::BandedLu;
pub use gmres::{gmres_ilu0, Ilu0};
pub use sparse::{CsrMatrix, TripletBuilder};

use crate::error::{Error, Result};

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Relative residual `||b - Ax||_2 / ||b||_2` (absolute when `b = 0`).
pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let bn = norm2(b);
    if bn == 0.0 {
        norm2(&r)
    } else {
        norm2(&r) / bn
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinearMethod {
    /// Banded LU when the band is narrow, GMRES otherwise.
    #[default]
    Auto,
    Banded,
    Gmres,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSolver {
    pub method: LinearMethod,
    /// Required relative residual.
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
    /// Auto switches to GMRES above this many banded-LU flops.
    pub banded_flop_limit: f64,
    /// Hard cap on banded storage (entries), also for the GMRES fallback.
    pub banded_storage_limit: usize,
}

impl Default for LinearSolver {
    fn default() -> Self {
        Self {
            method: LinearMethod::Auto,
            tol: 1e-12,
            restart: 80,
            max_iter: 2000,
            banded_flop_limit: 2e6,
            banded_storage_limit: 60_000_000,
        }
    }
}

impl LinearSolver {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }

    pub fn solve(&self, a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
        if a.nrows() != a.ncols() || a.nrows() != b.len() {
            return Err(Error::Singular(format!(
                "dimension mismatch: {}x{} matrix, rhs of length {}",
                a.nrows(),
                a.ncols(),
                b.len()
            )));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearSolveFailed { tol: self.tol, achieved: f64::NAN });
        }
        let (kl, ku) = a.bandwidths();
        let flops = a.nrows() as f64 * kl as f64 * (kl + ku + 1) as f64;
        match self.method {
            LinearMethod::Banded => self.solve_banded(a, b),
            LinearMethod::Gmres => self.solve_gmres(a, b),
            LinearMethod::Auto if flops <= self.banded_flop_limit => self.solve_banded(a, b),
            LinearMethod::Auto => match self.solve_gmres(a, b) {
                Ok(x) => Ok(x),
                Err(e) if BandedLu::storage_for(a) <= self.banded_storage_limit => {
                    self.solve_banded(a, b).map_err(|_| e)
                }
                Err(e) => Err(e),
            },
        }
    }

    fn solve_banded(&self, a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
        if BandedLu::storage_for(a) > self.banded_storage_limit {
            return Err(Error::Singular("band too wide for direct factorization".into()));
        }
        let lu = BandedLu::factor(a)?;
        let mut x = b.to_vec();
        lu.solve_in_place(&mut x);
        let bn = norm2(b);
        if bn == 0.0 {
            return Ok(x);
        }
        let mut rel = f64::INFINITY;
        // iterative refinement
        for _ in 0..4 {
            let ax = a.mul_vec(&x);
            let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
            rel = norm2(&r) / bn;
            if !rel.is_finite() {
                return Err(Error::Singular("non-finite solution".into()));
            }
            if rel <= self.tol {
                return Ok(x);
            }
            lu.solve_in_place(&mut r);
            x.iter_mut().zip(&r).for_each(|(xi, di)| *xi += di);
        }
        let final_rel = relative_residual(a, &x, b);
        if final_rel <= self.tol {
            Ok(x)
        } else {
            Err(Error::LinearSolveFailed { tol: self.tol, achieved: final_rel.min(rel) })
        }
    }

    fn solve_gmres(&self, a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
        gmres_ilu0(a, b, self.tol, self.restart, self.max_iter).map(|(x, _)| x)
    }
}

/// Solves `A x = b` to relative residual `1e-12`.
pub fn linear_solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    LinearSolver::default().solve(a, b)
}
