//! Backward-Euler residuals and their Jacobians.
//!
//! Unknowns are interleaved per cell: `x[2k]` is the density variable
//! (`rho`, or `w = delta log rho` for the log scheme) and `x[2k + 1]` the
//! chemical variable (`c` for a parabolic chemical equation, `v = c + delta rho`
//! for the elliptic one). Rows are in per-unit-area form.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, TripletBuilder};
use crate::mesh::{laplacian_matrix, BoundaryCondition, Grid};
use crate::model::{production, production_derivative, Params};

use super::Scheme;

/// Largest `|w| / delta` for which `exp(w / delta)` is evaluated.
pub const LOG_RANGE: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum DensityVar {
    Rho,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ChemicalEq {
    /// `c_t = lap c + delta lap rho - c + rho^alpha`
    Parabolic,
    /// `-lap v + v = delta rho + rho^alpha`
    Elliptic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Mobility {
    Arithmetic,
    /// Logarithmic mean; makes the drift cancel exactly against the chemical
    /// equation when tested with `log rho`.
    Logarithmic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Form {
    pub density: DensityVar,
    pub chemical: ChemicalEq,
    pub mobility: Mobility,
}

impl Form {
    pub fn for_scheme(scheme: Scheme, p: &Params) -> Result<Form> {
        match scheme {
            Scheme::Pp => {
                if p.eps != 1 {
                    return Err(Error::SchemeMismatch { scheme: "pp", eps: p.eps });
                }
                Ok(Form { density: DensityVar::Rho, chemical: ChemicalEq::Parabolic, mobility: Mobility::Arithmetic })
            }
            Scheme::Pe => {
                if p.eps != 0 {
                    return Err(Error::SchemeMismatch { scheme: "pe", eps: p.eps });
                }
                Ok(Form { density: DensityVar::Rho, chemical: ChemicalEq::Elliptic, mobility: Mobility::Arithmetic })
            }
            Scheme::Log => {
                if !(p.delta > 0.0) {
                    return Err(Error::InvalidParameter("log scheme needs delta > 0".into()));
                }
                let chemical = if p.eps == 1 { ChemicalEq::Parabolic } else { ChemicalEq::Elliptic };
                Ok(Form { density: DensityVar::Log, chemical, mobility: Mobility::Logarithmic })
            }
        }
    }
}

/// Logarithmic mean of `exp(wa/delta)` and `exp(wb/delta)` and its partial
/// derivatives with respect to `wa` and `wb`.
pub(crate) fn log_mean_w(wa: f64, wb: f64, delta: f64) -> (f64, f64, f64) {
    let (hi, lo, swapped) = if wa >= wb { (wa, wb, false) } else { (wb, wa, true) };
    let rho_hi = (hi / delta).exp();
    let s = (hi - lo) / delta;
    // h(s) = (1 - e^-s)/s, h'(s) = ((1 + s) e^-s - 1)/s^2
    let (h, dh) = if s < 1e-4 {
        (1.0 - s / 2.0 + s * s / 6.0 - s * s * s / 24.0, -0.5 + s / 3.0 - s * s / 8.0)
    } else {
        let e = (-s).exp();
        (-(-s).exp_m1() / s, ((1.0 + s) * e - 1.0) / (s * s))
    };
    let m = rho_hi * h;
    let d_hi = (m + rho_hi * dh) / delta;
    let d_lo = -rho_hi * dh / delta;
    if swapped {
        (m, d_lo, d_hi)
    } else {
        (m, d_hi, d_lo)
    }
}

/// Everything one implicit step needs besides the unknowns.
#[derive(Debug, Clone)]
pub(crate) struct StepProblem {
    pub grid: Arc<Grid>,
    pub params: Params,
    pub form: Form,
    pub dt: f64,
    pub rho_old: Vec<f64>,
    /// Old chemical unknown (`c` or `v`), used for the time term and row scaling.
    pub chem_old: Vec<f64>,
    pub bilaplacian: Option<Arc<CsrMatrix>>,
    pub pattern: Arc<CsrMatrix>,
    /// Row weights applied to residual and Jacobian.
    pub weights: Vec<f64>,
    /// Interleaved forcing at the new time level, subtracted from the rows.
    pub source: Option<Vec<f64>>,
}

/// Jacobian sparsity for the interleaved two-field layout, plus the
/// squared-Laplacian coupling when `with_bilaplacian` is set.
pub(crate) fn jacobian_pattern(grid: &Grid, bilap: Option<&CsrMatrix>) -> CsrMatrix {
    let n = grid.len();
    let mut t = TripletBuilder::with_capacity(2 * n, 2 * n, 4 * n + 8 * grid.faces().len());
    for k in 0..n {
        for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            t.push(2 * k + i, 2 * k + j, 0.0);
        }
    }
    for f in grid.faces() {
        for (p, q) in [(f.a, f.b), (f.b, f.a)] {
            for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                t.push(2 * p + i, 2 * q + j, 0.0);
            }
        }
    }
    if let Some(b) = bilap {
        for k in 0..n {
            for (j, _) in b.row(k) {
                t.push(2 * k, 2 * j, 0.0);
            }
        }
    }
    t.build()
}

pub(crate) fn bilaplacian(grid: &Grid) -> CsrMatrix {
    let l = laplacian_matrix(grid, BoundaryCondition::Neumann);
    l.matmul(&l)
}

impl StepProblem {
    /// Density value and `d rho / d x` for one cell.
    #[inline]
    fn density(&self, x: f64) -> (f64, f64) {
        match self.form.density {
            DensityVar::Rho => (x, 1.0),
            DensityVar::Log => {
                let r = (x / self.params.delta).exp();
                (r, r / self.params.delta)
            }
        }
    }

    pub fn check_range(&self, x: &[f64]) -> Result<()> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Range("non-finite unknown".into()));
        }
        if self.form.density == DensityVar::Log {
            let d = self.params.delta;
            for k in 0..self.grid.len() {
                let s = x[2 * k] / d;
                if s.abs() > LOG_RANGE {
                    return Err(Error::Range(format!("w/delta = {s:.3e} in cell {k}")));
                }
            }
        }
        Ok(())
    }

    /// Raw residual; the Jacobian is filled into `jac` (pattern-compatible)
    /// when given.
    pub fn eval(&self, x: &[f64], r: &mut [f64], mut jac: Option<&mut CsrMatrix>) -> Result<()> {
        self.check_range(x)?;
        let grid = &*self.grid;
        let n = grid.len();
        let meas = grid.measures();
        let Params { delta, alpha, eta, c_boundary, eps } = self.params;
        let elliptic = self.form.chemical == ChemicalEq::Elliptic;
        let log = self.form.density == DensityVar::Log;
        let dt = self.dt;
        let kappa = if elliptic { 1.0 } else { 0.0 };

        let mut rho = vec![0.0; n];
        let mut drho = vec![0.0; n];
        for k in 0..n {
            let (v, d) = self.density(x[2 * k]);
            rho[k] = v;
            drho[k] = d;
        }

        if let Some(j) = jac.as_deref_mut() {
            j.fill_zero();
        }

        // cell terms
        for k in 0..n {
            let (ip, ic) = (2 * k, 2 * k + 1);
            let psi = x[ic];
            r[ip] = (rho[k] - self.rho_old[k]) / dt;
            let prod = production(rho[k], alpha);
            let dprod = production_derivative(rho[k], alpha);
            match self.form.chemical {
                ChemicalEq::Parabolic => {
                    r[ic] = f64::from(eps) * (psi - self.chem_old[k]) / dt + psi - prod;
                }
                ChemicalEq::Elliptic => {
                    r[ic] = psi - delta * rho[k] - prod;
                }
            }
            if log && eta > 0.0 {
                r[ip] += eta * x[ip] * rho[k];
            }
            if let Some(j) = jac.as_deref_mut() {
                j.add_at(ip, ip, drho[k] / dt);
                if log && eta > 0.0 {
                    j.add_at(ip, ip, eta * (rho[k] + x[ip] * drho[k]));
                }
                match self.form.chemical {
                    ChemicalEq::Parabolic => {
                        j.add_at(ic, ic, f64::from(eps) / dt + 1.0);
                        j.add_at(ic, ip, -dprod * drho[k]);
                    }
                    ChemicalEq::Elliptic => {
                        j.add_at(ic, ic, 1.0);
                        j.add_at(ic, ip, -(delta + dprod) * drho[k]);
                    }
                }
            }
        }

        // face fluxes
        for face in grid.faces() {
            let (a, b) = (face.a, face.b);
            let t = face.transmissibility();
            let (pa, pb, ca, cb) = (2 * a, 2 * b, 2 * a + 1, 2 * b + 1);
            let drho_ab = rho[b] - rho[a];
            let dpsi = x[cb] - x[ca];
            let rho_avg = 0.5 * (rho[a] + rho[b]);
            let diff = 1.0 + kappa * delta * rho_avg;
            let (mob, dmob_a, dmob_b) = match self.form.mobility {
                Mobility::Arithmetic => (rho_avg, 0.5 * drho[a], 0.5 * drho[b]),
                Mobility::Logarithmic => log_mean_w(x[pa], x[pb], delta),
            };
            // flux into a through this face
            let flux = t * (diff * drho_ab - mob * dpsi);
            r[pa] -= flux / meas[a];
            r[pb] += flux / meas[b];

            // chemical diffusion, and the cross-diffusion term for parabolic c
            let qc = t * dpsi;
            r[ca] -= qc / meas[a];
            r[cb] += qc / meas[b];
            let cross = !elliptic && delta != 0.0;
            if cross {
                let qx = t * delta * drho_ab;
                r[ca] -= qx / meas[a];
                r[cb] += qx / meas[b];
            }

            if log && eta > 0.0 {
                let dw = x[pb] - x[pa];
                let g = t * dw * dw * dw / (face.distance * face.distance);
                let s = eta / (delta * delta);
                r[pa] -= s * g / meas[a];
                r[pb] += s * g / meas[b];
                if let Some(j) = jac.as_deref_mut() {
                    let dg = s * 3.0 * t * dw * dw / (face.distance * face.distance);
                    j.add_at(pa, pb, -dg / meas[a]);
                    j.add_at(pa, pa, dg / meas[a]);
                    j.add_at(pb, pb, dg / meas[b]);
                    j.add_at(pb, pa, -dg / meas[b]);
                }
            }

            if let Some(j) = jac.as_deref_mut() {
                let ddiff = 0.5 * kappa * delta * drho_ab;
                let df_da = t * ((ddiff - diff) * drho[a] - dmob_a * dpsi);
                let df_db = t * ((ddiff + diff) * drho[b] - dmob_b * dpsi);
                let df_dpsi_a = t * mob;
                let df_dpsi_b = -t * mob;
                j.add_at(pa, pa, -df_da / meas[a]);
                j.add_at(pa, pb, -df_db / meas[a]);
                j.add_at(pa, ca, -df_dpsi_a / meas[a]);
                j.add_at(pa, cb, -df_dpsi_b / meas[a]);
                j.add_at(pb, pa, df_da / meas[b]);
                j.add_at(pb, pb, df_db / meas[b]);
                j.add_at(pb, ca, df_dpsi_a / meas[b]);
                j.add_at(pb, cb, df_dpsi_b / meas[b]);

                j.add_at(ca, ca, t / meas[a]);
                j.add_at(ca, cb, -t / meas[a]);
                j.add_at(cb, cb, t / meas[b]);
                j.add_at(cb, ca, -t / meas[b]);
                if cross {
                    let tx = t * delta;
                    j.add_at(ca, pa, tx * drho[a] / meas[a]);
                    j.add_at(ca, pb, -tx * drho[b] / meas[a]);
                    j.add_at(cb, pb, tx * drho[b] / meas[b]);
                    j.add_at(cb, pa, -tx * drho[a] / meas[b]);
                }
            }
        }

        if let Some(src) = &self.source {
            r.iter_mut().zip(src).for_each(|(ri, si)| *ri -= si);
        }

        // Dirichlet chemical boundary: c = 0 on the boundary, i.e. v = delta rho
        if c_boundary == BoundaryCondition::Dirichlet0 {
            for bf in grid.boundary_faces() {
                let k = bf.cell;
                let tb = bf.transmissibility();
                let (ip, ic) = (2 * k, 2 * k + 1);
                let target = if elliptic { delta * rho[k] } else { 0.0 };
                r[ic] -= tb * (target - x[ic]) / meas[k];
                if let Some(j) = jac.as_deref_mut() {
                    j.add_at(ic, ic, tb / meas[k]);
                    if elliptic {
                        j.add_at(ic, ip, -tb * delta * drho[k] / meas[k]);
                    }
                }
            }
        }

        if log && eta > 0.0 {
            if let Some(bl) = &self.bilaplacian {
                for k in 0..n {
                    let mut s = 0.0;
                    for (j, v) in bl.row(k) {
                        s += v * x[2 * j];
                    }
                    r[2 * k] += eta * s;
                    if let Some(jm) = jac.as_deref_mut() {
                        for (j, v) in bl.row(k) {
                            jm.add_at(2 * k, 2 * j, eta * v);
                        }
                    }
                }
            }
        }

        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::Range("non-finite residual".into()));
        }
        Ok(())
    }

    pub fn scaled_residual(&self, x: &[f64], r: &mut [f64]) -> Result<()> {
        self.eval(x, r, None)?;
        r.iter_mut().zip(&self.weights).for_each(|(ri, w)| *ri *= w);
        Ok(())
    }

    pub fn scaled_jacobian(&self, x: &[f64]) -> Result<CsrMatrix> {
        let mut jac = (*self.pattern).clone();
        let mut r = vec![0.0; x.len()];
        self.eval(x, &mut r, Some(&mut jac))?;
        jac.scale_rows(&self.weights);
        Ok(jac)
    }
}

/// Jacobi-type row scaling: each row is divided by the size of its
/// diagonal operator (time term plus `sum T / |K|`) and by the magnitude of
/// the old value, so the Newton tolerance bounds a relative update on any
/// mesh width.
pub(crate) fn row_weights(grid: &Grid, form: Form, p: &Params, dt: f64, rho_old: &[f64], chem_old: &[f64]) -> Vec<f64> {
    let meas = grid.measures();
    let mut stencil = vec![0.0; meas.len()];
    for f in grid.faces() {
        let t = f.transmissibility();
        stencil[f.a] += t / meas[f.a];
        stencil[f.b] += t / meas[f.b];
    }
    let kappa = if form.chemical == ChemicalEq::Elliptic { p.delta } else { 0.0 };
    let mut w = Vec::with_capacity(2 * rho_old.len());
    for ((r, c), s) in rho_old.iter().zip(chem_old).zip(&stencil) {
        let r = r.abs();
        w.push(1.0 / (r.max(1.0) * (1.0 / dt + (1.0 + kappa * r) * s)));
        let time = match form.chemical {
            ChemicalEq::Parabolic => f64::from(p.eps) / dt,
            ChemicalEq::Elliptic => 0.0,
        };
        w.push(1.0 / (c.abs().max(1.0) * (time + 1.0 + s)));
    }
    w
}
