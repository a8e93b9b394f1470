//! Implicit Euler time stepping with Newton linearization.
//!
//! Three discretizations share one residual kernel:
//! - `pp`: fully coupled `(rho, c)` for the parabolic-parabolic system;
//! - `pe`: coupled `(rho, v)` with `v = c + delta rho` for the
//!   parabolic-elliptic system, `c` recovered afterwards;
//! - `log`: the density is carried as `w = delta log rho`, which keeps it
//!   positive, and the drift uses the logarithmic mean so the discrete
//!   entropy balance closes.

mod newton;
mod stepper;
mod system;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

pub use newton::{fd_jacobian, newton, FnSystem, JacobianMode, NewtonReport, NewtonSettings, NonlinearSystem};
pub use stepper::{advance, Source, StepOutcome, StepStatus, Stepper, TimeController};
pub use system::LOG_RANGE;

use crate::error::{Error, Result};
use crate::linalg::{linear_solve, TripletBuilder};
use crate::mesh::{BoundaryCondition, Field, Grid, Variable};
use crate::model::{production, recover_c, InitialData, Params, State};
use system::{row_weights, Form, StepProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Pp,
    Pe,
    Log,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Pp => "pp",
            Scheme::Pe => "pe",
            Scheme::Log => "log",
        }
    }

    /// The `eps` a scheme runs with when the user does not say.
    pub fn default_eps(&self) -> u8 {
        match self {
            Scheme::Pp => 1,
            Scheme::Pe | Scheme::Log => 0,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pp" => Ok(Scheme::Pp),
            "pe" => Ok(Scheme::Pe),
            "log" => Ok(Scheme::Log),
            other => Err(Error::InvalidParameter(format!("unknown scheme `{other}`"))),
        }
    }
}

fn interleave(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).flat_map(|(x, y)| [*x, *y]).collect()
}

fn problem(grid: &Arc<Grid>, p: &Params, form: Form, dt: f64, rho_old: &[f64], chem_old: &[f64]) -> StepProblem {
    StepProblem {
        grid: grid.clone(),
        params: *p,
        form,
        dt,
        rho_old: rho_old.to_vec(),
        chem_old: chem_old.to_vec(),
        bilaplacian: None,
        pattern: Arc::new(crate::linalg::CsrMatrix::identity(0)),
        weights: row_weights(grid, form, p, dt, rho_old, chem_old),
        source: None,
    }
}

fn with_bilaplacian(mut prob: StepProblem) -> StepProblem {
    if prob.form.density == system::DensityVar::Log && prob.params.eta > 0.0 {
        prob.bilaplacian = Some(Arc::new(system::bilaplacian(&prob.grid)));
    }
    prob
}

/// Backward-Euler residual of the parabolic-parabolic system, interleaved
/// `[rho-row, c-row]` per cell.
pub fn residual_pp(new: &State, old: &State, dt: f64, p: &Params) -> Result<Vec<f64>> {
    new.rho.check_same_grid(&old.rho)?;
    let form = Form::for_scheme(Scheme::Pp, p)?;
    let prob = problem(new.grid(), p, form, dt, old.rho.values(), old.c.values());
    let x = interleave(new.rho.values(), new.c.values());
    let mut r = vec![0.0; x.len()];
    prob.eval(&x, &mut r, None)?;
    Ok(r)
}

/// Residual of the reformulated parabolic-elliptic system in `(rho, v)`.
pub fn residual_pe(new_rho: &Field, old_rho: &Field, v: &Field, dt: f64, p: &Params) -> Result<Vec<f64>> {
    new_rho.check_same_grid(old_rho)?;
    new_rho.check_same_grid(v)?;
    let form = Form::for_scheme(Scheme::Pe, p)?;
    let prob = problem(new_rho.grid(), p, form, dt, old_rho.values(), v.values());
    let x = interleave(new_rho.values(), v.values());
    let mut r = vec![0.0; x.len()];
    prob.eval(&x, &mut r, None)?;
    Ok(r)
}

/// Residual of the log-variable scheme. `new_c_or_v` is `v` for `eps = 0`
/// and `c` for `eps = 1`.
pub fn residual_log(new_w: &Field, new_c_or_v: &Field, old: &State, dt: f64, p: &Params) -> Result<Vec<f64>> {
    new_w.check_same_grid(new_c_or_v)?;
    new_w.check_same_grid(&old.rho)?;
    let form = Form::for_scheme(Scheme::Log, p)?;
    let prob = with_bilaplacian(problem(new_w.grid(), p, form, dt, old.rho.values(), old.c.values()));
    let x = interleave(new_w.values(), new_c_or_v.values());
    let mut r = vec![0.0; x.len()];
    prob.eval(&x, &mut r, None)?;
    Ok(r)
}

/// Row-major dense matrix.
pub type DenseMatrix = Vec<Vec<f64>>;

/// Assembled analytic and difference Jacobians of one step residual, for
/// verification. Returns dense matrices `(analytic, fd)`.
pub fn step_jacobians(
    scheme: Scheme,
    x: &[f64],
    old: &State,
    dt: f64,
    p: &Params,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let form = Form::for_scheme(scheme, p)?;
    let chem_old = match form.chemical {
        system::ChemicalEq::Parabolic => old.c.values().to_vec(),
        system::ChemicalEq::Elliptic => crate::model::reformulate(old, p.delta).into_values(),
    };
    let mut prob = with_bilaplacian(problem(old.grid(), p, form, dt, old.rho.values(), &chem_old));
    prob.pattern = Arc::new(system::jacobian_pattern(&prob.grid, prob.bilaplacian.as_deref()));
    let sys = stepper::ProblemSystem { prob: &prob, mass_check: false };
    let analytic = sys.jacobian(x)?.to_dense();
    let fd = fd_jacobian(&sys, x)?.to_dense();
    Ok((analytic, fd))
}

/// Solves `(-lap + 1) c = rho^alpha` with the chemical boundary condition of `p`.
pub fn solve_elliptic_c(rho: &Field, p: &Params) -> Result<Field> {
    let rhs: Vec<f64> = rho.values().iter().map(|&r| production(r, p.alpha)).collect();
    let c = solve_screened_poisson(rho.grid(), &rhs, p.c_boundary)?;
    Ok(Field::from_raw(rho.grid().clone(), c, Variable::C))
}

/// `(-lap + 1) u = f`.
pub(crate) fn solve_screened_poisson(grid: &Grid, f: &[f64], bc: BoundaryCondition) -> Result<Vec<f64>> {
    let n = grid.len();
    let m = grid.measures();
    let mut t = TripletBuilder::new(n, n);
    for k in 0..n {
        t.push(k, k, m[k]);
    }
    for face in grid.faces() {
        let tr = face.transmissibility();
        t.push(face.a, face.a, tr);
        t.push(face.b, face.b, tr);
        t.push(face.a, face.b, -tr);
        t.push(face.b, face.a, -tr);
    }
    if bc == BoundaryCondition::Dirichlet0 {
        for bf in grid.boundary_faces() {
            t.push(bf.cell, bf.cell, bf.transmissibility());
        }
    }
    let a = t.build();
    let b: Vec<f64> = f.iter().zip(m).map(|(f, m)| f * m).collect();
    linear_solve(&a, &b)
}

/// `t = 0` state: `c0 = 0` when the chemical equation is parabolic, otherwise
/// the solution of the elliptic equation for `rho0`.
pub fn initial_state(grid: &Arc<Grid>, init: &InitialData, p: &Params) -> Result<State> {
    p.validate()?;
    let rho = init.rho0(grid)?;
    let c = if p.eps == 1 {
        Field::zeros(grid.clone(), Variable::C)
    } else {
        // -lap v + v = delta rho + rho^alpha, then c = v - delta rho
        let rhs: Vec<f64> = rho.values().iter().map(|&r| p.delta * r + production(r, p.alpha)).collect();
        let vbc = p.c_boundary;
        let v = if vbc == BoundaryCondition::Dirichlet0 && p.delta > 0.0 {
            // boundary value of v is delta rho; solve for c directly instead
            let mut c_rhs = rhs.clone();
            let lap_rho = crate::mesh::laplacian_values(grid, rho.values(), BoundaryCondition::Neumann);
            for (k, cr) in c_rhs.iter_mut().enumerate() {
                // -lap c + c = rho^alpha + delta lap rho
                *cr = production(rho.values()[k], p.alpha) + p.delta * lap_rho[k];
            }
            let c = solve_screened_poisson(grid, &c_rhs, BoundaryCondition::Dirichlet0)?;
            c.iter().zip(rho.values()).map(|(c, r)| c + p.delta * r).collect()
        } else {
            solve_screened_poisson(grid, &rhs, vbc)?
        };
        let v = Field::from_raw(grid.clone(), v, Variable::V);
        recover_c(&v, &rho, p.delta)?
    };
    State::new(rho, c, 0.0)
}
