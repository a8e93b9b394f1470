//! Finite-volume solvers for the Keller-Segel chemotaxis system with
//! additional cross-diffusion `delta lap rho` in the chemical equation.
//!
//! - [`mesh`]: structured grids and discrete operators.
//! - [`model`]: parameters, nonlinearities and initial data.
//! - [`solver`]: implicit Euler steppers with Newton linearization.
//! - [`diagnostics`]: entropies, dissipation, norms and level sets.
//! - [`harness`]: runs, delta sweeps, blow-up probes and bump studies.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod mesh;
pub mod model;
pub mod solver;

pub use diagnostics::{DiagRecord, DiffNorms};
pub use error::{Error, Result};
pub use harness::{BlowupReport, BumpReport, RunResult, RunSpec, Snapshot, SweepResult, SweepSpec};
pub use mesh::{BoundaryCondition, Bounds, Field, Grid, GridKind, Variable};
pub use model::{InitialData, Params, State};
pub use solver::{NewtonSettings, Scheme, StepOutcome, StepStatus, TimeController};
