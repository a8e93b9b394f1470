use std::sync::Arc;

use kscross_core::mesh::{build_polar, build_rect, BoundaryCondition, Bounds, Field, Grid, Variable};
use kscross_core::model::{Params, State};
use kscross_core::solver::{step_jacobians, Scheme};

fn old_state(grid: &Arc<Grid>) -> State {
    State::new(
        Field::from_fn(grid.clone(), Variable::Rho, |x, y| 1.5 + 0.4 * (2.0 * x).sin() * (1.0 + y)).unwrap(),
        Field::from_fn(grid.clone(), Variable::C, |x, y| 0.8 + 0.3 * (x * y).cos()).unwrap(),
        0.0,
    )
    .unwrap()
}

/// Unknowns of `scheme` for a perturbed copy of `old`.
fn unknowns(scheme: Scheme, old: &State, p: &Params) -> Vec<f64> {
    let d = p.delta;
    old.rho
        .values()
        .iter()
        .zip(old.c.values())
        .enumerate()
        .flat_map(|(k, (&r, &c))| {
            let r = r * (1.0 + 0.05 * (k as f64).sin());
            let c = c + 0.1 * (0.7 * k as f64).cos();
            let elliptic = p.eps == 0;
            let first = if scheme == Scheme::Log { d * r.ln() } else { r };
            let second = if elliptic { c + d * r } else { c };
            [first, second]
        })
        .collect()
}

fn check(scheme: Scheme, grid: Arc<Grid>, p: Params) {
    let old = old_state(&grid);
    let x = unknowns(scheme, &old, &p);
    let (a, f) = step_jacobians(scheme, &x, &old, 1e-2, &p).unwrap();
    let mut worst: f64 = 0.0;
    for (ra, rf) in a.iter().zip(&f) {
        for (va, vf) in ra.iter().zip(rf) {
            worst = worst.max((va - vf).abs() / vf.abs().max(1.0));
        }
    }
    assert!(worst <= 1e-5, "{scheme} {p:?}: relative mismatch {worst:e}");
}

#[test]
fn analytic_jacobian_matches_differences() {
    let rect = Arc::new(build_rect(4, 3, Bounds::new(0.0, 1.0, 0.0, 1.0)).unwrap());
    let polar = Arc::new(build_polar(3, 6, 1.0).unwrap());
    let cases = [
        (Scheme::Pp, Params::new(0.1, 1, 1.0).unwrap()),
        (Scheme::Pp, Params::new(0.1, 1, 1.7).unwrap()),
        (Scheme::Pp, Params::new(0.3, 1, 2.5).unwrap()),
        (Scheme::Pe, Params::new(0.1, 0, 1.3).unwrap()),
        (Scheme::Log, Params::new(0.1, 0, 1.0).unwrap()),
        (Scheme::Log, Params::new(0.1, 1, 1.5).unwrap()),
        (Scheme::Log, Params::new(0.1, 0, 1.0).unwrap().with_eta(0.3)),
    ];
    for grid in [rect, polar] {
        for (scheme, p) in cases {
            check(scheme, grid.clone(), p);
            check(scheme, grid.clone(), p.with_c_boundary(BoundaryCondition::Dirichlet0));
        }
    }
}
