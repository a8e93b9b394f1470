//! Entropies, dissipation integrals, the discrete entropy monitor, difference
//! norms and bump geometry.

use crate::error::{Error, Result};
use crate::mesh::{gradient_sq_values, integrate_values, laplacian_values, BoundaryCondition, Field, GridKind};
use crate::model::{production, Params, State};

/// Diagnostics of one time level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagRecord {
    pub t: f64,
    pub mass: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub h1: f64,
    pub h2p: f64,
    pub h3p: f64,
    pub diss_sqrt: f64,
    pub diss_grad: f64,
    /// NaN for the initial record, which has no previous level.
    pub entropy_residual: f64,
    pub clamped: bool,
}

impl DiagRecord {
    pub fn new(state: &State, prev: Option<(&State, f64)>, p: &Params) -> Self {
        let rho = &state.rho;
        let (diss_sqrt, diss_grad) = dissipation_terms(rho, p.delta);
        let entropy_residual = match prev {
            Some((old, dt)) => entropy_residual_H1(state, old, dt, p),
            None => f64::NAN,
        };
        Self {
            t: state.t,
            mass: integrate_values(rho.grid(), rho.values()),
            rho_min: rho.min(),
            rho_max: rho.max(),
            h1: entropy_H1(rho),
            h2p: hp(rho, 2),
            h3p: hp(rho, 3),
            diss_sqrt,
            diss_grad,
            entropy_residual,
            clamped: rho.values().iter().any(|&r| r < 0.0),
        }
    }
}

fn h_entropy(r: f64) -> f64 {
    if r > 0.0 {
        r * (r.ln() - 1.0)
    } else {
        0.0
    }
}

/// `sum rho (log rho - 1) |K|` with `0 log 0 = 0`; nonpositive values count as 0.
#[allow(non_snake_case)]
pub fn entropy_H1(rho: &Field) -> f64 {
    rho.values().iter().zip(rho.grid().measures()).map(|(&r, m)| h_entropy(r) * m).sum()
}

fn hp(rho: &Field, p: i32) -> f64 {
    rho.values().iter().zip(rho.grid().measures()).map(|(r, m)| r.powi(p) * m).sum()
}

/// `sum rho^p |K|` for `p` in `{2, 3}`.
#[allow(non_snake_case)]
pub fn entropy_Hp(rho: &Field, p: u32) -> Result<f64> {
    match p {
        2 | 3 => Ok(hp(rho, p as i32)),
        _ => Err(Error::InvalidParameter(format!("H_p is defined for p = 2 or 3, got {p}"))),
    }
}

/// `(4 int |grad sqrt(rho)|^2, delta int |grad rho|^2)`.
pub fn dissipation_terms(rho: &Field, delta: f64) -> (f64, f64) {
    let g = rho.grid();
    let sq: Vec<f64> = rho.values().iter().map(|r| r.max(0.0).sqrt()).collect();
    let grad = if delta == 0.0 { 0.0 } else { delta * gradient_sq_values(g, rho.values()) };
    (4.0 * gradient_sq_values(g, &sq), grad)
}

/// Right side `int (delta rho^2 + rho^(alpha + 1))` of the entropy inequality.
pub fn entropy_rhs(rho: &Field, p: &Params) -> f64 {
    rho.values()
        .iter()
        .zip(rho.grid().measures())
        .map(|(&r, m)| (p.delta * r * r + production(r, p.alpha + 1.0)) * m)
        .sum()
}

/// Left minus right side of the discrete entropy inequality between two
/// levels. With `eta > 0` the regularization terms of the log scheme are
/// added to the left side.
#[allow(non_snake_case)]
pub fn entropy_residual_H1(new: &State, old: &State, dt: f64, p: &Params) -> f64 {
    let rho = &new.rho;
    let (ds, dg) = dissipation_terms(rho, p.delta);
    let mut lhs = (entropy_H1(rho) - entropy_H1(&old.rho)) / dt + ds + dg;
    if p.eta > 0.0 && p.delta > 0.0 {
        lhs += eta_dissipation(rho, p);
    }
    lhs - entropy_rhs(rho, p)
}

fn eta_dissipation(rho: &Field, p: &Params) -> f64 {
    let g = rho.grid();
    let m = g.measures();
    let d = p.delta;
    let w: Vec<f64> = rho.values().iter().map(|r| d * r.max(f64::MIN_POSITIVE).ln()).collect();
    let lw = laplacian_values(g, &w, BoundaryCondition::Neumann);
    let bilap: f64 = lw.iter().zip(m).map(|(l, m)| l * l * m).sum();
    let quartic: f64 = g
        .faces()
        .iter()
        .map(|f| {
            let dw = w[f.b] - w[f.a];
            f.transmissibility() * dw.powi(4) / (f.distance * f.distance)
        })
        .sum();
    let zeroth: f64 = w.iter().zip(rho.values()).zip(m).map(|((w, r), m)| w * w * r * m).sum();
    p.eta / d * (bilap + quartic / (d * d) + zeroth)
}

/// Squared discrete norms, cumulative so that `l2 <= h1 <= h2`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DiffNorms {
    pub l2: f64,
    pub h1: f64,
    pub h2: f64,
}

impl std::ops::Add for DiffNorms {
    type Output = DiffNorms;

    fn add(self, o: DiffNorms) -> DiffNorms {
        DiffNorms { l2: self.l2 + o.l2, h1: self.h1 + o.h1, h2: self.h2 + o.h2 }
    }
}

/// `l2 = int f^2`, `h1 = l2 + int |grad f|^2`, `h2 = h1 + int (lap f)^2`,
/// with the Neumann Laplacian.
pub fn discrete_h2_norms(f: &Field) -> DiffNorms {
    let g = f.grid();
    let v = f.values();
    let l2: f64 = v.iter().zip(g.measures()).map(|(x, m)| x * x * m).sum();
    let h1 = l2 + gradient_sq_values(g, v);
    let lap = laplacian_values(g, v, BoundaryCondition::Neumann);
    let h2 = h1 + lap.iter().zip(g.measures()).map(|(x, m)| x * x * m).sum::<f64>();
    DiffNorms { l2, h1, h2 }
}

/// `int |grad lap f|^2`.
pub fn grad_laplacian_seminorm(f: &Field) -> f64 {
    let g = f.grid();
    let lap = laplacian_values(g, f.values(), BoundaryCondition::Neumann);
    gradient_sq_values(g, &lap)
}

/// Outermost radius where the piecewise-linear profile through the cell
/// centers crosses `level`. `R` if the outermost cell is still at or above
/// `level`, 0 if no cell reaches it.
pub fn level_set_radius(rho: &Field, level: f64) -> Result<f64> {
    let GridKind::Radial { radius, .. } = *rho.grid().kind() else {
        return Err(Error::NotRadial);
    };
    let v = rho.values();
    let c = rho.grid().centers();
    let Some(i) = v.iter().rposition(|&x| x >= level) else {
        return Ok(0.0);
    };
    if i + 1 == v.len() {
        return Ok(radius);
    }
    let (r0, r1) = (c[i][0], c[i + 1][0]);
    let s = (v[i] - level) / (v[i] - v[i + 1]);
    Ok(r0 + s * (r1 - r0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_polar, build_radial, build_rect, gradient_sq_integral, Bounds, Grid, Variable};
    use std::f64::consts::{E, PI};
    use std::sync::Arc;

    fn disk() -> Arc<Grid> {
        Arc::new(build_polar(20, 32, 1.0).unwrap())
    }

    #[test]
    fn h1_of_constants() {
        let g = disk();
        assert!((entropy_H1(&Field::constant(g.clone(), 1.0, Variable::Rho)) + PI).abs() < 1e-12);
        assert!(entropy_H1(&Field::constant(g.clone(), E, Variable::Rho)).abs() < 1e-12);
        assert_eq!(entropy_H1(&Field::zeros(g.clone(), Variable::Rho)), 0.0);
        let r: f64 = 3.7;
        let h = entropy_H1(&Field::constant(g, r, Variable::Rho));
        assert!((h - PI * r * (r.ln() - 1.0)).abs() < 1e-12 * h.abs());
    }

    #[test]
    fn hp_values() {
        let g = Arc::new(build_rect(4, 4, Bounds::new(0.0, 1.0, 0.0, 1.0)).unwrap());
        assert!((entropy_Hp(&Field::constant(g.clone(), 2.0, Variable::Rho), 2).unwrap() - 4.0).abs() < 1e-14);
        assert_eq!(entropy_Hp(&Field::zeros(g.clone(), Variable::Rho), 3).unwrap(), 0.0);
        assert!(entropy_Hp(&Field::zeros(g, Variable::Rho), 4).is_err());
    }

    #[test]
    fn residual_of_constant_state() {
        let g = disk();
        let p = Params::new(0.1, 0, 1.5).unwrap();
        let rb: f64 = 2.0;
        let s = State::new(Field::constant(g.clone(), rb, Variable::Rho), Field::constant(g, 1.0, Variable::C), 0.0)
            .unwrap();
        let r = entropy_residual_H1(&s, &s, 1e-3, &p);
        let expected = -PI * (0.1 * rb * rb + rb.powf(2.5));
        assert!((r - expected).abs() < 1e-10 * expected.abs());
    }

    #[test]
    fn dissipation_of_square() {
        let n = 64;
        let g = Arc::new(build_rect(n, n, Bounds::new(0.0, 1.0, 0.0, 1.0)).unwrap());
        let f = Field::from_fn(g.clone(), Variable::Rho, |x, _| x * x).unwrap();
        let (ds, dg) = dissipation_terms(&f, 0.0);
        // interior faces only: the two boundary half cells are missing
        assert!((ds - 4.0 * (n - 1) as f64 / n as f64).abs() < 1e-10);
        assert_eq!(dg, 0.0);
        let c = Field::constant(g, 3.0, Variable::Rho);
        assert_eq!(dissipation_terms(&c, 0.5), (0.0, 0.0));
    }

    #[test]
    fn norms_of_simple_fields() {
        let g = disk();
        let z = discrete_h2_norms(&Field::zeros(g.clone(), Variable::Other));
        assert_eq!(z, DiffNorms::default());
        let c = discrete_h2_norms(&Field::constant(g, 2.0, Variable::Other));
        assert!((c.l2 - 4.0 * PI).abs() < 1e-12);
        assert_eq!(c.l2, c.h1);
        assert_eq!(c.h1, c.h2);
    }

    #[test]
    fn laplacian_norm_of_cosine() {
        // cos(pi x) satisfies the Neumann condition; int (lap f)^2 = pi^4 / 2
        let mut errs = vec![];
        for n in [16, 32, 64] {
            let g = Arc::new(build_rect(n, n, Bounds::new(0.0, 1.0, 0.0, 1.0)).unwrap());
            let f = Field::from_fn(g, Variable::Other, |x, _| (PI * x).cos()).unwrap();
            let nm = discrete_h2_norms(&f);
            let lap_sq = nm.h2 - nm.h1;
            errs.push((lap_sq - PI.powi(4) / 2.0).abs());
        }
        assert!(errs[0] / (PI.powi(4) / 2.0) < 1e-2);
        let order = (errs[1] / errs[2]).log2();
        assert!(order > 1.8, "{errs:?}");
    }

    #[test]
    fn level_set_examples() {
        let g = Arc::new(build_radial(200, 1.0).unwrap());
        let flat = Field::constant(g.clone(), 2e-2, Variable::Rho);
        assert_eq!(level_set_radius(&flat, 1e-2).unwrap(), 1.0);

        let step = Field::from_fn(g.clone(), Variable::Rho, |r, _| if r < 0.3 { 1.0 } else { 0.0 }).unwrap();
        assert!((level_set_radius(&step, 1e-2).unwrap() - 0.3).abs() <= 1.0 / 200.0);

        let th: f64 = 0.01;
        let gauss = Field::from_fn(g.clone(), Variable::Rho, |r, _| (-r * r / (2.0 * th)).exp()).unwrap();
        for level in [1e-2, 1e-1, 0.5] {
            let exact = (-2.0 * th * f64::ln(level)).sqrt();
            assert!((level_set_radius(&gauss, level).unwrap() - exact).abs() < 2e-3);
        }
        let low = Field::zeros(g, Variable::Rho);
        assert_eq!(level_set_radius(&low, 1e-2).unwrap(), 0.0);

        let polar = Field::zeros(disk(), Variable::Rho);
        assert_eq!(level_set_radius(&polar, 1e-2), Err(Error::NotRadial));
    }

    #[test]
    fn seminorm_of_linear_is_zero_inside() {
        let g = Arc::new(build_rect(8, 8, Bounds::new(0.0, 1.0, 0.0, 1.0)).unwrap());
        let f = Field::constant(g.clone(), 1.0, Variable::Other);
        assert_eq!(grad_laplacian_seminorm(&f), 0.0);
        let q = Field::from_fn(g, Variable::Other, |x, y| x * y).unwrap();
        assert!(gradient_sq_integral(&q) > 0.0);
    }
}
