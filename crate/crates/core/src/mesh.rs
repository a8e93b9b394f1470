//! Structured finite-volume grids and the discrete calculus on them.
//!
//! Every grid is reduced to the same description: cell measures, cell
//! centers, a list of interior faces (each joining two cells) and a list of
//! boundary faces. The operators below only ever see that description, so
//! rectangle, polar and radial grids share one implementation.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, TripletBuilder};

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Bounds {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridKind {
    Rect { nx: usize, ny: usize, bounds: Bounds },
    Polar { nr: usize, ntheta: usize, radius: f64 },
    Radial { nr: usize, radius: f64 },
}

impl GridKind {
    pub fn name(&self) -> &'static str {
        match self {
            GridKind::Rect { .. } => "rect",
            GridKind::Polar { .. } => "polar",
            GridKind::Radial { .. } => "radial",
        }
    }
}

/// Boundary treatment for a scalar unknown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryCondition {
    /// Zero normal flux.
    #[default]
    Neumann,
    /// Homogeneous Dirichlet, imposed through a mirrored ghost value.
    Dirichlet0,
}

/// Interior face between cells `a < b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub a: usize,
    pub b: usize,
    pub length: f64,
    /// Distance between the two cell centers.
    pub distance: f64,
}

impl Face {
    #[inline]
    pub fn transmissibility(&self) -> f64 {
        self.length / self.distance
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFace {
    pub cell: usize,
    pub length: f64,
    /// Distance from the cell center to the face.
    pub distance: f64,
}

impl BoundaryFace {
    #[inline]
    pub fn transmissibility(&self) -> f64 {
        self.length / self.distance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    kind: GridKind,
    measures: Vec<f64>,
    centers: Vec<[f64; 2]>,
    faces: Vec<Face>,
    boundary: Vec<BoundaryFace>,
}

impl Grid {
    pub fn kind(&self) -> &GridKind {
        &self.kind
    }

    pub fn len(&self) -> usize {
        self.measures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measures.is_empty()
    }

    pub fn measures(&self) -> &[f64] {
        &self.measures
    }

    /// Cell centers in Cartesian coordinates. Radial grids report `(r, 0)`.
    pub fn centers(&self) -> &[[f64; 2]] {
        &self.centers
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn boundary_faces(&self) -> &[BoundaryFace] {
        &self.boundary
    }

    pub fn total_measure(&self) -> f64 {
        self.measures.iter().sum()
    }

    /// Measure of the continuous domain the grid covers.
    pub fn domain_measure(&self) -> f64 {
        match self.kind {
            GridKind::Rect { bounds, .. } => bounds.area(),
            GridKind::Polar { radius, .. } | GridKind::Radial { radius, .. } => PI * radius * radius,
        }
    }

    /// Radial extent for disk grids.
    pub fn radius(&self) -> Option<f64> {
        match self.kind {
            GridKind::Polar { radius, .. } | GridKind::Radial { radius, .. } => Some(radius),
            GridKind::Rect { .. } => None,
        }
    }

    /// Smallest center-to-center spacing; a crude mesh size for reports.
    pub fn min_spacing(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| f.distance)
            .fold(f64::INFINITY, f64::min)
    }

    /// Maximum face-normal spacing, used as the refinement parameter `h`.
    pub fn max_spacing(&self) -> f64 {
        self.faces.iter().map(|f| f.distance).fold(0.0, f64::max)
    }

    /// Half-bandwidth of the cell adjacency under the natural ordering.
    pub fn adjacency_bandwidth(&self) -> usize {
        self.faces.iter().map(|f| f.b - f.a).max().unwrap_or(0)
    }
}

pub fn build_rect(nx: usize, ny: usize, bounds: Bounds) -> Result<Grid> {
    if nx < 2 || ny < 2 {
        return Err(Error::InvalidGrid(format!(
            "rect resolution must be at least 2x2, got {nx}x{ny}"
        )));
    }
    let Bounds { x0, x1, y0, y1 } = bounds;
    if !(x1 > x0 && y1 > y0) || ![x0, x1, y0, y1].iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidGrid(format!("degenerate bounds {bounds:?}")));
    }
    let hx = (x1 - x0) / nx as f64;
    let hy = (y1 - y0) / ny as f64;
    let n = nx * ny;
    let idx = |i: usize, j: usize| j * nx + i;

    let measures = vec![hx * hy; n];
    let mut centers = Vec::with_capacity(n);
    for j in 0..ny {
        for i in 0..nx {
            centers.push([x0 + (i as f64 + 0.5) * hx, y0 + (j as f64 + 0.5) * hy]);
        }
    }

    let mut faces = Vec::with_capacity(2 * n);
    let mut boundary = Vec::with_capacity(2 * (nx + ny));
    for j in 0..ny {
        for i in 0..nx {
            if i + 1 < nx {
                faces.push(Face { a: idx(i, j), b: idx(i + 1, j), length: hy, distance: hx });
            }
            if j + 1 < ny {
                faces.push(Face { a: idx(i, j), b: idx(i, j + 1), length: hx, distance: hy });
            }
            if i == 0 || i == nx - 1 {
                boundary.push(BoundaryFace { cell: idx(i, j), length: hy, distance: 0.5 * hx });
            }
            if j == 0 || j == ny - 1 {
                boundary.push(BoundaryFace { cell: idx(i, j), length: hx, distance: 0.5 * hy });
            }
        }
    }

    Ok(Grid {
        kind: GridKind::Rect { nx, ny, bounds },
        measures,
        centers,
        faces,
        boundary,
    })
}

/// Polar grid on the disk of radius `radius`. Cell `(i, j)` (ring `i`,
/// sector `j`) has index `i * ntheta + j`.
pub fn build_polar(nr: usize, ntheta: usize, radius: f64) -> Result<Grid> {
    if nr < 2 || ntheta < 4 {
        return Err(Error::InvalidGrid(format!(
            "polar resolution needs nr >= 2 and ntheta >= 4, got {nr}x{ntheta}"
        )));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidGrid(format!("radius must be positive, got {radius}")));
    }
    let dr = radius / nr as f64;
    let dtheta = 2.0 * PI / ntheta as f64;
    let n = nr * ntheta;
    let idx = |i: usize, j: usize| i * ntheta + j;
    let edge = |i: usize| i as f64 * dr;

    let mut measures = Vec::with_capacity(n);
    let mut centers = Vec::with_capacity(n);
    for i in 0..nr {
        let (r_in, r_out) = (edge(i), edge(i + 1));
        let rc = 0.5 * (r_in + r_out);
        let area = 0.5 * (r_out * r_out - r_in * r_in) * dtheta;
        for j in 0..ntheta {
            let th = (j as f64 + 0.5) * dtheta;
            measures.push(area);
            centers.push([rc * th.cos(), rc * th.sin()]);
        }
    }

    let mut faces = Vec::with_capacity(2 * n);
    for i in 0..nr {
        let rc = (i as f64 + 0.5) * dr;
        for j in 0..ntheta {
            // angular neighbour, periodic in j
            let jn = (j + 1) % ntheta;
            let (a, b) = (idx(i, j).min(idx(i, jn)), idx(i, j).max(idx(i, jn)));
            faces.push(Face { a, b, length: dr, distance: rc * dtheta });
            // the face at r = 0 has zero length and is omitted
            if i + 1 < nr {
                faces.push(Face {
                    a: idx(i, j),
                    b: idx(i + 1, j),
                    length: edge(i + 1) * dtheta,
                    distance: dr,
                });
            }
        }
    }
    let boundary = (0..ntheta)
        .map(|j| BoundaryFace { cell: idx(nr - 1, j), length: radius * dtheta, distance: 0.5 * dr })
        .collect();

    Ok(Grid {
        kind: GridKind::Polar { nr, ntheta, radius },
        measures,
        centers,
        faces,
        boundary,
    })
}

/// Radially symmetric grid on the disk: one cell per annulus.
pub fn build_radial(nr: usize, radius: f64) -> Result<Grid> {
    if nr < 2 {
        return Err(Error::InvalidGrid(format!("radial grid needs nr >= 2, got {nr}")));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidGrid(format!("radius must be positive, got {radius}")));
    }
    let dr = radius / nr as f64;
    let edge = |i: usize| i as f64 * dr;
    let measures = (0..nr)
        .map(|i| PI * (edge(i + 1).powi(2) - edge(i).powi(2)))
        .collect();
    let centers = (0..nr).map(|i| [(i as f64 + 0.5) * dr, 0.0]).collect();
    let faces = (0..nr - 1)
        .map(|i| Face { a: i, b: i + 1, length: 2.0 * PI * edge(i + 1), distance: dr })
        .collect();
    let boundary = vec![BoundaryFace { cell: nr - 1, length: 2.0 * PI * radius, distance: 0.5 * dr }];
    Ok(Grid {
        kind: GridKind::Radial { nr, radius },
        measures,
        centers,
        faces,
        boundary,
    })
}

/// What a field represents; carried into snapshot headers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variable {
    Rho,
    C,
    V,
    W,
    Other,
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Variable::Rho => "rho",
            Variable::C => "c",
            Variable::V => "v",
            Variable::W => "w",
            Variable::Other => "other",
        };
        f.write_str(s)
    }
}

/// Cell-averaged scalar bound to a grid.
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<f64>,
    tag: Variable,
}

impl Field {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>, tag: Variable) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(tag.to_string()));
        }
        Ok(Self { grid, values, tag })
    }

    pub fn constant(grid: Arc<Grid>, value: f64, tag: Variable) -> Self {
        let n = grid.len();
        Self { grid, values: vec![value; n], tag }
    }

    pub fn zeros(grid: Arc<Grid>, tag: Variable) -> Self {
        Self::constant(grid, 0.0, tag)
    }

    /// Evaluates `f(x, y)` at every cell center.
    pub fn from_fn(grid: Arc<Grid>, tag: Variable, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = grid.centers().iter().map(|&[x, y]| f(x, y)).collect();
        Self::new(grid, values, tag)
    }

    pub(crate) fn from_raw(grid: Arc<Grid>, values: Vec<f64>, tag: Variable) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values, tag }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn tag(&self) -> Variable {
        self.tag
    }

    pub fn with_tag(mut self, tag: Variable) -> Self {
        self.tag = tag;
        self
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_raw(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect(), self.tag)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn same_grid(&self, other: &Field) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub(crate) fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// One value per interior face of a grid, in `Grid::faces` order.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceField {
    values: Vec<f64>,
}

impl FaceField {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.faces().len() {
            return Err(Error::LengthMismatch { expected: grid.faces().len(), got: values.len() });
        }
        Ok(Self { values })
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        Self { values: vec![value; grid.faces().len()] }
    }

    /// Arithmetic mean of the two adjacent cell values.
    pub fn arithmetic_mean(f: &Field) -> Self {
        let v = f.values();
        let values = f.grid().faces().iter().map(|fc| 0.5 * (v[fc.a] + v[fc.b])).collect();
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Midpoint-rule integral `sum f_K |K|`.
pub fn integrate(f: &Field) -> f64 {
    integrate_values(f.grid(), f.values())
}

pub(crate) fn integrate_values(grid: &Grid, values: &[f64]) -> f64 {
    values.iter().zip(grid.measures()).map(|(v, m)| v * m).sum()
}

/// Net flux `sum_sigma T (f_nb - f_K)` into every cell, including the
/// boundary contribution for the chosen condition. Not divided by `|K|`.
pub(crate) fn laplacian_flux(grid: &Grid, f: &[f64], bc: BoundaryCondition, out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for face in grid.faces() {
        let q = face.transmissibility() * (f[face.b] - f[face.a]);
        out[face.a] += q;
        out[face.b] -= q;
    }
    if bc == BoundaryCondition::Dirichlet0 {
        for bf in grid.boundary_faces() {
            out[bf.cell] -= bf.transmissibility() * f[bf.cell];
        }
    }
}

pub(crate) fn laplacian_values(grid: &Grid, f: &[f64], bc: BoundaryCondition) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    laplacian_flux(grid, f, bc, &mut out);
    for (o, m) in out.iter_mut().zip(grid.measures()) {
        *o /= m;
    }
    out
}

/// Second-order finite-volume Laplacian.
pub fn laplacian(f: &Field, bc: BoundaryCondition) -> Field {
    let values = laplacian_values(f.grid(), f.values(), bc);
    Field::from_raw(f.grid().clone(), values, f.tag())
}

/// Sparse matrix of `laplacian(., bc)`, rows already divided by `|K|`.
pub fn laplacian_matrix(grid: &Grid, bc: BoundaryCondition) -> CsrMatrix {
    let n = grid.len();
    let mut t = TripletBuilder::new(n, n);
    let m = grid.measures();
    for face in grid.faces() {
        let tr = face.transmissibility();
        t.push(face.a, face.a, -tr / m[face.a]);
        t.push(face.a, face.b, tr / m[face.a]);
        t.push(face.b, face.b, -tr / m[face.b]);
        t.push(face.b, face.a, tr / m[face.b]);
    }
    if bc == BoundaryCondition::Dirichlet0 {
        for bf in grid.boundary_faces() {
            t.push(bf.cell, bf.cell, -bf.transmissibility() / m[bf.cell]);
        }
    }
    for i in 0..n {
        t.push(i, i, 0.0);
    }
    t.build()
}

/// Divergence of `d grad u - chi u grad phi` with zero flux through the
/// boundary. `chi u` is averaged arithmetically onto faces.
pub fn div_flux(diffusivity: &FaceField, u: &Field, drift_potential: &Field, chi: &Field) -> Result<Field> {
    u.check_same_grid(drift_potential)?;
    u.check_same_grid(chi)?;
    let grid = u.grid();
    if diffusivity.values().len() != grid.faces().len() {
        return Err(Error::LengthMismatch { expected: grid.faces().len(), got: diffusivity.values().len() });
    }
    let (uv, pv, cv) = (u.values(), drift_potential.values(), chi.values());
    let mut out = vec![0.0; grid.len()];
    for (face, d) in grid.faces().iter().zip(diffusivity.values()) {
        let (a, b) = (face.a, face.b);
        let mobility = 0.5 * (cv[a] * uv[a] + cv[b] * uv[b]);
        let q = face.transmissibility() * (d * (uv[b] - uv[a]) - mobility * (pv[b] - pv[a]));
        out[a] += q;
        out[b] -= q;
    }
    for (o, m) in out.iter_mut().zip(grid.measures()) {
        *o /= m;
    }
    Ok(Field::from_raw(grid.clone(), out, u.tag()))
}

/// Discrete `int |grad f|^2` over interior faces.
pub fn gradient_sq_integral(f: &Field) -> f64 {
    gradient_sq_values(f.grid(), f.values())
}

pub(crate) fn gradient_sq_values(grid: &Grid, f: &[f64]) -> f64 {
    grid.faces()
        .iter()
        .map(|face| {
            let d = f[face.b] - f[face.a];
            face.transmissibility() * d * d
        })
        .sum()
}
