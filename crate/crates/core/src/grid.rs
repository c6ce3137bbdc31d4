//! Uniform cell-centered grids on the cube `[-L, L]^n` and fields on them.
//!
//! Node `k` on each axis sits at `(k + 1/2) h - L` with `h = 2L / N`. With `N`
//! even no node lands on the origin, which keeps radial quantities such as
//! `1/r` finite at every node. Values are stored row-major: axis 0 varies
//! slowest.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 6;

/// Coordinates of a point, padded with zeros past the grid dimension.
pub type Point = [f64; MAX_DIM];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    extent: f64,
    points: usize,
}

impl Grid {
    pub fn new(dim: usize, extent: f64, points: usize) -> Result<Self> {
        if dim < 3 {
            return Err(Error::DimensionTooLow(dim));
        }
        if dim > MAX_DIM {
            return Err(Error::DimensionTooHigh(dim));
        }
        if points == 0 || points % 2 != 0 {
            return Err(Error::OddPoints(points));
        }
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::InvalidExtent(extent));
        }
        Ok(Self {
            dim,
            extent,
            points,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Half-width `L` of the box.
    pub fn extent(&self) -> f64 {
        self.extent
    }

    /// Points per axis `N`.
    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.extent / self.points as f64
    }

    /// Total number of nodes `N^n`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `h^n`, the quadrature weight of one node.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn axis_coord(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.spacing() - self.extent
    }

    /// Flat-index distance between neighbours along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.points.pow((self.dim - 1 - axis) as u32)
    }

    pub fn axis_index(&self, idx: usize, axis: usize) -> usize {
        (idx / self.stride(axis)) % self.points
    }

    pub fn multi_index(&self, mut idx: usize) -> [usize; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        for a in (0..self.dim).rev() {
            out[a] = idx % self.points;
            idx /= self.points;
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi[..self.dim]
            .iter()
            .fold(0, |acc, &k| acc * self.points + k)
    }

    pub fn position(&self, idx: usize) -> Point {
        let multi = self.multi_index(idx);
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.dim {
            x[a] = self.axis_coord(multi[a]);
        }
        x
    }

    pub fn radius(&self, idx: usize) -> f64 {
        norm(&self.position(idx)[..self.dim])
    }

    /// Neighbour of `idx` one step along `axis`, or `None` past the box.
    pub fn neighbor(&self, idx: usize, axis: usize, forward: bool) -> Option<usize> {
        let k = self.axis_index(idx, axis);
        if forward {
            (k + 1 < self.points).then(|| idx + self.stride(axis))
        } else {
            (k > 0).then(|| idx - self.stride(axis))
        }
    }

    /// True when the node lies within `width` cells of the box faces.
    pub fn in_boundary_layer(&self, idx: usize, width: usize) -> bool {
        let multi = self.multi_index(idx);
        multi[..self.dim]
            .iter()
            .any(|&k| k < width || k + width >= self.points)
    }

    /// Default boundary-layer width used for leakage monitoring.
    pub fn boundary_width(&self) -> usize {
        (self.points / 20).max(2)
    }

    /// Riemann sum `h^n Σ f_i w_i`.
    pub fn integrate(&self, f: &ScalarField, w: &ScalarField) -> Result<f64> {
        self.check(f.grid())?;
        self.check(w.grid())?;
        let (f, w) = (f.values(), w.values());
        Ok(self.cell_volume() * par::sum_by(self.len(), |i| f[i] * w[i]))
    }

    /// Approximates `∫_{|x|=R} f dσ` by binning nodes with `| |x| - R | < h/2`.
    pub fn shell_integral(&self, f: &ScalarField, radius: f64) -> Result<f64> {
        self.check(f.grid())?;
        let h = self.spacing();
        if !(radius > h / 2.0 && radius < self.extent) {
            return Err(Error::RadiusOutOfRange {
                radius,
                min: h / 2.0,
                max: self.extent,
            });
        }
        let lo = radius - h / 2.0;
        let hi = radius + h / 2.0;
        let values = f.values();
        let count = par::sum_by(self.len(), |i| {
            let r = self.radius(i);
            if r >= lo && r < hi {
                1.0
            } else {
                0.0
            }
        });
        if count == 0.0 {
            return Err(Error::EmptyShell(radius));
        }
        let sum = par::sum_by(self.len(), |i| {
            let r = self.radius(i);
            if r >= lo && r < hi {
                values[i]
            } else {
                0.0
            }
        });
        Ok(sum * self.cell_volume() / h)
    }

    /// The unit radial field `x/|x|`.
    pub fn radial_unit_field(&self) -> VectorField {
        let n = self.dim;
        let mut values = vec![0.0; self.len() * n];
        values.chunks_mut(n).enumerate().for_each(|(i, slot)| {
            let x = self.position(i);
            let r = norm(&x[..n]);
            for a in 0..n {
                slot[a] = x[a] / r;
            }
        });
        VectorField {
            grid: *self,
            values,
        }
    }

    /// Samples `f` at every node.
    pub fn scalar_field<F>(&self, f: F) -> ScalarField
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let mut values = vec![0.0; self.len()];
        par::fill(&mut values, |i| f(&self.position(i)[..self.dim]));
        ScalarField {
            grid: *self,
            values,
        }
    }

    pub fn complex_field<F>(&self, f: F) -> ComplexField
    where
        F: Fn(&[f64]) -> Complex64 + Sync,
    {
        let mut values = vec![Complex64::new(0.0, 0.0); self.len()];
        par::fill(&mut values, |i| f(&self.position(i)[..self.dim]));
        ComplexField {
            grid: *self,
            values,
        }
    }

    /// Cell averages `h^{-n} ∫_cell w(|x|) dx` of a radial weight.
    ///
    /// Tensor Gauss-Legendre rules are used on each cell. Cells close to the
    /// origin are subdivided, and the cells touching the origin are refined
    /// recursively towards it, so weights like `|x|^{-2}` are integrated
    /// accurately instead of being sampled at the node.
    pub fn radial_cell_average<F>(&self, w: F) -> ScalarField
    where
        F: Fn(f64) -> f64 + Sync,
    {
        let h = self.spacing();
        let n = self.dim;
        let mut values = vec![0.0; self.len()];
        par::fill(&mut values, |i| {
            let c = self.position(i);
            let near = norm(&c[..n]) < 3.0 * h;
            let touches = c[..n].iter().all(|x| (x.abs() - h / 2.0).abs() < 1e-12 * h);
            let integral = if touches {
                let mut corner = [0.0; MAX_DIM];
                let mut sign = [1.0; MAX_DIM];
                for a in 0..n {
                    sign[a] = c[a].signum();
                    corner[a] = 0.0;
                }
                origin_cell_integral(n, &sign, &corner, h, &w, 0)
            } else if near {
                subdivided_integral(n, &c, h, 3, &w)
            } else {
                gauss_cell_integral(n, &c, h, &w)
            };
            integral / self.cell_volume()
        });
        ScalarField {
            grid: *self,
            values,
        }
    }

    pub(crate) fn check(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

const GAUSS_NODES: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GAUSS_WEIGHTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

/// Tensor 3-point Gauss rule for `∫ w(|x|)` over the cube of side `h` centered at `c`.
fn gauss_cell_integral<F: Fn(f64) -> f64>(n: usize, c: &Point, h: f64, w: &F) -> f64 {
    let total = 3usize.pow(n as u32);
    let mut sum = 0.0;
    for q in 0..total {
        let mut rest = q;
        let mut weight = 1.0;
        let mut r2 = 0.0;
        for a in 0..n {
            let j = rest % 3;
            rest /= 3;
            let x = c[a] + 0.5 * h * GAUSS_NODES[j];
            r2 += x * x;
            weight *= GAUSS_WEIGHTS[j];
        }
        sum += weight * w(r2.sqrt());
    }
    sum * (0.5 * h).powi(n as i32)
}

fn subdivided_integral<F: Fn(f64) -> f64>(n: usize, c: &Point, h: f64, parts: usize, w: &F) -> f64 {
    let sub = h / parts as f64;
    let total = parts.pow(n as u32);
    let mut sum = 0.0;
    for q in 0..total {
        let mut rest = q;
        let mut center = [0.0; MAX_DIM];
        for a in 0..n {
            let j = rest % parts;
            rest /= parts;
            center[a] = c[a] - h / 2.0 + (j as f64 + 0.5) * sub;
        }
        sum += gauss_cell_integral(n, &center, sub, w);
    }
    sum
}

/// Integral over the cube with one corner at the origin, extending `h` in
/// the directions given by `sign`. The sub-cube at the origin is refined
/// recursively; the rest use Gauss rules.
fn origin_cell_integral<F: Fn(f64) -> f64>(
    n: usize,
    sign: &[f64; MAX_DIM],
    corner: &Point,
    h: f64,
    w: &F,
    depth: usize,
) -> f64 {
    const MAX_DEPTH: usize = 40;
    let half = h / 2.0;
    let mut sum = 0.0;
    for q in 1..(1usize << n) {
        let mut center = [0.0; MAX_DIM];
        for a in 0..n {
            let bit = ((q >> a) & 1) as f64;
            center[a] = corner[a] + sign[a] * (bit + 0.5) * half;
        }
        sum += subdivided_integral(n, &center, half, 2, w);
    }
    if depth < MAX_DEPTH {
        sum += origin_cell_integral(n, sign, corner, half, w, depth + 1);
    }
    sum
}

/// Real scalar values at grid nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        check_len(&grid, values.len(), 1)?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `n`-component real vectors at grid nodes, stored node-major.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: Grid,
    values: Vec<f64>,
}

impl VectorField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        check_len(&grid, values.len(), grid.dim())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i / grid.dim()));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, idx: usize) -> &[f64] {
        let n = self.grid.dim();
        &self.values[idx * n..(idx + 1) * n]
    }

    /// Largest Euclidean norm over the nodes.
    pub fn max_norm(&self) -> f64 {
        self.values
            .chunks(self.grid.dim())
            .fold(0.0, |m, v| m.max(norm(v)))
    }
}

/// Complex values at grid nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    grid: Grid,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        check_len(&grid, values.len(), 1)?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// `h^n Σ conj(u_i) v_i`.
    pub fn inner(&self, other: &ComplexField) -> Result<Complex64> {
        self.grid.check(&other.grid)?;
        Ok(par::dot(&self.values, &other.values) * self.grid.cell_volume())
    }

    pub fn norm_sqr(&self) -> f64 {
        par::norm_sqr(&self.values) * self.grid.cell_volume()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Discrete L² distance.
    pub fn distance(&self, other: &ComplexField) -> Result<f64> {
        self.grid.check(&other.grid)?;
        let (a, b) = (&self.values, &other.values);
        let s = par::sum_by(a.len(), |i| (a[i] - b[i]).norm_sqr());
        Ok((s * self.grid.cell_volume()).sqrt())
    }

    pub fn density(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|v| v.norm_sqr()).collect(),
        }
    }

    pub fn scaled(&self, factor: Complex64) -> ComplexField {
        ComplexField {
            grid: self.grid,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Fraction of `‖u‖²` carried by nodes within `width` cells of the faces.
    pub fn boundary_fraction(&self, width: usize) -> f64 {
        let total = par::norm_sqr(&self.values);
        if total == 0.0 {
            return 0.0;
        }
        let layer = par::sum_by(self.values.len(), |i| {
            if self.grid.in_boundary_layer(i, width) {
                self.values[i].norm_sqr()
            } else {
                0.0
            }
        });
        layer / total
    }
}

/// `n`-component complex vectors at grid nodes, stored node-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexVectorField {
    grid: Grid,
    values: Vec<Complex64>,
}

impl ComplexVectorField {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        check_len(&grid, values.len(), grid.dim())?;
        if let Some(i) = values
            .iter()
            .position(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(Error::NonFinite(i / grid.dim()));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len() * grid.dim());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn at(&self, idx: usize) -> &[Complex64] {
        let n = self.grid.dim();
        &self.values[idx * n..(idx + 1) * n]
    }

    /// Nodewise `Σ_j |v_j|²`.
    pub fn norm_sqr_density(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self
                .values
                .chunks(self.grid.dim())
                .map(|v| v.iter().map(|c| c.norm_sqr()).sum())
                .collect(),
        }
    }
}

fn check_len(grid: &Grid, got: usize, components: usize) -> Result<()> {
    let expected = grid.len() * components;
    if got == expected {
        Ok(())
    } else {
        Err(Error::FieldLength { expected, got })
    }
}
