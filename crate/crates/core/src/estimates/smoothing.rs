use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid, ScalarField};
use crate::operators::{
    assemble_hamiltonian, covariant_gradient, radial_tangential_split, SobolevScale,
};
use crate::par;
use crate::potentials::PotentialSpec;
use crate::solver::Trajectory;

/// One radius of the smoothing functional, time-integrated over the trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EstimateRow {
    pub radius: f64,
    /// `∫∫ R^{n-1} |∇_A u|² / (R ∨ r)^n`
    pub term_grad: f64,
    /// `∫∫ |∇_A^T u|² / r`
    pub term_tan: f64,
    /// `∫∫ |u|² / r³`, only for `n ≥ 4`.
    pub term_u3: Option<f64>,
    /// `R⁻² ∫∫_{|x|=R} |u|²` for `n ≥ 4`, `R⁻³ ∫∫_{|x|≤R} |u|²` for `n = 3`.
    pub term_surface: f64,
    /// For `n = 3`, the surface form `R⁻² ∫∫_{|x|=R} |u|²` for comparison.
    pub term_surface_alt: Option<f64>,
    pub lhs_total: f64,
    pub rhs_norm2: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateReport {
    pub rows: Vec<EstimateRow>,
    /// Sobolev index `s` of the right-hand side `‖f‖²_{ℋ^s}`.
    pub rhs_exponent: f64,
    pub rhs_norm2: f64,
    pub sup_ratio: f64,
    pub min_ratio: f64,
    /// `sup_ratio / min_ratio` is finite.
    pub uniform_in_r: bool,
}

/// Dyadic radii `2^{-2}, …, 2^3` inside `(h/2, L)`.
pub fn default_radii(g: &Grid) -> Vec<f64> {
    (-2..=3)
        .map(|k| 2f64.powi(k))
        .filter(|&r| r > g.spacing() / 2.0 && r < g.extent())
        .collect()
}

/// Per-snapshot densities that the functional needs for every radius.
struct SnapshotData {
    /// Link-based `|∇_A u|²` per node.
    grad: Vec<f64>,
    density: Vec<f64>,
    tan: f64,
    u3: f64,
}

struct Prepared {
    grid: Grid,
    times: Vec<f64>,
    data: Vec<SnapshotData>,
}

fn prepare(traj: &Trajectory, spec: &PotentialSpec) -> Result<Prepared> {
    let g = *traj.grid();
    let n = g.dim();
    let w = g.cell_volume();
    let inv_r = g.radial_cell_average(|r| 1.0 / r).into_values();
    let inv_r3 = (n >= 4).then(|| g.radial_cell_average(|r| r.powi(-3)).into_values());
    let mut data = Vec::with_capacity(traj.snapshots().len());
    let mut cached: Option<(f64, crate::operators::DiscreteHamiltonian)> = None;
    for (u, &t) in traj.snapshots().iter().zip(traj.times()) {
        let time = if spec.is_static() { 0.0 } else { t };
        if cached.as_ref().is_none_or(|(ct, _)| *ct != time) {
            cached = Some((time, assemble_hamiltonian(spec, time, &g)));
        }
        let h = &cached.as_ref().expect("assembled above").1;
        let grad = h.gradient_density(u)?;
        let (_, tangential) = radial_tangential_split(&covariant_gradient(u, spec, time), &g)?;
        let tan = w * par::sum_by(g.len(), |i| {
            inv_r[i] * tangential.at(i).iter().map(|c| c.norm_sqr()).sum::<f64>()
        });
        let density = u.density().into_values();
        let u3 = match &inv_r3 {
            Some(wt) => w * par::sum_by(g.len(), |i| wt[i] * density[i]),
            None => 0.0,
        };
        data.push(SnapshotData {
            grad,
            density,
            tan,
            u3,
        });
    }
    Ok(Prepared {
        grid: g,
        times: traj.times().to_vec(),
        data,
    })
}

/// Trapezoid rule over the snapshot times.
pub(crate) fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

impl Prepared {
    fn row(&self, radius: f64) -> Result<EstimateRow> {
        let g = &self.grid;
        let n = g.dim();
        if !(radius > g.spacing() / 2.0 && radius < g.extent()) {
            return Err(Error::RadiusOutOfRange {
                radius,
                min: g.spacing() / 2.0,
                max: g.extent(),
            });
        }
        let w = g.cell_volume();
        let weight = |r: f64| radius.powi(n as i32 - 1) / radius.max(r).powi(n as i32);
        let grad_weight: Vec<f64> = (0..g.len()).map(|i| weight(g.radius(i))).collect();
        let ball = (n == 3).then(|| {
            g.radial_cell_average(|r| if r <= radius { 1.0 } else { 0.0 })
                .into_values()
        });

        let mut grad = Vec::with_capacity(self.data.len());
        let mut tan = Vec::with_capacity(self.data.len());
        let mut u3 = Vec::with_capacity(self.data.len());
        let mut surface = Vec::with_capacity(self.data.len());
        let mut shell = Vec::with_capacity(self.data.len());
        for d in &self.data {
            grad.push(w * par::sum_by(g.len(), |i| grad_weight[i] * d.grad[i]));
            tan.push(d.tan);
            u3.push(d.u3);
            let dens = ScalarField::new(*g, d.density.clone())?;
            let on_shell = g.shell_integral(&dens, radius)? / (radius * radius);
            match &ball {
                Some(b) => {
                    surface
                        .push(w * par::sum_by(g.len(), |i| b[i] * d.density[i]) / radius.powi(3));
                    shell.push(on_shell);
                }
                None => surface.push(on_shell),
            }
        }
        let term_grad = trapezoid(&self.times, &grad);
        let term_tan = trapezoid(&self.times, &tan);
        let term_u3 = (n >= 4).then(|| trapezoid(&self.times, &u3));
        let term_surface = trapezoid(&self.times, &surface);
        let term_surface_alt = (n == 3).then(|| trapezoid(&self.times, &shell));
        let lhs_total = term_grad + term_tan + term_u3.unwrap_or(0.0) + term_surface;
        Ok(EstimateRow {
            radius,
            term_grad,
            term_tan,
            term_u3,
            term_surface,
            term_surface_alt,
            lhs_total,
            rhs_norm2: f64::NAN,
            ratio: f64::NAN,
        })
    }
}

/// Sobolev index of the right-hand side: `1 - 1/m`, or `λ/m` when the
/// stronger repulsive form is requested.
pub fn rhs_exponent(spec: &PotentialSpec, use_repulsive: bool) -> Result<f64> {
    if use_repulsive {
        if !spec.is_repulsive() {
            return Err(Error::InvalidInput(
                "the repulsive right-hand side needs a potential with V_r ≤ 0".into(),
            ));
        }
        Ok(spec.lambda() / spec.m())
    } else {
        Ok(1.0 - 1.0 / spec.m())
    }
}

/// `‖f‖²_{ℋ^s}` for the Hamiltonian of `spec` at time `t`.
pub fn data_norm_sqr(f: &ComplexField, spec: &PotentialSpec, t: f64, s: f64) -> Result<f64> {
    let h = assemble_hamiltonian(spec, t, f.grid());
    SobolevScale::new(&h).norm_sqr(f, s)
}

fn initial_time(traj: &Trajectory) -> f64 {
    traj.times().first().copied().unwrap_or(0.0)
}

/// Smoothing functional at one radius, with the default right-hand side.
pub fn smoothing_functional(
    traj: &Trajectory,
    spec: &PotentialSpec,
    radius: f64,
) -> Result<EstimateRow> {
    let prepared = prepare(traj, spec)?;
    let mut row = prepared.row(radius)?;
    let s = rhs_exponent(spec, false)?;
    row.rhs_norm2 = data_norm_sqr(traj.initial(), spec, initial_time(traj), s)?;
    row.ratio = row.lhs_total / row.rhs_norm2;
    Ok(row)
}

/// Smoothing functional over a set of radii with its ratio to `‖f‖²_{ℋ^s}`.
pub fn smoothing_ratio(
    traj: &Trajectory,
    spec: &PotentialSpec,
    radii: &[f64],
    use_repulsive: bool,
) -> Result<EstimateReport> {
    if radii.is_empty() {
        return Err(Error::InvalidInput("no radii given".into()));
    }
    if traj.initial().norm_sqr() == 0.0 {
        return Err(Error::ZeroData);
    }
    let s = rhs_exponent(spec, use_repulsive)?;
    let rhs = data_norm_sqr(traj.initial(), spec, initial_time(traj), s)?;
    if !(rhs > 0.0) {
        return Err(Error::ZeroData);
    }
    let prepared = prepare(traj, spec)?;
    let rows = radii
        .iter()
        .map(|&r| {
            let mut row = prepared.row(r)?;
            row.rhs_norm2 = rhs;
            row.ratio = row.lhs_total / rhs;
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let sup_ratio = rows
        .iter()
        .map(|r| r.ratio)
        .fold(f64::NEG_INFINITY, f64::max);
    let min_ratio = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    Ok(EstimateReport {
        rows,
        rhs_exponent: s,
        rhs_norm2: rhs,
        sup_ratio,
        min_ratio,
        uniform_in_r: (sup_ratio / min_ratio).is_finite(),
    })
}
