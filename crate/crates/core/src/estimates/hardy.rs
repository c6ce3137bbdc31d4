use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::ComplexField;
use crate::operators::assemble_hamiltonian;
use crate::par;
use crate::potentials::PotentialSpec;

/// Allowed excess over the continuum constant.
pub const HARDY_SLACK: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HardyReport {
    /// `∫ |u|²/|x|² / ‖∇_{A,h} u‖²`
    pub ratio: f64,
    /// `(2/(n-2))²`
    pub bound: f64,
    pub passed: bool,
}

/// Hardy quotient of `u`, with the weight averaged over each cell and the
/// gradient taken from the discrete kinetic form.
pub fn hardy_check(u: &ComplexField, spec: &PotentialSpec, t: f64) -> Result<HardyReport> {
    let g = u.grid();
    let n = g.dim();
    if u.norm_sqr() == 0.0 {
        return Err(Error::ZeroData);
    }
    let weight = g.radial_cell_average(|r| 1.0 / (r * r)).into_values();
    let v = u.values();
    let lhs = g.cell_volume() * par::sum_by(g.len(), |i| weight[i] * v[i].norm_sqr());
    let grad = assemble_hamiltonian(spec, t, g).kinetic_energy(u)?;
    let ratio = lhs / grad;
    let bound = (2.0 / (n as f64 - 2.0)).powi(2);
    Ok(HardyReport {
        ratio,
        bound,
        passed: ratio.is_finite() && ratio <= bound * (1.0 + HARDY_SLACK),
    })
}
