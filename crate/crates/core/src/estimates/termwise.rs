use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{norm, ComplexField, VectorField, MAX_DIM};
use crate::multiplier::MultiplierFamily;
use crate::operators::{assemble_hamiltonian, covariant_gradient, SobolevScale};
use crate::par;
use crate::potentials::PotentialSpec;
use crate::solver::Trajectory;

use super::smoothing::trapezoid;

/// A left-hand side against `‖f‖²_{ℋ^s}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TermBound {
    pub lhs: f64,
    pub exponent: f64,
    pub rhs_norm2: f64,
    /// `lhs / rhs_norm2`
    pub constant: f64,
}

impl TermBound {
    fn new(lhs: f64, exponent: f64, rhs_norm2: f64) -> Self {
        Self {
            lhs,
            exponent,
            rhs_norm2,
            constant: lhs / rhs_norm2,
        }
    }
}

/// Input to the bilinear forms. Without a weight the form is
/// `∫ f̄ ∇_A g·∇φ` against `ℋ^{1/2}`; with a vector weight `F` it is
/// `∫ φ' f̄ F·∇_A g` against `ℋ^{λ/m}`.
#[derive(Clone, Debug)]
pub struct BilinearCase {
    pub f: ComplexField,
    pub g: ComplexField,
    pub weight: Option<VectorField>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BilinearBound {
    pub lhs: f64,
    pub exponent: f64,
    pub norm_f: f64,
    pub norm_g: f64,
    /// `lhs / (norm_f·norm_g)`
    pub constant: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundsDiagnostics {
    /// `∫∫ φ' (V_r)⁺ |u|²` against `ℋ^{1-1/m}`.
    pub potential: TermBound,
    /// `|∫∫ φ' B_τ·conj(∇_A u) u|` against `ℋ^{λ/m}`.
    pub magnetic: TermBound,
    /// `|[Im ∫ ū ∇_A u·∇φ]_0^T|` against `ℋ^{1/2}`.
    pub flux: TermBound,
    pub bilinear: Vec<BilinearBound>,
}

fn radial_flux(u: &ComplexField, spec: &PotentialSpec, t: f64, fam: &MultiplierFamily) -> f64 {
    let g = u.grid();
    let n = g.dim();
    let grad = covariant_gradient(u, spec, t);
    let v = u.values();
    g.cell_volume()
        * par::sum_by(g.len(), |i| {
            let x = g.position(i);
            let r = norm(&x[..n]);
            let gi = grad.at(i);
            let radial: Complex64 = (0..n).map(|a| gi[a] * (x[a] / r)).sum();
            (v[i].conj() * radial).im * fam.phi_p(r)
        })
}

/// Left-hand sides of the three term bounds along `traj`, their empirical
/// constants, and the bilinear forms on the given cases.
pub fn termwise_bounds(
    traj: &Trajectory,
    spec: &PotentialSpec,
    fam: &MultiplierFamily,
    cases: &[BilinearCase],
) -> Result<BoundsDiagnostics> {
    let g = *traj.grid();
    let n = g.dim();
    let w = g.cell_volume();
    let step = g.spacing();
    let times = traj.times();
    let t0 = times[0];

    let mut vr = Vec::with_capacity(times.len());
    let mut mag = Vec::with_capacity(times.len());
    for (u, &t) in traj.snapshots().iter().zip(times) {
        let v = u.values();
        vr.push(
            w * par::sum_by(g.len(), |i| {
                let x = g.position(i);
                let r = norm(&x[..n]);
                fam.phi_p(r) * spec.radial_derivative_at(t, &x[..n]).max(0.0) * v[i].norm_sqr()
            }),
        );
        if spec.has_zero_vector_potential() {
            mag.push(Complex64::new(0.0, 0.0));
            continue;
        }
        let grad = covariant_gradient(u, spec, t);
        mag.push(
            par::csum_by(g.len(), |i| {
                let x = g.position(i);
                let r = norm(&x[..n]);
                let mut bt = [0.0; MAX_DIM];
                spec.btau_at(t, &x[..n], step, &mut bt);
                let gi = grad.at(i);
                let dot: Complex64 = (0..n).map(|a| gi[a].conj() * bt[a]).sum();
                dot * v[i] * fam.phi_p(r)
            }) * w,
        );
    }
    let mag_re: Vec<f64> = mag.iter().map(|c| c.re).collect();
    let mag_im: Vec<f64> = mag.iter().map(|c| c.im).collect();
    let mag_lhs = Complex64::new(trapezoid(times, &mag_re), trapezoid(times, &mag_im)).norm();
    let flux_lhs = (radial_flux(traj.last(), spec, *times.last().expect("nonempty"), fam)
        - radial_flux(traj.initial(), spec, t0, fam))
    .abs();

    let h = assemble_hamiltonian(spec, t0, &g);
    let scale = SobolevScale::new(&h);
    let f = traj.initial();
    let s_v = 1.0 - 1.0 / spec.m();
    let s_b = spec.lambda() / spec.m();

    let bilinear = cases
        .iter()
        .map(|case| {
            if case.f.grid() != &g
                || case.g.grid() != &g
                || case.weight.as_ref().is_some_and(|w| w.grid() != &g)
            {
                return Err(Error::GridMismatch);
            }
            let grad = covariant_gradient(&case.g, spec, t0);
            let fv = case.f.values();
            let (lhs, s) = match &case.weight {
                None => (
                    par::csum_by(g.len(), |i| {
                        let x = g.position(i);
                        let r = norm(&x[..n]);
                        let gi = grad.at(i);
                        let radial: Complex64 = (0..n).map(|a| gi[a] * (x[a] / r)).sum();
                        fv[i].conj() * radial * fam.phi_p(r)
                    }),
                    0.5,
                ),
                Some(weight) => (
                    par::csum_by(g.len(), |i| {
                        let r = g.radius(i);
                        let wi = weight.at(i);
                        let gi = grad.at(i);
                        let dot: Complex64 = (0..n).map(|a| gi[a] * wi[a]).sum();
                        fv[i].conj() * dot * fam.phi_p(r)
                    }),
                    s_b,
                ),
            };
            let lhs = (lhs * w).norm();
            let norm_f = scale.norm(&case.f, s)?;
            let norm_g = scale.norm(&case.g, s)?;
            Ok(BilinearBound {
                lhs,
                exponent: s,
                norm_f,
                norm_g,
                constant: lhs / (norm_f * norm_g),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(BoundsDiagnostics {
        potential: TermBound::new(trapezoid(times, &vr), s_v, scale.norm_sqr(f, s_v)?),
        magnetic: TermBound::new(mag_lhs, s_b, scale.norm_sqr(f, s_b)?),
        flux: TermBound::new(flux_lhs, 0.5, scale.norm_sqr(f, 0.5)?),
        bilinear,
    })
}
