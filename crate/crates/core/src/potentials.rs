//! Electric and magnetic potential families.
//!
//! A [`PotentialSpec`] bundles an electric potential `V(t,x)`, a vector
//! potential `A(t,x)`, the growth exponents `m` and `λ`, and an optional
//! time-dependent gauge shift. Analytic derivatives are used wherever a
//! family provides them.
//!
//! Time convention: solutions satisfy `u_t = -i H u`. Under this convention
//! the phase `w = e^{-i c₀ t ⟨x⟩^m} u` solves the equation with
//! `Ṽ = V + c₀⟨x⟩^m` and `Ã = A - c₀ t ∇⟨x⟩^m`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{norm, ComplexField, Grid, ScalarField, VectorField, MAX_DIM};
use crate::par;

/// Japanese bracket `⟨x⟩ = (1 + |x|²)^{1/2}`.
pub fn bracket(x: &[f64]) -> f64 {
    (1.0 + x.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

type ScalarFn = dyn Fn(f64, &[f64]) -> f64 + Send + Sync;
type VectorFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;

/// User-supplied electric potential.
#[derive(Clone)]
pub struct CustomElectric {
    pub value: Arc<ScalarFn>,
    /// `∂_r V(t, x)`; required because the radial derivative enters sign-sensitive terms.
    pub radial_derivative: Arc<ScalarFn>,
    pub time_dependent: bool,
    /// Declares `∂_r V ≤ 0` everywhere.
    pub repulsive: bool,
}

/// User-supplied vector potential. Derivatives use central differences.
#[derive(Clone)]
pub struct CustomMagnetic {
    pub value: Arc<VectorFn>,
    pub time_dependent: bool,
}

#[derive(Clone)]
pub enum ElectricFamily {
    /// `V = c⟨x⟩^m`.
    Polynomial {
        c: f64,
    },
    /// `V = c⟨x⟩^{-α}`, radially nonincreasing.
    Repulsive {
        c: f64,
        alpha: f64,
    },
    Zero,
    Custom(CustomElectric),
}

#[derive(Clone)]
pub enum MagneticFamily {
    Zero,
    /// Uniform field of strength `b` in the `(x₁, x₂)` plane:
    /// `A = (-b x₂/2, b x₁/2, 0, …)`.
    ConstantField {
        b: f64,
    },
    /// `A = (b/2)⟨x⟩^p (-x₂, x₁, 0, …)`.
    Rotational {
        b: f64,
        p: f64,
    },
    Custom(CustomMagnetic),
}

impl fmt::Debug for ElectricFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Polynomial { c } => write!(f, "Polynomial {{ c: {c} }}"),
            Self::Repulsive { c, alpha } => write!(f, "Repulsive {{ c: {c}, alpha: {alpha} }}"),
            Self::Zero => write!(f, "Zero"),
            Self::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl fmt::Debug for MagneticFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "Zero"),
            Self::ConstantField { b } => write!(f, "ConstantField {{ b: {b} }}"),
            Self::Rotational { b, p } => write!(f, "Rotational {{ b: {b}, p: {p} }}"),
            Self::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// A validated pair `(V, A)` with growth exponents and gauge shift.
#[derive(Clone, Debug)]
pub struct PotentialSpec {
    electric: ElectricFamily,
    magnetic: MagneticFamily,
    m: f64,
    lambda: f64,
    gauge_c0: f64,
    gauge_origin: f64,
}

impl PotentialSpec {
    pub fn new(
        electric: ElectricFamily,
        magnetic: MagneticFamily,
        m: f64,
        lambda: f64,
    ) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidPotential(msg));
        if !(m.is_finite() && m >= 2.0) {
            return bad(format!("growth exponent m = {m} must be at least 2"));
        }
        if !(lambda.is_finite() && lambda >= m / 2.0 - 1e-12 && lambda <= m - 1.0 + 1e-12) {
            return bad(format!(
                "lambda = {lambda} must lie in [m/2, m-1] = [{}, {}]",
                m / 2.0,
                m - 1.0
            ));
        }
        match &electric {
            ElectricFamily::Polynomial { c } if !(c.is_finite() && *c > 0.0) => {
                return bad(format!("electric coefficient c = {c} must be positive"));
            }
            ElectricFamily::Repulsive { c, alpha }
                if !(c.is_finite() && *c > 0.0 && alpha.is_finite() && *alpha >= 0.0) =>
            {
                return bad(format!(
                    "repulsive family needs c > 0 and alpha >= 0, got c = {c}, alpha = {alpha}"
                ));
            }
            _ => {}
        }
        match &magnetic {
            MagneticFamily::ConstantField { b } if !b.is_finite() => {
                return bad(format!("field strength b = {b} is not finite"));
            }
            MagneticFamily::Rotational { b, p } if !(b.is_finite() && p.is_finite()) => {
                return bad(format!(
                    "rotational family needs finite b and p, got b = {b}, p = {p}"
                ));
            }
            _ => {}
        }
        Ok(Self {
            electric,
            magnetic,
            m,
            lambda,
            gauge_c0: 0.0,
            gauge_origin: 0.0,
        })
    }

    /// `V = ⟨x⟩²`, `A = 0`, `m = 2`, `λ = 1`.
    pub fn harmonic() -> Self {
        Self::new(
            ElectricFamily::Polynomial { c: 1.0 },
            MagneticFamily::Zero,
            2.0,
            1.0,
        )
        .expect("valid harmonic spec")
    }

    pub fn electric(&self) -> &ElectricFamily {
        &self.electric
    }

    pub fn magnetic(&self) -> &MagneticFamily {
        &self.magnetic
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn gauge_c0(&self) -> f64 {
        self.gauge_c0
    }

    /// Replaces the magnetic family, keeping everything else.
    pub fn with_magnetic(&self, magnetic: MagneticFamily) -> Result<Self> {
        let mut out = Self::new(self.electric.clone(), magnetic, self.m, self.lambda)?;
        out.gauge_c0 = self.gauge_c0;
        out.gauge_origin = self.gauge_origin;
        Ok(out)
    }

    /// True when neither `V` nor `A` depends on time.
    pub fn is_static(&self) -> bool {
        let e = matches!(&self.electric, ElectricFamily::Custom(c) if c.time_dependent);
        let b = matches!(&self.magnetic, MagneticFamily::Custom(c) if c.time_dependent);
        self.gauge_c0 == 0.0 && !e && !b
    }

    /// True when `A ≡ 0` at all times.
    pub fn has_zero_vector_potential(&self) -> bool {
        matches!(self.magnetic, MagneticFamily::Zero) && self.gauge_c0 == 0.0
    }

    /// True when the family guarantees `∂_r V ≤ 0`.
    pub fn is_repulsive(&self) -> bool {
        let family = match &self.electric {
            ElectricFamily::Repulsive { .. } | ElectricFamily::Zero => true,
            ElectricFamily::Custom(c) => c.repulsive,
            ElectricFamily::Polynomial { .. } => false,
        };
        family && self.gauge_c0 <= 0.0
    }

    /// Lower constant `c` in `V ≥ c⟨x⟩^m`, when the family has one.
    pub fn lower_constant(&self) -> Option<f64> {
        match self.electric {
            ElectricFamily::Polynomial { c } => {
                Some(c + self.gauge_c0.min(0.0)).filter(|c| *c > 0.0)
            }
            _ => None,
        }
    }

    pub fn potential_at(&self, t: f64, x: &[f64]) -> f64 {
        let w = bracket(x);
        let base = match &self.electric {
            ElectricFamily::Polynomial { c } => c * w.powf(self.m),
            ElectricFamily::Repulsive { c, alpha } => c * w.powf(-alpha),
            ElectricFamily::Zero => 0.0,
            ElectricFamily::Custom(f) => (f.value)(t, x),
        };
        base + self.gauge_c0 * w.powf(self.m)
    }

    /// Analytic `∂_r V`.
    pub fn radial_derivative_at(&self, t: f64, x: &[f64]) -> f64 {
        let w = bracket(x);
        let r = norm(x);
        let base = match &self.electric {
            ElectricFamily::Polynomial { c } => c * self.m * r * w.powf(self.m - 2.0),
            ElectricFamily::Repulsive { c, alpha } => -c * alpha * r * w.powf(-alpha - 2.0),
            ElectricFamily::Zero => 0.0,
            ElectricFamily::Custom(f) => (f.radial_derivative)(t, x),
        };
        base + self.gauge_c0 * self.m * r * w.powf(self.m - 2.0)
    }

    /// Writes `A(t, x)` into `out[..n]`.
    pub fn vector_potential_at(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        out[..n].iter_mut().for_each(|v| *v = 0.0);
        match &self.magnetic {
            MagneticFamily::Zero => {}
            MagneticFamily::ConstantField { b } => {
                out[0] = -0.5 * b * x[1];
                out[1] = 0.5 * b * x[0];
            }
            MagneticFamily::Rotational { b, p } => {
                let s = 0.5 * b * bracket(x).powf(*p);
                out[0] = -s * x[1];
                out[1] = s * x[0];
            }
            MagneticFamily::Custom(f) => (f.value)(t, x, out),
        }
        if self.gauge_c0 != 0.0 {
            let k =
                -self.gauge_c0 * (t - self.gauge_origin) * self.m * bracket(x).powf(self.m - 2.0);
            for a in 0..n {
                out[a] += k * x[a];
            }
        }
    }

    /// Writes the Jacobian `J[i*n + j] = ∂_j A^i` at `(t, x)`. Custom
    /// families use central differences with the given step.
    pub fn jacobian_at(&self, t: f64, x: &[f64], step: f64, out: &mut [f64]) {
        let n = x.len();
        out[..n * n].iter_mut().for_each(|v| *v = 0.0);
        match &self.magnetic {
            MagneticFamily::Zero => {}
            MagneticFamily::ConstantField { b } => {
                out[1] = -0.5 * b;
                out[n] = 0.5 * b;
            }
            MagneticFamily::Rotational { b, p } => {
                let w = bracket(x);
                let wp = w.powf(*p);
                // ∂_j ⟨x⟩^p = p ⟨x⟩^{p-2} x_j
                let dw = p * w.powf(p - 2.0);
                let jx = [-x[1], x[0]];
                for (i, &jxi) in jx.iter().enumerate() {
                    for j in 0..n {
                        out[i * n + j] = 0.5 * b * dw * x[j] * jxi;
                    }
                }
                out[1] -= 0.5 * b * wp;
                out[n] += 0.5 * b * wp;
            }
            MagneticFamily::Custom(f) => {
                let mut xp = [0.0; MAX_DIM];
                let mut ap = [0.0; MAX_DIM];
                let mut am = [0.0; MAX_DIM];
                xp[..n].copy_from_slice(x);
                for j in 0..n {
                    xp[j] = x[j] + step;
                    (f.value)(t, &xp[..n], &mut ap);
                    xp[j] = x[j] - step;
                    (f.value)(t, &xp[..n], &mut am);
                    xp[j] = x[j];
                    for i in 0..n {
                        out[i * n + j] = (ap[i] - am[i]) / (2.0 * step);
                    }
                }
            }
        }
        if self.gauge_c0 != 0.0 {
            let w = bracket(x);
            let k = -self.gauge_c0 * (t - self.gauge_origin) * self.m;
            let w2 = w.powf(self.m - 2.0);
            let w4 = (self.m - 2.0) * w.powf(self.m - 4.0);
            for i in 0..n {
                for j in 0..n {
                    let delta = if i == j { w2 } else { 0.0 };
                    out[i * n + j] += k * (w4 * x[i] * x[j] + delta);
                }
            }
        }
    }

    /// Writes `B[i*n + j] = ∂_j A^i - ∂_i A^j`.
    pub fn magnetic_matrix_at(&self, t: f64, x: &[f64], step: f64, out: &mut [f64]) {
        let n = x.len();
        let mut jac = [0.0; MAX_DIM * MAX_DIM];
        self.jacobian_at(t, x, step, &mut jac);
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = jac[i * n + j] - jac[j * n + i];
            }
        }
    }

    /// Writes `B_τ = (x/|x|) B` into `out[..n]`.
    pub fn btau_at(&self, t: f64, x: &[f64], step: f64, out: &mut [f64]) {
        let n = x.len();
        let mut b = [0.0; MAX_DIM * MAX_DIM];
        self.magnetic_matrix_at(t, x, step, &mut b);
        let r = norm(x);
        for j in 0..n {
            out[j] = (0..n).map(|i| x[i] / r * b[i * n + j]).sum();
        }
    }

    /// `∇·B_τ`. Zero for the built-in families, whose `B_τ` has the form
    /// `g(|x|) J x` with `J` antisymmetric; central differences otherwise.
    pub fn div_btau_at(&self, t: f64, x: &[f64], step: f64) -> f64 {
        match self.magnetic {
            MagneticFamily::Custom(_) => {
                let n = x.len();
                let mut xp = [0.0; MAX_DIM];
                xp[..n].copy_from_slice(x);
                let mut bp = [0.0; MAX_DIM];
                let mut bm = [0.0; MAX_DIM];
                let mut div = 0.0;
                for a in 0..n {
                    xp[a] = x[a] + step;
                    self.btau_at(t, &xp[..n], step, &mut bp);
                    xp[a] = x[a] - step;
                    self.btau_at(t, &xp[..n], step, &mut bm);
                    xp[a] = x[a];
                    div += (bp[a] - bm[a]) / (2.0 * step);
                }
                div
            }
            _ => 0.0,
        }
    }
}

/// Per-node antisymmetric `n × n` matrices, row-major per node.
#[derive(Clone, Debug, PartialEq)]
pub struct MagneticMatrixField {
    grid: Grid,
    values: Vec<f64>,
}

impl MagneticMatrixField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn at(&self, idx: usize) -> &[f64] {
        let nn = self.grid.dim() * self.grid.dim();
        &self.values[idx * nn..(idx + 1) * nn]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Largest `|B_ij + B_ji|` over all nodes.
    pub fn max_asymmetry(&self) -> f64 {
        let n = self.grid.dim();
        self.values.chunks(n * n).fold(0.0, |acc, b| {
            let mut worst: f64 = acc;
            for i in 0..n {
                for j in 0..n {
                    worst = worst.max((b[i * n + j] + b[j * n + i]).abs());
                }
            }
            worst
        })
    }

    /// Largest entrywise difference to another field.
    pub fn max_difference(&self, other: &MagneticMatrixField) -> Result<f64> {
        self.grid.check(&other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }
}

pub fn eval_v(spec: &PotentialSpec, t: f64, g: &Grid) -> ScalarField {
    g.scalar_field(|x| spec.potential_at(t, x))
}

pub fn eval_a(spec: &PotentialSpec, t: f64, g: &Grid) -> VectorField {
    let n = g.dim();
    let mut values = vec![0.0; g.len() * n];
    values.chunks_mut(n).enumerate().for_each(|(i, slot)| {
        let x = g.position(i);
        spec.vector_potential_at(t, &x[..n], slot);
    });
    VectorField::new(*g, values).expect("finite vector potential")
}

pub fn magnetic_matrix(spec: &PotentialSpec, t: f64, g: &Grid) -> MagneticMatrixField {
    let n = g.dim();
    let h = g.spacing();
    let mut values = vec![0.0; g.len() * n * n];
    values.chunks_mut(n * n).enumerate().for_each(|(i, slot)| {
        let x = g.position(i);
        spec.magnetic_matrix_at(t, &x[..n], h, slot);
    });
    MagneticMatrixField { grid: *g, values }
}

/// `B_τ = (x/|x|) B` at every node.
pub fn b_tau(b: &MagneticMatrixField, g: &Grid) -> Result<VectorField> {
    g.check(b.grid())?;
    let n = g.dim();
    let mut values = vec![0.0; g.len() * n];
    values.chunks_mut(n).enumerate().for_each(|(i, slot)| {
        let x = g.position(i);
        let r = norm(&x[..n]);
        let m = b.at(i);
        for j in 0..n {
            slot[j] = (0..n).map(|k| x[k] / r * m[k * n + j]).sum();
        }
    });
    VectorField::new(*g, values)
}

/// Empirical constants of the growth assumptions on the grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssumptionReport {
    /// `sup (∂_r V)⁺ / ⟨x⟩^{m-1}`
    pub radial_growth: f64,
    /// `sup |∇·B_τ| / ⟨x⟩^λ`
    pub div_btau: f64,
    /// `sup |B_τ| / ⟨x⟩^{λ - m/2}`
    pub btau: f64,
    /// `inf V / ⟨x⟩^m`
    pub v_ratio_min: f64,
    /// `sup V / ⟨x⟩^m`
    pub v_ratio_max: f64,
    pub passed: bool,
}

pub fn check_assumptions(spec: &PotentialSpec, g: &Grid, t_samples: &[f64]) -> AssumptionReport {
    let n = g.dim();
    let h = g.spacing();
    let (m, lambda) = (spec.m, spec.lambda);
    let mut report = AssumptionReport {
        radial_growth: 0.0,
        div_btau: 0.0,
        btau: 0.0,
        v_ratio_min: f64::INFINITY,
        v_ratio_max: 0.0,
        passed: false,
    };
    let times: Vec<f64> = if t_samples.is_empty() {
        vec![0.0]
    } else {
        t_samples.to_vec()
    };
    let magnetic = !matches!(spec.magnetic, MagneticFamily::Zero);
    for &t in &times {
        let rows: Vec<[f64; 5]> = (0..g.len())
            .map(|i| {
                let p = g.position(i);
                let x = &p[..n];
                let w = bracket(x);
                let vr = spec.radial_derivative_at(t, x).max(0.0) / w.powf(m - 1.0);
                let ratio = spec.potential_at(t, x) / w.powf(m);
                let (div, bt) = if magnetic {
                    let mut bt = [0.0; MAX_DIM];
                    spec.btau_at(t, x, h, &mut bt);
                    (
                        spec.div_btau_at(t, x, h).abs() / w.powf(lambda),
                        norm(&bt[..n]) / w.powf(lambda - m / 2.0),
                    )
                } else {
                    (0.0, 0.0)
                };
                [vr, div, bt, ratio, ratio]
            })
            .collect();
        for row in rows {
            report.radial_growth = report.radial_growth.max(row[0]);
            report.div_btau = report.div_btau.max(row[1]);
            report.btau = report.btau.max(row[2]);
            report.v_ratio_min = report.v_ratio_min.min(row[3]);
            report.v_ratio_max = report.v_ratio_max.max(row[4]);
        }
    }
    let finite = [
        report.radial_growth,
        report.div_btau,
        report.btau,
        report.v_ratio_min,
        report.v_ratio_max,
    ]
    .iter()
    .all(|v| v.is_finite());
    report.passed = finite && report.v_ratio_min > 0.0;
    report
}

/// Applies the gauge change with constant `c0`: `Ṽ = V + c₀⟨x⟩^m`,
/// `Ã = A - c₀ t ∇⟨x⟩^m`. `B` is unchanged.
pub fn gauge_transform(spec: &PotentialSpec, c0: f64) -> PotentialSpec {
    let mut out = spec.clone();
    out.gauge_c0 += c0;
    out
}

/// `e^{-i c₀ t ⟨x⟩^m} u`: maps a solution for the base spec to a solution
/// for [`gauge_transform`]`(spec, c0)`.
pub fn apply_gauge_phase(u: &ComplexField, c0: f64, m: f64, t: f64) -> ComplexField {
    let g = *u.grid();
    let n = g.dim();
    let mut values = u.values().to_vec();
    par::fill(&mut values, |i| {
        let p = g.position(i);
        let phase = -c0 * t * bracket(&p[..n]).powf(m);
        u.values()[i] * Complex64::from_polar(1.0, phase)
    });
    ComplexField::from_raw(g, values)
}

fn default_m() -> f64 {
    2.0
}

/// JSON form of the electric family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ElectricConfig {
    Polynomial {
        c: f64,
        #[serde(default = "default_m")]
        m: f64,
    },
    Repulsive {
        c: f64,
        alpha: f64,
        #[serde(default = "default_m")]
        m: f64,
    },
    Zero {
        #[serde(default = "default_m")]
        m: f64,
    },
}

/// JSON form of the magnetic family. `lambda` defaults to `m - 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MagneticConfig {
    Zero {
        #[serde(default)]
        lambda: Option<f64>,
    },
    ConstantField {
        b: f64,
        #[serde(default)]
        lambda: Option<f64>,
    },
    Rotational {
        b: f64,
        p: f64,
        #[serde(default)]
        lambda: Option<f64>,
    },
}

impl Default for MagneticConfig {
    fn default() -> Self {
        Self::Zero { lambda: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeConfig {
    pub c0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub electric: ElectricConfig,
    #[serde(default)]
    pub magnetic: MagneticConfig,
    #[serde(default)]
    pub gauge: Option<GaugeConfig>,
}

impl PotentialConfig {
    pub fn build(&self) -> Result<PotentialSpec> {
        let (electric, m) = match self.electric {
            ElectricConfig::Polynomial { c, m } => (ElectricFamily::Polynomial { c }, m),
            ElectricConfig::Repulsive { c, alpha, m } => {
                (ElectricFamily::Repulsive { c, alpha }, m)
            }
            ElectricConfig::Zero { m } => (ElectricFamily::Zero, m),
        };
        let (magnetic, lambda) = match self.magnetic {
            MagneticConfig::Zero { lambda } => (MagneticFamily::Zero, lambda),
            MagneticConfig::ConstantField { b, lambda } => {
                (MagneticFamily::ConstantField { b }, lambda)
            }
            MagneticConfig::Rotational { b, p, lambda } => {
                (MagneticFamily::Rotational { b, p }, lambda)
            }
        };
        let spec = PotentialSpec::new(electric, magnetic, m, lambda.unwrap_or(m - 1.0))?;
        Ok(match &self.gauge {
            Some(GaugeConfig { c0 }) if !c0.is_finite() => {
                return Err(Error::InvalidPotential(format!(
                    "gauge constant c0 = {c0} is not finite"
                )))
            }
            Some(GaugeConfig { c0 }) => gauge_transform(&spec, *c0),
            None => spec,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn constant_field(b: f64) -> PotentialSpec {
        PotentialSpec::new(
            ElectricFamily::Polynomial { c: 1.0 },
            MagneticFamily::ConstantField { b },
            2.0,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn rejects_invalid_exponents() {
        let e = ElectricFamily::Polynomial { c: 1.0 };
        assert!(PotentialSpec::new(e.clone(), MagneticFamily::Zero, 1.5, 1.0).is_err());
        assert!(PotentialSpec::new(e.clone(), MagneticFamily::Zero, 4.0, 1.5).is_err());
        assert!(PotentialSpec::new(e, MagneticFamily::Zero, 4.0, 3.5).is_err());
        assert!(PotentialSpec::new(
            ElectricFamily::Polynomial { c: 0.0 },
            MagneticFamily::Zero,
            2.0,
            1.0
        )
        .is_err());
    }

    #[test]
    fn harmonic_values() {
        let spec = PotentialSpec::harmonic();
        assert_relative_eq!(spec.potential_at(0.0, &[1.0, 1.0, 1.0]), 4.0);
        assert_relative_eq!(spec.potential_at(0.0, &[0.25, 0.25, 0.25]), 1.1875);
        assert_relative_eq!(spec.radial_derivative_at(0.0, &[3.0, 0.0, 4.0]), 10.0);
    }

    #[test]
    fn landau_gauge() {
        let spec = constant_field(1.0);
        let mut a = [0.0; 3];
        spec.vector_potential_at(0.0, &[1.0, 0.0, 0.0], &mut a);
        assert_eq!(a, [0.0, 0.5, 0.0]);
        let mut b = [0.0; 9];
        spec.magnetic_matrix_at(0.0, &[0.3, -1.0, 2.0], 0.1, &mut b);
        assert_eq!(b, [0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let mut bt = [0.0; 3];
        spec.btau_at(0.0, &[1.0, 0.0, 0.0], 0.1, &mut bt);
        assert_eq!(bt, [0.0, -1.0, 0.0]);
    }

    #[test]
    fn rotational_jacobian_matches_differences() {
        let spec = PotentialSpec::new(
            ElectricFamily::Polynomial { c: 1.0 },
            MagneticFamily::Rotational { b: 0.7, p: 0.5 },
            3.0,
            2.0,
        )
        .unwrap();
        let spec = gauge_transform(&spec, 0.4);
        let x = [0.4, -0.9, 1.3, 0.2];
        let mut exact = [0.0; 16];
        spec.jacobian_at(0.6, &x, 1e-3, &mut exact);
        let fd = |j: usize, i: usize| {
            let (mut xp, mut xm) = (x, x);
            xp[j] += 1e-5;
            xm[j] -= 1e-5;
            let (mut ap, mut am) = ([0.0; 4], [0.0; 4]);
            spec.vector_potential_at(0.6, &xp, &mut ap);
            spec.vector_potential_at(0.6, &xm, &mut am);
            (ap[i] - am[i]) / 2e-5
        };
        for i in 0..4 {
            for j in 0..4 {
                assert!((exact[i * 4 + j] - fd(j, i)).abs() < 1e-8, "entry {i},{j}");
            }
        }
    }

    #[test]
    fn gauge_shift_values() {
        let base = constant_field(1.0);
        let shifted = gauge_transform(&base, 1.0);
        let x = [0.3, -0.2, 1.1];
        let w2 = 1.0 + 0.09 + 0.04 + 1.21;
        assert_relative_eq!(
            shifted.potential_at(1.0, &x) - base.potential_at(1.0, &x),
            w2,
            epsilon = 1e-12
        );
        let (mut a0, mut a1) = ([0.0; 3], [0.0; 3]);
        base.vector_potential_at(1.0, &x, &mut a0);
        shifted.vector_potential_at(1.0, &x, &mut a1);
        for k in 0..3 {
            assert_relative_eq!(a1[k] - a0[k], -2.0 * x[k], epsilon = 1e-12);
        }
        let identity = gauge_transform(&base, 0.0);
        assert_eq!(identity.potential_at(0.5, &x), base.potential_at(0.5, &x));
        assert!(!shifted.is_static());
        assert!(identity.is_static());
    }

    #[test]
    fn assumption_constants() {
        let g = Grid::new(3, 4.0, 16).unwrap();
        let report = check_assumptions(&PotentialSpec::harmonic(), &g, &[0.0]);
        assert!(report.passed);
        assert!(report.radial_growth <= 2.0);
        assert_eq!(report.btau, 0.0);
        assert_eq!(report.div_btau, 0.0);
        assert_relative_eq!(report.v_ratio_min, 1.0, epsilon = 1e-12);

        let report = check_assumptions(&constant_field(0.5), &g, &[0.0]);
        assert!(report.btau <= 0.5 + 1e-12);
    }

    #[test]
    fn zero_potential_fails_assumptions() {
        let spec =
            PotentialSpec::new(ElectricFamily::Zero, MagneticFamily::Zero, 2.0, 1.0).unwrap();
        let g = Grid::new(3, 2.0, 8).unwrap();
        assert!(!check_assumptions(&spec, &g, &[0.0]).passed);
    }

    #[test]
    fn config_round_trip() {
        let json = r#"{"electric":{"type":"polynomial","c":1.0,"m":2.0},
                       "magnetic":{"type":"constant_field","b":0.5},
                       "gauge":{"c0":0.25}}"#;
        let cfg: PotentialConfig = serde_json::from_str(json).unwrap();
        let spec = cfg.build().unwrap();
        assert_eq!(spec.gauge_c0(), 0.25);
        assert_eq!(spec.lambda(), 1.0);
        assert!(matches!(spec.magnetic(), MagneticFamily::ConstantField { b } if *b == 0.5));
    }
}
