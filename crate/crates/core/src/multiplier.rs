//! The radial multiplier `φ_R(r) = R φ₀(r/R)` and its calculus.
//!
//! `φ₀` is the antiderivative, vanishing at 0, of
//!
//! ```text
//! φ₀'(s) = M + s/(2n) - s³/(2n(n+2))             s ≤ 1
//!        = M + 1/(2n) - s^{1-n}/(2n(n+2))         s > 1
//! ```
//!
//! The bilaplacian splits into an absolutely continuous part and a singular
//! part: a surface layer on `|x| = R` when `n ≥ 4`, a point mass at the
//! origin when `n = 3`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MultiplierFamily {
    m: f64,
    r: f64,
    n: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MultiplierValues {
    pub phi: f64,
    pub phi_p: f64,
    pub phi_pp: f64,
    /// `Δφ`; `+∞` at the origin.
    pub lap_phi: f64,
    /// Absolutely continuous part of `Δ²φ`; `-∞` at the origin when `n ≥ 4`.
    pub bilap_ac: f64,
    /// Set when `r = 0`, where `lap_phi` (and for `n ≥ 4` also
    /// `bilap_ac`) is a sentinel rather than a value.
    pub at_origin: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SingularParts {
    /// Coefficient of the surface measure on `|x| = R` (`n ≥ 4`).
    pub surface_weight: f64,
    /// Coefficient of the Dirac mass at the origin (`n = 3`).
    pub origin_mass: f64,
}

impl MultiplierFamily {
    pub fn new(m: f64, r: f64, n: usize) -> Result<Self> {
        if !(m.is_finite() && m >= 1.0) {
            return Err(Error::InvalidMultiplier(format!(
                "M = {m} must be at least 1"
            )));
        }
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidMultiplier(format!(
                "R = {r} must be positive"
            )));
        }
        if n < 3 {
            return Err(Error::InvalidMultiplier(format!(
                "dimension {n} is below 3"
            )));
        }
        Ok(Self { m, r, n })
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn scale(&self) -> f64 {
        self.r
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `1 / (2n(n+2))`
    fn k(&self) -> f64 {
        let n = self.n as f64;
        1.0 / (2.0 * n * (n + 2.0))
    }

    fn phi0(&self, s: f64) -> f64 {
        let n = self.n as f64;
        let inner = |s: f64| self.m * s + s * s / (4.0 * n) - s.powi(4) * self.k() / 4.0;
        if s <= 1.0 {
            inner(s)
        } else {
            inner(1.0)
                + (self.m + 1.0 / (2.0 * n)) * (s - 1.0)
                + (s.powf(2.0 - n) - 1.0) * self.k() / (n - 2.0)
        }
    }

    pub fn phi(&self, r: f64) -> f64 {
        self.r * self.phi0(r / self.r)
    }

    pub fn phi_p(&self, r: f64) -> f64 {
        let n = self.n as f64;
        let s = r / self.r;
        if s <= 1.0 {
            self.m + s / (2.0 * n) - self.k() * s.powi(3)
        } else {
            self.m + 1.0 / (2.0 * n) - self.k() * s.powf(1.0 - n)
        }
    }

    pub fn phi_pp(&self, r: f64) -> f64 {
        let n = self.n as f64;
        let s = r / self.r;
        if s <= 1.0 {
            (1.0 / (2.0 * n) - 3.0 * self.k() * s * s) / self.r
        } else {
            (n - 1.0) * self.k() * s.powf(-n) / self.r
        }
    }

    /// `Δφ` for `r > 0`.
    pub fn lap_phi(&self, r: f64) -> f64 {
        let n = self.n as f64;
        let rr = self.r;
        if r <= rr {
            self.m * (n - 1.0) / r + 1.0 / (2.0 * rr) - r * r / (2.0 * n * rr.powi(3))
        } else {
            self.m * (n - 1.0) / r + (n - 1.0) / (2.0 * n * r)
        }
    }

    /// Absolutely continuous part of `Δ²φ` for `r > 0`.
    pub fn bilap_ac(&self, r: f64) -> f64 {
        let n = self.n as f64;
        let rr = self.r;
        let c = (n - 1.0) * (n - 3.0);
        if r <= rr {
            -1.0 / rr.powi(3) - self.m * c / r.powi(3)
        } else {
            -(self.m + 1.0 / (2.0 * n)) * c / r.powi(3)
        }
    }

    pub fn eval(&self, r: f64) -> Result<MultiplierValues> {
        if r < 0.0 || r.is_nan() {
            return Err(Error::NegativeRadius(r));
        }
        let at_origin = r == 0.0;
        let (lap_phi, bilap_ac) = if at_origin {
            let b = if self.n == 3 {
                -1.0 / self.r.powi(3)
            } else {
                f64::NEG_INFINITY
            };
            (f64::INFINITY, b)
        } else {
            (self.lap_phi(r), self.bilap_ac(r))
        };
        Ok(MultiplierValues {
            phi: self.phi(r),
            phi_p: self.phi_p(r),
            phi_pp: self.phi_pp(r),
            lap_phi,
            bilap_ac,
            at_origin,
        })
    }

    pub fn singular_parts(&self) -> SingularParts {
        let n = self.n as f64;
        if self.n == 3 {
            SingularParts {
                surface_weight: 0.0,
                origin_mass: -8.0 * PI * self.m,
            }
        } else {
            SingularParts {
                surface_weight: -(n - 3.0) / (2.0 * n) / (self.r * self.r),
                origin_mass: 0.0,
            }
        }
    }

    /// `(n-1)/(2n(n+2)) · min(1/R, R^{n-1}/r^n)`, the common lower profile.
    fn lower_profile(&self, r: f64) -> f64 {
        let n = self.n as f64;
        let w = if r <= self.r {
            1.0 / self.r
        } else {
            self.r.powf(n - 1.0) / r.powf(n)
        };
        (n - 1.0) * self.k() * w
    }

    /// `10⁴` log-spaced radii over `[10⁻³R, 10³R]`.
    pub fn log_samples(&self) -> Vec<f64> {
        let count = 10_000;
        (0..count)
            .map(|k| self.r * 10f64.powf(-3.0 + 6.0 * k as f64 / (count - 1) as f64))
            .collect()
    }
}

/// Result of [`verify_bounds`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundsReport {
    pub passed: bool,
    /// Smallest relative slack `(allowed - actual) / max(|allowed|, 1e-300)` over all bounds and samples.
    pub worst_slack: f64,
    pub worst_bound: &'static str,
    pub worst_radius: f64,
    pub sup_phi_p: f64,
    pub sup_phi_pp: f64,
}

/// Checks the positivity and supremum bounds of the multiplier at every sample.
pub fn verify_bounds(fam: &MultiplierFamily, r_samples: &[f64]) -> Result<BoundsReport> {
    const TOL: f64 = 1e-12;
    let n = fam.n as f64;
    let mut report = BoundsReport {
        passed: true,
        worst_slack: f64::INFINITY,
        worst_bound: "",
        worst_radius: f64::NAN,
        sup_phi_p: f64::NEG_INFINITY,
        sup_phi_pp: f64::NEG_INFINITY,
    };
    let record = |report: &mut BoundsReport, name: &'static str, r: f64, slack: f64, scale: f64| {
        let rel = slack / scale.abs().max(1e-300);
        if rel < report.worst_slack {
            report.worst_slack = rel;
            report.worst_bound = name;
            report.worst_radius = r;
        }
    };
    for &r in r_samples {
        if r < 0.0 || r.is_nan() {
            return Err(Error::NegativeRadius(r));
        }
        let v = fam.eval(r)?;
        report.sup_phi_p = report.sup_phi_p.max(v.phi_p);
        report.sup_phi_pp = report.sup_phi_pp.max(v.phi_pp);
        let low = fam.lower_profile(r);
        if r > 0.0 {
            let rhs = fam.m / r + low;
            record(&mut report, "phi_p/r lower", r, v.phi_p / r - rhs, rhs);
            let lap_max = fam.m * (n - 1.0) / r + 1.0 / (2.0 * r.max(fam.r));
            record(
                &mut report,
                "|lap_phi| upper",
                r,
                lap_max - v.lap_phi.abs(),
                lap_max,
            );
        }
        record(&mut report, "phi_pp lower", r, v.phi_pp - low, low);
        let sup_p = fam.m + 1.0 / (2.0 * n);
        record(&mut report, "phi_p upper", r, sup_p - v.phi_p, sup_p);
        let sup_pp = 1.0 / (2.0 * n * fam.r);
        record(&mut report, "phi_pp upper", r, sup_pp - v.phi_pp, sup_pp);
    }
    report.passed = report.worst_slack >= -TOL;
    Ok(report)
}
