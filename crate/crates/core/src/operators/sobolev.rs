use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::ComplexField;
use crate::par;

use super::hamiltonian::DiscreteHamiltonian;
use super::krylov::lanczos_power_form;
use super::spectral::SpectralDecomposition;

/// Relative tolerance of the Lanczos quadrature.
pub const KRYLOV_TOLERANCE: f64 = 1e-8;
/// Largest system for which [`SobolevMethod::Auto`] decomposes densely.
pub const AUTO_DENSE_LIMIT: usize = 1000;
const KRYLOV_MAX_ITER: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SobolevMethod {
    Auto,
    Dense,
    Krylov,
}

/// Norms `‖f‖_{ℋ^s} = ‖H_h^{s/2} f‖` for `0 ≤ s ≤ 2`.
#[derive(Debug)]
pub struct SobolevScale<'a> {
    h: &'a DiscreteHamiltonian,
    method: SobolevMethod,
    spectral: OnceLock<SpectralDecomposition>,
}

impl<'a> SobolevScale<'a> {
    pub fn new(h: &'a DiscreteHamiltonian) -> Self {
        Self::with_method(h, SobolevMethod::Auto)
    }

    pub fn with_method(h: &'a DiscreteHamiltonian, method: SobolevMethod) -> Self {
        Self {
            h,
            method,
            spectral: OnceLock::new(),
        }
    }

    pub fn hamiltonian(&self) -> &DiscreteHamiltonian {
        self.h
    }

    fn uses_dense(&self) -> bool {
        match self.method {
            SobolevMethod::Dense => true,
            SobolevMethod::Krylov => false,
            SobolevMethod::Auto => self.h.grid().len() <= AUTO_DENSE_LIMIT,
        }
    }

    fn spectral(&self) -> Result<&SpectralDecomposition> {
        if let Some(s) = self.spectral.get() {
            return Ok(s);
        }
        let s = SpectralDecomposition::new(self.h)?;
        Ok(self.spectral.get_or_init(|| s))
    }

    pub fn norm_sqr(&self, f: &ComplexField, s: f64) -> Result<f64> {
        self.h.grid().check(f.grid())?;
        if !(0.0..=2.0).contains(&s) {
            return Err(Error::InvalidInput(format!(
                "Sobolev index {s} outside [0, 2]"
            )));
        }
        let w = f.grid().cell_volume();
        if s == 0.0 {
            return Ok(f.norm_sqr());
        }
        if s == 1.0 {
            return self.h.quadratic_form(f);
        }
        if s == 2.0 {
            let mut hf = vec![Complex64::new(0.0, 0.0); f.values().len()];
            self.h.apply_raw(f.values(), &mut hf);
            return Ok(par::norm_sqr(&hf) * w);
        }
        if self.uses_dense() {
            return self
                .spectral()?
                .weighted_norm_sqr(f, |lambda| lambda.max(0.0).powf(s));
        }
        let q = lanczos_power_form(
            |x, y| self.h.apply_raw(x, y),
            f.values(),
            s,
            KRYLOV_TOLERANCE,
            KRYLOV_MAX_ITER,
        )?;
        Ok(q * w)
    }

    pub fn norm(&self, f: &ComplexField, s: f64) -> Result<f64> {
        Ok(self.norm_sqr(f, s)?.sqrt())
    }
}

pub fn sobolev_norm(f: &ComplexField, scale: &SobolevScale<'_>, s: f64) -> Result<f64> {
    scale.norm(f, s)
}
