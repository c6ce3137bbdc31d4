use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid};

use super::hamiltonian::DiscreteHamiltonian;

/// Largest system decomposed densely.
pub const DENSE_LIMIT: usize = 4096;

/// Full eigendecomposition `H_h = Q Λ Q*`.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    grid: Grid,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<Complex64>,
}

impl SpectralDecomposition {
    pub fn new(h: &DiscreteHamiltonian) -> Result<Self> {
        Self::with_limit(h, DENSE_LIMIT)
    }

    pub fn with_limit(h: &DiscreteHamiltonian, limit: usize) -> Result<Self> {
        let g = *h.grid();
        if g.len() > limit {
            return Err(Error::SizeCap {
                unknowns: g.len(),
                limit,
            });
        }
        let dense = h.to_dense();
        let (eigenvalues, eigenvectors) = if h.is_real() {
            let real = dense.map(|c| c.re);
            let eig = SymmetricEigen::new(real);
            (
                eig.eigenvalues,
                eig.eigenvectors.map(|v| Complex64::new(v, 0.0)),
            )
        } else {
            let eig = SymmetricEigen::new(dense);
            (eig.eigenvalues, eig.eigenvectors)
        };
        let mut order: Vec<usize> = (0..eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eigenvalues[a].total_cmp(&eigenvalues[b]));
        let values = order.iter().map(|&k| eigenvalues[k]).collect();
        let vectors = eigenvectors.select_columns(order.iter());
        Ok(Self {
            grid: g,
            eigenvalues: values,
            eigenvectors: vectors,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Eigenvalues in increasing order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Normalized eigenvector `j` as a field (unit discrete `L²` norm).
    pub fn eigenvector(&self, j: usize) -> ComplexField {
        let scale = 1.0 / self.grid.cell_volume().sqrt();
        let v = self
            .eigenvectors
            .column(j)
            .iter()
            .map(|c| c * scale)
            .collect();
        ComplexField::from_raw(self.grid, v)
    }

    /// Coefficients `Q* f`.
    fn coefficients(&self, f: &ComplexField) -> Result<nalgebra::DVector<Complex64>> {
        self.grid.check(f.grid())?;
        let v = nalgebra::DVector::from_column_slice(f.values());
        Ok(self.eigenvectors.ad_mul(&v))
    }

    /// `g(H_h) f`.
    pub fn apply_function<F>(&self, f: &ComplexField, func: F) -> Result<ComplexField>
    where
        F: Fn(f64) -> Complex64,
    {
        let mut c = self.coefficients(f)?;
        for (cj, &lambda) in c.iter_mut().zip(&self.eigenvalues) {
            *cj *= func(lambda);
        }
        let out = &self.eigenvectors * c;
        Ok(ComplexField::from_raw(
            self.grid,
            out.iter().copied().collect(),
        ))
    }

    /// `‖g(H_h) f‖²` for a real spectral weight `|g|² = weight`.
    pub fn weighted_norm_sqr<F>(&self, f: &ComplexField, weight: F) -> Result<f64>
    where
        F: Fn(f64) -> f64,
    {
        let c = self.coefficients(f)?;
        let s: f64 = c
            .iter()
            .zip(&self.eigenvalues)
            .map(|(cj, &lambda)| cj.norm_sqr() * weight(lambda))
            .sum();
        Ok(s * self.grid.cell_volume())
    }
}
