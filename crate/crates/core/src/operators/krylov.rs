//! Conjugate gradients, Lanczos quadrature and a lowest-eigenpair solver.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::ComplexField;
use crate::par;

use super::hamiltonian::DiscreteHamiltonian;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    /// Final `‖b - A x‖ / ‖b‖`, recomputed from scratch.
    pub residual: f64,
}

/// `y += a x`
fn axpy(y: &mut [Complex64], a: Complex64, x: &[Complex64]) {
    y.par_iter_mut()
        .zip(x.par_iter())
        .for_each(|(y, x)| *y += a * x);
}

/// Solves `A x = b` for Hermitian positive definite `A`, starting from `x`.
pub fn conjugate_gradient<F>(
    apply: F,
    b: &[Complex64],
    x: &mut [Complex64],
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome>
where
    F: Fn(&[Complex64], &mut [Complex64]),
{
    let len = b.len();
    let b_norm = par::norm_sqr(b).sqrt();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = ZERO);
        return Ok(CgOutcome {
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut ax = vec![ZERO; len];
    let true_residual = |x: &[Complex64], ax: &mut Vec<Complex64>| {
        apply(x, ax);
        par::sum_by(len, |i| (b[i] - ax[i]).norm_sqr()).sqrt() / b_norm
    };
    apply(x, &mut ax);
    let mut r: Vec<Complex64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut p = r.clone();
    let mut rr = par::norm_sqr(&r);
    let mut ap = vec![ZERO; len];
    for it in 0..max_iter {
        if rr.sqrt() <= tol * b_norm {
            let residual = true_residual(x, &mut ax);
            if residual <= tol {
                return Ok(CgOutcome {
                    iterations: it,
                    residual,
                });
            }
            // restart from the true residual
            r.par_iter_mut()
                .zip(b.par_iter().zip(ax.par_iter()))
                .for_each(|(r, (b, a))| *r = b - a);
            p.copy_from_slice(&r);
            rr = par::norm_sqr(&r);
        }
        apply(&p, &mut ap);
        let pap = par::dot(&p, &ap).re;
        let alpha = rr / pap;
        axpy(x, Complex64::new(alpha, 0.0), &p);
        axpy(&mut r, Complex64::new(-alpha, 0.0), &ap);
        let rr_new = par::norm_sqr(&r);
        let beta = rr_new / rr;
        rr = rr_new;
        p.par_iter_mut()
            .zip(r.par_iter())
            .for_each(|(p, r)| *p = r + *p * beta);
    }
    let residual = true_residual(x, &mut ax);
    if residual <= tol {
        Ok(CgOutcome {
            iterations: max_iter,
            residual,
        })
    } else {
        Err(Error::SolveNotConverged {
            iterations: max_iter,
            residual,
        })
    }
}

/// Lanczos recurrence state without stored basis vectors.
struct Lanczos<'a, F> {
    apply: &'a F,
    prev: Vec<Complex64>,
    cur: Vec<Complex64>,
    work: Vec<Complex64>,
    alphas: Vec<f64>,
    betas: Vec<f64>,
    exhausted: bool,
}

impl<'a, F> Lanczos<'a, F>
where
    F: Fn(&[Complex64], &mut [Complex64]),
{
    fn new(apply: &'a F, start: &[Complex64]) -> Self {
        let norm = par::norm_sqr(start).sqrt();
        let cur = start.iter().map(|v| v / norm).collect();
        Self {
            apply,
            prev: vec![ZERO; start.len()],
            cur,
            work: vec![ZERO; start.len()],
            alphas: Vec::new(),
            betas: Vec::new(),
            exhausted: false,
        }
    }

    fn step(&mut self) {
        (self.apply)(&self.cur, &mut self.work);
        let beta_prev = self.betas.last().copied().unwrap_or(0.0);
        axpy(&mut self.work, Complex64::new(-beta_prev, 0.0), &self.prev);
        let alpha = par::dot(&self.cur, &self.work).re;
        axpy(&mut self.work, Complex64::new(-alpha, 0.0), &self.cur);
        let beta = par::norm_sqr(&self.work).sqrt();
        self.alphas.push(alpha);
        let scale = alpha.abs().max(beta_prev).max(1e-300);
        if beta <= 1e-14 * scale {
            self.exhausted = true;
            self.betas.push(0.0);
            return;
        }
        self.betas.push(beta);
        std::mem::swap(&mut self.prev, &mut self.cur);
        self.cur
            .par_iter_mut()
            .zip(self.work.par_iter())
            .for_each(|(c, w)| *c = w / beta);
    }

    fn ritz(&self) -> SymmetricEigen<f64, nalgebra::Dyn> {
        let k = self.alphas.len();
        let mut t = DMatrix::zeros(k, k);
        for j in 0..k {
            t[(j, j)] = self.alphas[j];
            if j + 1 < k {
                t[(j, j + 1)] = self.betas[j];
                t[(j + 1, j)] = self.betas[j];
            }
        }
        SymmetricEigen::new(t)
    }
}

/// Gauss-quadrature estimate of `f* A^s f` for Hermitian positive `A`.
pub fn lanczos_power_form<F>(
    apply: F,
    f: &[Complex64],
    s: f64,
    tol: f64,
    max_iter: usize,
) -> Result<f64>
where
    F: Fn(&[Complex64], &mut [Complex64]),
{
    let norm2 = par::norm_sqr(f);
    if norm2 == 0.0 {
        return Ok(0.0);
    }
    let mut lanczos = Lanczos::new(&apply, f);
    let mut last = f64::NAN;
    let mut change = f64::INFINITY;
    let mut stable = 0;
    for k in 1..=max_iter {
        lanczos.step();
        if !(lanczos.exhausted || k % 4 == 0 || k < 8) {
            continue;
        }
        let eig = lanczos.ritz();
        let estimate: f64 = eig
            .eigenvalues
            .iter()
            .zip(eig.eigenvectors.row(0).iter())
            .map(|(theta, v0)| v0 * v0 * theta.max(0.0).powf(s))
            .sum::<f64>()
            * norm2;
        if lanczos.exhausted {
            return Ok(estimate);
        }
        change = ((estimate - last) / estimate).abs();
        last = estimate;
        stable = if change <= tol { stable + 1 } else { 0 };
        if stable >= 2 {
            return Ok(estimate);
        }
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        change,
    })
}

/// Lowest eigenpair of `H_h` by Lanczos bracketing and shifted inverse iteration.
///
/// Returns `(λ, u)` with `‖u‖ = 1` and `‖H u - λ u‖ ≤ tol · λ`.
pub fn ground_state(
    h: &DiscreteHamiltonian,
    start: &ComplexField,
    tol: f64,
) -> Result<(f64, ComplexField)> {
    let g = *h.grid();
    g.check(start.grid())?;
    let apply = |x: &[Complex64], y: &mut [Complex64]| h.apply_raw(x, y);
    let mut lanczos = Lanczos::new(&apply, start.values());
    let mut lowest = f64::INFINITY;
    let mut gap = f64::NAN;
    for k in 1..=400 {
        lanczos.step();
        if k % 5 != 0 && !lanczos.exhausted {
            continue;
        }
        let eig = lanczos.ritz();
        let mut theta: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        theta.sort_by(|a, b| a.total_cmp(b));
        let t1 = theta[0];
        let next = theta
            .iter()
            .copied()
            .find(|&t| t > t1 + 1e-6 * t1.abs().max(1.0));
        let converged = ((lowest - t1) / t1).abs() < 1e-13;
        lowest = t1;
        if let Some(t2) = next {
            gap = t2 - t1;
        }
        if (converged && gap.is_finite()) || lanczos.exhausted {
            break;
        }
    }
    if !gap.is_finite() {
        gap = lowest.abs().max(1.0);
    }
    let shift = lowest - 0.1 * gap;
    let shifted = |x: &[Complex64], y: &mut [Complex64]| {
        h.apply_raw(x, y);
        y.par_iter_mut()
            .zip(x.par_iter())
            .for_each(|(y, x)| *y -= x * shift);
    };
    let norm = |v: &[Complex64]| (par::norm_sqr(v) * g.cell_volume()).sqrt();
    let mut x: Vec<Complex64> = start.values().to_vec();
    let n0 = norm(&x);
    x.iter_mut().for_each(|v| *v /= n0);
    let mut hx = vec![ZERO; x.len()];
    let mut residual = f64::INFINITY;
    for _ in 0..200 {
        let mut y = x.clone();
        conjugate_gradient(shifted, &x, &mut y, 1e-12, 20_000)?;
        let ny = norm(&y);
        x = y.into_iter().map(|v| v / ny).collect();
        h.apply_raw(&x, &mut hx);
        let lambda = par::dot(&x, &hx).re * g.cell_volume();
        residual = par::sum_by(x.len(), |i| (hx[i] - x[i] * lambda).norm_sqr()).sqrt()
            * g.cell_volume().sqrt();
        if residual <= tol * lambda.abs() {
            return Ok((lambda, ComplexField::from_raw(g, x)));
        }
    }
    Err(Error::NotConverged {
        iterations: 200,
        change: residual,
    })
}
