use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::Result;
use crate::grid::{ComplexField, Grid, MAX_DIM};
use crate::par;
use crate::potentials::PotentialSpec;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `H_h = D†D + V` on a grid with Dirichlet walls.
///
/// `D` maps node values to links. For the link from node `i` to `i + e_a`
/// with `a = A_a` at the link midpoint,
///
/// ```text
/// (Du) = (1/h - i a/2) u_{i+e_a} + (-1/h - i a/2) u_i
/// ```
///
/// and values past the box are zero. With `A = 0` this is the usual
/// `(2n+1)`-point Dirichlet Laplacian plus `V`.
#[derive(Clone, Debug)]
pub struct DiscreteHamiltonian {
    grid: Grid,
    time: f64,
    potential: Vec<f64>,
    kinetic_diag: Vec<f64>,
    /// `upper[a][i] = K_{i, i+e_a}`, zero on the far face.
    upper: Vec<Vec<Complex64>>,
    /// Midpoint `A_a` on the link from `i` to `i + e_a`.
    link_a: Vec<Vec<f64>>,
    /// Midpoint `A_a` on the ghost link entering nodes with `k_a = 0`.
    ghost_a: Vec<Vec<f64>>,
    zero_vector_potential: bool,
}

#[inline]
fn link_coefficients(h: f64, a: f64) -> (Complex64, Complex64) {
    (
        Complex64::new(1.0 / h, -0.5 * a),
        Complex64::new(-1.0 / h, -0.5 * a),
    )
}

impl DiscreteHamiltonian {
    /// Assembles from point evaluations of `V` and `A`.
    pub fn from_fn<V, A>(grid: Grid, time: f64, v: V, a: A) -> Self
    where
        V: Fn(&[f64]) -> f64 + Sync,
        A: Fn(&[f64], &mut [f64]) + Sync,
    {
        let n = grid.dim();
        let h = grid.spacing();
        let len = grid.len();
        let points = grid.points();

        let mut potential = vec![0.0; len];
        par::fill(&mut potential, |i| v(&grid.position(i)[..n]));

        let eval_link = |i: usize, axis: usize, shift: f64| {
            let mut x = grid.position(i);
            x[axis] += shift;
            let mut out = [0.0; MAX_DIM];
            a(&x[..n], &mut out);
            out[axis]
        };
        let mut link_a = Vec::with_capacity(n);
        let mut ghost_a = Vec::with_capacity(n);
        for axis in 0..n {
            let mut up = vec![0.0; len];
            par::fill(&mut up, |i| eval_link(i, axis, 0.5 * h));
            let mut ghost = vec![0.0; len];
            let stride = grid.stride(axis);
            par::fill(&mut ghost, |i| {
                if (i / stride) % points == 0 {
                    eval_link(i, axis, -0.5 * h)
                } else {
                    0.0
                }
            });
            link_a.push(up);
            ghost_a.push(ghost);
        }
        let zero_vector_potential = link_a
            .iter()
            .chain(&ghost_a)
            .all(|v| v.iter().all(|&x| x == 0.0));

        let mut upper = Vec::with_capacity(n);
        for axis in 0..n {
            let stride = grid.stride(axis);
            let mut u = vec![ZERO; len];
            par::fill(&mut u, |i| {
                if (i / stride) % points + 1 < points {
                    let (alpha, beta) = link_coefficients(h, link_a[axis][i]);
                    beta.conj() * alpha
                } else {
                    ZERO
                }
            });
            upper.push(u);
        }

        let mut kinetic_diag = vec![0.0; len];
        par::fill(&mut kinetic_diag, |i| {
            let mut d = 0.0;
            for axis in 0..n {
                let stride = grid.stride(axis);
                let (_, beta) = link_coefficients(h, link_a[axis][i]);
                d += beta.norm_sqr();
                let low = if (i / stride) % points == 0 {
                    ghost_a[axis][i]
                } else {
                    link_a[axis][i - stride]
                };
                d += link_coefficients(h, low).0.norm_sqr();
            }
            d
        });

        Self {
            grid,
            time,
            potential,
            kinetic_diag,
            upper,
            link_a,
            ghost_a,
            zero_vector_potential,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn kinetic_diagonal(&self) -> &[f64] {
        &self.kinetic_diag
    }

    /// `K_{i, i+e_a}` for every node `i`.
    pub fn upper(&self, axis: usize) -> &[Complex64] {
        &self.upper[axis]
    }

    /// True when every link carries `A = 0`.
    pub fn is_real(&self) -> bool {
        self.zero_vector_potential
    }

    /// Kinetic entry `K_{i, i+s}` for a step `s ∈ {0, ±e_a}`, encoded as
    /// `0` for the diagonal, `1 + 2a` for `+e_a` and `2 + 2a` for `-e_a`.
    /// The caller guarantees the neighbour exists.
    #[inline]
    pub(crate) fn kinetic_step(&self, i: usize, step: usize) -> Complex64 {
        if step == 0 {
            Complex64::new(self.kinetic_diag[i], 0.0)
        } else {
            let axis = (step - 1) / 2;
            if step % 2 == 1 {
                self.upper[axis][i]
            } else {
                self.upper[axis][i - self.grid.stride(axis)].conj()
            }
        }
    }

    /// `out = H u` on raw node arrays.
    pub fn apply_raw(&self, u: &[Complex64], out: &mut [Complex64]) {
        let g = &self.grid;
        let n = g.dim();
        let points = g.points();
        let strides: Vec<usize> = (0..n).map(|a| g.stride(a)).collect();
        par::fill(out, |i| {
            let mut acc = u[i] * (self.kinetic_diag[i] + self.potential[i]);
            for (a, &s) in strides.iter().enumerate() {
                let k = (i / s) % points;
                if k + 1 < points {
                    acc += self.upper[a][i] * u[i + s];
                }
                if k > 0 {
                    acc += self.upper[a][i - s].conj() * u[i - s];
                }
            }
            acc
        });
    }

    pub fn apply(&self, u: &ComplexField) -> Result<ComplexField> {
        self.grid.check(u.grid())?;
        let mut out = vec![ZERO; self.grid.len()];
        self.apply_raw(u.values(), &mut out);
        Ok(ComplexField::from_raw(self.grid, out))
    }

    /// `⟨u, H u⟩ = ‖Du‖² + ∫V|u|²`.
    pub fn quadratic_form(&self, u: &ComplexField) -> Result<f64> {
        let hu = self.apply(u)?;
        Ok(u.inner(&hu)?.re)
    }

    /// Link values of `Du`: `(forward[a][i], ghost[a][i])`, where `ghost`
    /// is only nonzero on nodes with `k_a = 0`.
    fn link_values(&self, u: &[Complex64]) -> Vec<(Vec<Complex64>, Vec<Complex64>)> {
        let g = &self.grid;
        let h = g.spacing();
        let points = g.points();
        (0..g.dim())
            .map(|axis| {
                let s = g.stride(axis);
                let mut fwd = vec![ZERO; g.len()];
                par::fill(&mut fwd, |i| {
                    let (alpha, beta) = link_coefficients(h, self.link_a[axis][i]);
                    let next = if (i / s) % points + 1 < points {
                        u[i + s]
                    } else {
                        ZERO
                    };
                    alpha * next + beta * u[i]
                });
                let mut ghost = vec![ZERO; g.len()];
                par::fill(&mut ghost, |i| {
                    if (i / s) % points == 0 {
                        link_coefficients(h, self.ghost_a[axis][i]).0 * u[i]
                    } else {
                        ZERO
                    }
                });
                (fwd, ghost)
            })
            .collect()
    }

    /// `‖D u‖²`, the discrete `‖∇_A u‖²`.
    pub fn kinetic_energy(&self, u: &ComplexField) -> Result<f64> {
        self.grid.check(u.grid())?;
        let links = self.link_values(u.values());
        let total: f64 = links
            .iter()
            .map(|(f, gh)| par::norm_sqr(f) + par::norm_sqr(gh))
            .sum();
        Ok(total * self.grid.cell_volume())
    }

    /// Nodewise `|∇_A u|²` obtained by splitting each link's `|Du|²`
    /// equally between its two end nodes. Sums to [`Self::kinetic_energy`].
    pub fn gradient_density(&self, u: &ComplexField) -> Result<Vec<f64>> {
        self.grid.check(u.grid())?;
        let g = &self.grid;
        let points = g.points();
        let links = self.link_values(u.values());
        let mut density = vec![0.0; g.len()];
        par::fill(&mut density, |i| {
            let mut d = 0.0;
            for (axis, (fwd, ghost)) in links.iter().enumerate() {
                let s = g.stride(axis);
                let k = (i / s) % points;
                // links leaving the box belong to their interior node alone
                let own = if k + 1 < points { 0.5 } else { 1.0 };
                d += own * fwd[i].norm_sqr();
                d += if k == 0 {
                    ghost[i].norm_sqr()
                } else {
                    0.5 * fwd[i - s].norm_sqr()
                };
            }
            d
        });
        Ok(density)
    }

    /// Dense Hermitian matrix of `H_h`.
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let g = &self.grid;
        let len = g.len();
        let points = g.points();
        let mut m = DMatrix::from_element(len, len, ZERO);
        for i in 0..len {
            m[(i, i)] = Complex64::new(self.kinetic_diag[i] + self.potential[i], 0.0);
            for a in 0..g.dim() {
                let s = g.stride(a);
                if (i / s) % points + 1 < points {
                    m[(i, i + s)] = self.upper[a][i];
                    m[(i + s, i)] = self.upper[a][i].conj();
                }
            }
        }
        m
    }
}

/// Assembles `H_h(t)` for a potential spec.
pub fn assemble_hamiltonian(spec: &PotentialSpec, t: f64, g: &Grid) -> DiscreteHamiltonian {
    DiscreteHamiltonian::from_fn(
        *g,
        t,
        |x| spec.potential_at(t, x),
        |x, out| spec.vector_potential_at(t, x, out),
    )
}
