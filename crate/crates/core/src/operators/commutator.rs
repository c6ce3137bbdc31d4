use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::Result;
use crate::grid::{ComplexField, Grid, MAX_DIM};
use crate::multiplier::MultiplierFamily;
use crate::par;
use crate::potentials::PotentialSpec;

use super::hamiltonian::{assemble_hamiltonian, DiscreteHamiltonian};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Node values `φ_R(|x_i|)`.
pub fn multiplier_nodes(g: &Grid, fam: &MultiplierFamily) -> Vec<f64> {
    let mut phi = vec![0.0; g.len()];
    par::fill(&mut phi, |i| fam.phi(g.radius(i)));
    phi
}

/// `T_h = -[H_h, φ]`, the discrete `2∇φ·∇_A + Δφ`.
///
/// Entries are `T_ij = K_ij (φ_i - φ_j)` with `K` the kinetic part of
/// `H_h`, so `T_h` is exactly skew-adjoint.
#[derive(Clone, Debug)]
pub struct MultiplierOperator {
    grid: Grid,
    /// `upper[a][i] = T_{i, i+e_a}`.
    upper: Vec<Vec<Complex64>>,
}

impl MultiplierOperator {
    pub fn new(h: &DiscreteHamiltonian, fam: &MultiplierFamily) -> Self {
        let g = *h.grid();
        let phi = multiplier_nodes(&g, fam);
        Self::from_nodes(h, &phi)
    }

    /// Uses arbitrary node values in place of `φ_R`.
    pub fn from_nodes(h: &DiscreteHamiltonian, phi: &[f64]) -> Self {
        let g = *h.grid();
        let points = g.points();
        let upper = (0..g.dim())
            .map(|a| {
                let s = g.stride(a);
                let k = h.upper(a);
                let mut t = vec![ZERO; g.len()];
                par::fill(&mut t, |i| {
                    if (i / s) % points + 1 < points {
                        k[i] * (phi[i] - phi[i + s])
                    } else {
                        ZERO
                    }
                });
                t
            })
            .collect();
        Self { grid: g, upper }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn apply_raw(&self, u: &[Complex64], out: &mut [Complex64]) {
        let g = &self.grid;
        let points = g.points();
        let strides: Vec<usize> = (0..g.dim()).map(|a| g.stride(a)).collect();
        par::fill(out, |i| {
            let mut acc = ZERO;
            for (a, &s) in strides.iter().enumerate() {
                let k = (i / s) % points;
                if k + 1 < points {
                    acc += self.upper[a][i] * u[i + s];
                }
                if k > 0 {
                    acc -= self.upper[a][i - s].conj() * u[i - s];
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
}

/// Applies `T_h` for the Hamiltonian of `spec` at time `t`.
pub fn apply_t(
    u: &ComplexField,
    fam: &MultiplierFamily,
    spec: &PotentialSpec,
    t: f64,
) -> Result<ComplexField> {
    let h = assemble_hamiltonian(spec, t, u.grid());
    MultiplierOperator::new(&h, fam).apply(u)
}

/// Relative offsets reachable by two stencil steps, with lookup tables.
#[derive(Clone, Debug)]
pub(crate) struct OffsetTable {
    pub offsets: Vec<[i32; MAX_DIM]>,
    /// `pair[s1 * steps + s2]` is the offset index of step `s1` followed by `s2`.
    pub pair: Vec<usize>,
    pub steps: usize,
}

impl OffsetTable {
    pub fn new(n: usize) -> Self {
        let steps = 2 * n + 1;
        let step_vec = |s: usize| {
            let mut v = [0i32; MAX_DIM];
            if s > 0 {
                v[(s - 1) / 2] = if s % 2 == 1 { 1 } else { -1 };
            }
            v
        };
        let mut offsets: Vec<[i32; MAX_DIM]> = vec![[0; MAX_DIM]];
        let mut pair = vec![0; steps * steps];
        for s1 in 0..steps {
            for s2 in 0..steps {
                let (a, b) = (step_vec(s1), step_vec(s2));
                let mut d = [0i32; MAX_DIM];
                for k in 0..n {
                    d[k] = a[k] + b[k];
                }
                let idx = match offsets.iter().position(|o| *o == d) {
                    Some(idx) => idx,
                    None => {
                        offsets.push(d);
                        offsets.len() - 1
                    }
                };
                pair[s1 * steps + s2] = idx;
            }
        }
        Self {
            offsets,
            pair,
            steps,
        }
    }

    pub fn step_offset(s: usize, g: &Grid, i: usize) -> Option<usize> {
        if s == 0 {
            Some(i)
        } else {
            g.neighbor(i, (s - 1) / 2, s % 2 == 1)
        }
    }

    /// Neighbour `i + offset` if it lies in the box.
    pub fn target(&self, g: &Grid, i: usize, o: usize) -> Option<usize> {
        let d = &self.offsets[o];
        let points = g.points() as i64;
        let mut j = i as i64;
        for a in 0..g.dim() {
            if d[a] != 0 {
                let k = g.axis_index(i, a) as i64 + d[a] as i64;
                if k < 0 || k >= points {
                    return None;
                }
                j += d[a] as i64 * g.stride(a) as i64;
            }
        }
        Some(j as usize)
    }
}

/// The kinetic double commutator `Z = [K, T_h]` stored by offset.
///
/// `Z_ij = Σ_k K_ik K_kj (2φ_k - φ_i - φ_j)`; nonzero only for offsets
/// `j - i` of at most two stencil steps.
#[derive(Clone, Debug)]
pub struct DoubleCommutator {
    grid: Grid,
    pub(crate) table: OffsetTable,
    /// `entries[i * offsets + o] = Z_{i, i + offset_o}`.
    pub(crate) entries: Vec<Complex64>,
}

impl DoubleCommutator {
    pub fn new(h: &DiscreteHamiltonian, phi: &[f64]) -> Self {
        let g = *h.grid();
        let table = OffsetTable::new(g.dim());
        let no = table.offsets.len();
        let steps = table.steps;
        let mut entries = vec![ZERO; g.len() * no];
        entries.par_chunks_mut(no).enumerate().for_each(|(i, row)| {
            for s1 in 0..steps {
                let Some(k) = OffsetTable::step_offset(s1, &g, i) else {
                    continue;
                };
                let kik = h.kinetic_step(i, s1);
                for s2 in 0..steps {
                    let Some(j) = OffsetTable::step_offset(s2, &g, k) else {
                        continue;
                    };
                    let kkj = h.kinetic_step(k, s2);
                    row[table.pair[s1 * steps + s2]] +=
                        kik * kkj * (2.0 * phi[k] - phi[i] - phi[j]);
                }
            }
        });
        Self {
            grid: g,
            table,
            entries,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn offsets(&self) -> usize {
        self.table.offsets.len()
    }

    pub fn entry(&self, i: usize, o: usize) -> Complex64 {
        self.entries[i * self.offsets() + o]
    }

    pub fn target(&self, i: usize, o: usize) -> Option<usize> {
        self.table.target(&self.grid, i, o)
    }

    /// `⟨u, Z u⟩` (real because `Z` is Hermitian).
    pub fn quadratic_form(&self, u: &ComplexField) -> Result<f64> {
        self.grid.check(u.grid())?;
        let v = u.values();
        let no = self.offsets();
        let s = par::sum_by(self.grid.len(), |i| {
            let mut acc = ZERO;
            for o in 0..no {
                if let Some(j) = self.target(i, o) {
                    acc += v[i].conj() * self.entries[i * no + o] * v[j];
                }
            }
            acc.re
        });
        Ok(s * self.grid.cell_volume())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{ElectricFamily, MagneticFamily};
    use rand::{Rng, SeedableRng};

    fn random_field(g: Grid, seed: u64) -> ComplexField {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let v = (0..g.len())
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        ComplexField::new(g, v).unwrap()
    }

    fn magnetic_spec() -> PotentialSpec {
        PotentialSpec::new(
            ElectricFamily::Polynomial { c: 1.0 },
            MagneticFamily::ConstantField { b: 0.7 },
            2.0,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn t_is_skew() {
        let g = Grid::new(3, 2.0, 8).unwrap();
        let h = assemble_hamiltonian(&magnetic_spec(), 0.0, &g);
        let fam = MultiplierFamily::new(1.0, 1.0, 3).unwrap();
        let t = MultiplierOperator::new(&h, &fam);
        let (f, u) = (random_field(g, 1), random_field(g, 2));
        let lhs = t.apply(&f).unwrap().inner(&u).unwrap() + f.inner(&t.apply(&u).unwrap()).unwrap();
        assert!(lhs.norm() < 1e-12 * f.norm() * u.norm());
    }

    #[test]
    fn t_equals_commutator_with_phi() {
        let g = Grid::new(3, 2.0, 6).unwrap();
        let h = assemble_hamiltonian(&magnetic_spec(), 0.0, &g);
        let fam = MultiplierFamily::new(1.0, 0.7, 3).unwrap();
        let phi = multiplier_nodes(&g, &fam);
        let t = MultiplierOperator::new(&h, &fam);
        let u = random_field(g, 5);
        let phi_u = ComplexField::new(g, u.values().iter().zip(&phi).map(|(v, p)| v * p).collect())
            .unwrap();
        let h_phi_u = h.apply(&phi_u).unwrap();
        let hu = h.apply(&u).unwrap();
        let tu = t.apply(&u).unwrap();
        for i in 0..g.len() {
            let expected = -(h_phi_u.values()[i] - phi[i] * hu.values()[i]);
            assert!((tu.values()[i] - expected).norm() < 1e-9);
        }
    }

    #[test]
    fn double_commutator_matches_products() {
        let g = Grid::new(3, 2.0, 6).unwrap();
        let spec = magnetic_spec();
        let h = assemble_hamiltonian(&spec, 0.0, &g);
        let fam = MultiplierFamily::new(1.0, 0.7, 3).unwrap();
        let phi = multiplier_nodes(&g, &fam);
        let z = DoubleCommutator::new(&h, &phi);
        let t = MultiplierOperator::new(&h, &fam);
        let u = random_field(g, 9);
        // ⟨u, [K, T] u⟩ = 2 Re⟨K u, T u⟩
        let kin = DiscreteHamiltonian::from_fn(
            g,
            0.0,
            |_| 0.0,
            |x, a| spec.vector_potential_at(0.0, x, a),
        );
        let ku = kin.apply(&u).unwrap();
        let tu = t.apply(&u).unwrap();
        let expected = 2.0 * ku.inner(&tu).unwrap().re;
        let got = z.quadratic_form(&u).unwrap();
        assert!(
            (got - expected).abs() < 1e-9 * expected.abs().max(1.0),
            "{got} vs {expected}"
        );
    }
}
