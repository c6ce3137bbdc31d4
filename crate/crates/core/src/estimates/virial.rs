use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{norm, ComplexField, Grid, MAX_DIM};
use crate::multiplier::MultiplierFamily;
use crate::operators::{
    assemble_hamiltonian, covariant_gradient, hessian_form, multiplier_nodes, DiscreteHamiltonian,
    DoubleCommutator, MultiplierOperator, OffsetTable,
};
use crate::par;
use crate::potentials::PotentialSpec;
use crate::solver::Trajectory;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `Θ = ∫ φ_R |u|²`.
pub fn theta(u: &ComplexField, fam: &MultiplierFamily) -> f64 {
    let g = u.grid();
    let v = u.values();
    g.cell_volume() * par::sum_by(g.len(), |i| fam.phi(g.radius(i)) * v[i].norm_sqr())
}

/// Left-hand side terms of the virial identity at one time, in the
/// discrete form that sums exactly to `⟨u, [H_h, T_h] u⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VirialTerms {
    pub time: f64,
    pub theta: f64,
    /// `½ Im⟨u, T_h u⟩`, the discrete `Im ∫ ū ∇_A u·∇φ`.
    pub rhs_flux: f64,
    pub hessian: f64,
    pub bilap_ac: f64,
    pub bilap_sing: f64,
    pub potential: f64,
    pub magnetic: f64,
}

impl VirialTerms {
    pub fn lhs(&self) -> f64 {
        self.hessian + self.bilap_ac + self.bilap_sing + self.potential + self.magnetic
    }
}

/// The same terms by direct quadrature of the continuous integrands.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuadratureTerms {
    pub hessian: f64,
    pub bilap_ac: f64,
    pub bilap_sing: f64,
    pub potential: f64,
    pub magnetic: f64,
    pub rhs_flux: f64,
}

impl QuadratureTerms {
    pub fn lhs(&self) -> f64 {
        self.hessian + self.bilap_ac + self.bilap_sing + self.potential + self.magnetic
    }
}

/// Precomputed operators for evaluating virial terms on one grid.
///
/// With `Z = [K, T_h]` written as `Z_ij e^{iθ_ij} = -c_ij + i s_ij`, where
/// `θ_ij` is the line integral of `A` from `x_i` to `x_j` by the midpoint
/// rule, the quadratic form `⟨u, Z u⟩` splits into
///
/// * a Hessian part `½ Σ c_ij |e^{-iθ_ij} u_j - u_i|²`,
/// * a bilaplacian part `Σ b_i |u_i|²` with `b = Z₀·1` from the operator
///   without vector potential, split further into the cell-averaged
///   absolutely continuous density and the remainder,
/// * a magnetic remainder carrying the `s_ij` and what is left on the diagonal.
pub struct VirialCalculator {
    grid: Grid,
    fam: MultiplierFamily,
    spec: PotentialSpec,
    time: f64,
    phi: Vec<f64>,
    potential: Vec<f64>,
    t_op: MultiplierOperator,
    table: OffsetTable,
    c: Vec<f64>,
    s: Vec<f64>,
    phase: Option<Vec<Complex64>>,
    bilap: Vec<f64>,
    ac: Vec<f64>,
    mag_diag: Option<Vec<f64>>,
}

impl VirialCalculator {
    pub fn new(spec: &PotentialSpec, t: f64, g: &Grid, fam: &MultiplierFamily) -> Result<Self> {
        if fam.dim() != g.dim() {
            return Err(Error::InvalidInput(format!(
                "multiplier dimension {} differs from grid dimension {}",
                fam.dim(),
                g.dim()
            )));
        }
        let n = g.dim();
        let h = assemble_hamiltonian(spec, t, g);
        let phi = multiplier_nodes(g, fam);
        let t_op = MultiplierOperator::from_nodes(&h, &phi);
        let z = DoubleCommutator::new(&h, &phi);
        let table = z.table.clone();
        let no = table.offsets.len();
        let zero_a = spec.has_zero_vector_potential();

        // b = Z₀·1 from the operator without vector potential
        let row_sums = |zz: &DoubleCommutator| {
            let mut b = vec![0.0; g.len()];
            par::fill(&mut b, |i| {
                (0..no)
                    .filter_map(|o| zz.target(i, o).map(|_| zz.entry(i, o).re))
                    .sum()
            });
            b
        };
        let bilap = if zero_a {
            row_sums(&z)
        } else {
            let h0 = DiscreteHamiltonian::from_fn(*g, t, |_| 0.0, |_, a| a.fill(0.0));
            row_sums(&DoubleCommutator::new(&h0, &phi))
        };

        let mut c = vec![0.0; g.len() * no];
        let mut s = vec![0.0; g.len() * no];
        let mut phase = (!zero_a).then(|| vec![ZERO; g.len() * no]);
        let theta_of = |i: usize, j: usize| {
            let (xi, xj) = (g.position(i), g.position(j));
            let mut mid = [0.0; MAX_DIM];
            for a in 0..n {
                mid[a] = 0.5 * (xi[a] + xj[a]);
            }
            let mut av = [0.0; MAX_DIM];
            spec.vector_potential_at(t, &mid[..n], &mut av);
            (0..n).map(|a| av[a] * (xj[a] - xi[a])).sum::<f64>()
        };
        {
            use rayon::prelude::*;
            let rows = c.par_chunks_mut(no).zip(s.par_chunks_mut(no)).enumerate();
            match phase.as_mut() {
                Some(ph) => rows
                    .zip(ph.par_chunks_mut(no))
                    .for_each(|((i, (cr, sr)), pr)| {
                        for o in 1..no {
                            if let Some(j) = z.target(i, o) {
                                let e = Complex64::from_polar(1.0, theta_of(i, j));
                                let ze = z.entry(i, o) * e;
                                cr[o] = -ze.re;
                                sr[o] = ze.im;
                                pr[o] = e.conj();
                            }
                        }
                    }),
                None => rows.for_each(|(i, (cr, sr))| {
                    for o in 1..no {
                        if z.target(i, o).is_some() {
                            let ze = z.entry(i, o);
                            cr[o] = -ze.re;
                            sr[o] = ze.im;
                        }
                    }
                }),
            }
        }
        let mag_diag = (!zero_a).then(|| {
            let mut d = vec![0.0; g.len()];
            par::fill(&mut d, |i| {
                let off: f64 = (1..no).map(|o| c[i * no + o]).sum();
                z.entry(i, 0).re - off - bilap[i]
            });
            d
        });

        let ac = g.radial_cell_average(|r| -fam.bilap_ac(r)).into_values();

        Ok(Self {
            grid: *g,
            fam: *fam,
            spec: spec.clone(),
            time: t,
            phi,
            potential: h.potential().to_vec(),
            t_op,
            table,
            c,
            s,
            phase,
            bilap,
            ac,
            mag_diag,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn theta_raw(&self, u: &[Complex64]) -> f64 {
        self.grid.cell_volume() * par::sum_by(u.len(), |i| self.phi[i] * u[i].norm_sqr())
    }

    /// `½ Im⟨u, T_h u⟩`.
    pub fn flux_raw(&self, u: &[Complex64]) -> f64 {
        let mut tu = vec![ZERO; u.len()];
        self.t_op.apply_raw(u, &mut tu);
        0.5 * par::dot(u, &tu).im * self.grid.cell_volume()
    }

    pub fn terms(&self, u: &ComplexField) -> Result<VirialTerms> {
        self.grid.check(u.grid())?;
        Ok(self.terms_raw(u.values()))
    }

    pub fn terms_raw(&self, v: &[Complex64]) -> VirialTerms {
        let g = &self.grid;
        let w = g.cell_volume();
        let no = self.table.offsets.len();
        let len = g.len();
        let target = |i: usize, o: usize| self.table.target(g, i, o);

        let hessian = 0.5
            * w
            * par::sum_by(len, |i| {
                let mut acc = 0.0;
                for o in 1..no {
                    if let Some(j) = target(i, o) {
                        let uj = match &self.phase {
                            Some(p) => p[i * no + o] * v[j],
                            None => v[j],
                        };
                        acc += self.c[i * no + o] * (uj - v[i]).norm_sqr();
                    }
                }
                acc
            });
        let bilap_total = w * par::sum_by(len, |i| self.bilap[i] * v[i].norm_sqr());
        let bilap_ac = w * par::sum_by(len, |i| self.ac[i] * v[i].norm_sqr());
        let magnetic = match (&self.phase, &self.mag_diag) {
            (Some(p), Some(d)) => {
                w * par::sum_by(len, |i| {
                    let mut acc = d[i] * v[i].norm_sqr();
                    for o in 1..no {
                        if let Some(j) = target(i, o) {
                            acc -= self.s[i * no + o] * (p[i * no + o] * v[i].conj() * v[j]).im;
                        }
                    }
                    acc
                })
            }
            _ => 0.0,
        };
        let mut tu = vec![ZERO; len];
        self.t_op.apply_raw(v, &mut tu);
        let potential =
            2.0 * w * par::csum_by(len, |i| (v[i] * self.potential[i]).conj() * tu[i]).re;
        let rhs_flux = 0.5 * par::dot(v, &tu).im * w;
        VirialTerms {
            time: self.time,
            theta: self.theta_raw(v),
            rhs_flux,
            hessian,
            bilap_ac,
            bilap_sing: bilap_total - bilap_ac,
            potential,
            magnetic,
        }
    }

    /// Direct quadrature of the continuous integrands.
    pub fn quadrature_terms(&self, u: &ComplexField) -> Result<QuadratureTerms> {
        self.grid.check(u.grid())?;
        let g = &self.grid;
        let n = g.dim();
        let w = g.cell_volume();
        let v = u.values();
        let t = self.time;
        let grad = covariant_gradient(u, &self.spec, t);
        let hess = hessian_form(&grad, &self.fam)?;
        let hessian = 4.0 * w * par::sum_by(g.len(), |i| hess.values()[i]);
        let bilap_ac = w * par::sum_by(g.len(), |i| self.ac[i] * v[i].norm_sqr());
        let sing = self.fam.singular_parts();
        let bilap_sing = if n == 3 {
            -sing.origin_mass * origin_value(u).norm_sqr()
        } else {
            let r = self.fam.scale();
            if r > g.spacing() / 2.0 && r < g.extent() {
                -sing.surface_weight * g.shell_integral(&u.density(), r)?
            } else {
                0.0
            }
        };
        let step = g.spacing();
        let potential = -2.0
            * w
            * par::sum_by(g.len(), |i| {
                let x = g.position(i);
                let r = norm(&x[..n]);
                v[i].norm_sqr() * self.fam.phi_p(r) * self.spec.radial_derivative_at(t, &x[..n])
            });
        let magnetic = 4.0
            * w
            * par::sum_by(g.len(), |i| {
                let x = g.position(i);
                let r = norm(&x[..n]);
                let mut bt = [0.0; MAX_DIM];
                self.spec.btau_at(t, &x[..n], step, &mut bt);
                let gi = grad.at(i);
                let dot: Complex64 = (0..n).map(|a| gi[a].conj() * bt[a]).sum();
                (v[i] * self.fam.phi_p(r) * dot).im
            });
        let rhs_flux = w * par::sum_by(g.len(), |i| {
            let x = g.position(i);
            let r = norm(&x[..n]);
            let gi = grad.at(i);
            let radial: Complex64 = (0..n).map(|a| gi[a] * (x[a] / r)).sum();
            (v[i].conj() * radial).im * self.fam.phi_p(r)
        });
        Ok(QuadratureTerms {
            hessian,
            bilap_ac,
            bilap_sing,
            potential,
            magnetic,
            rhs_flux,
        })
    }
}

/// Multilinear interpolation of `u` to the origin (average of the `2^n`
/// nodes surrounding it).
pub fn origin_value(u: &ComplexField) -> Complex64 {
    let g = u.grid();
    let n = g.dim();
    let half = g.points() / 2;
    let corners = 1usize << n;
    let mut sum = ZERO;
    let mut multi = [0usize; MAX_DIM];
    for q in 0..corners {
        for a in 0..n {
            multi[a] = half - 1 + ((q >> a) & 1);
        }
        sum += u.values()[g.flat_index(&multi[..n])];
    }
    sum / corners as f64
}

/// Virial terms of `u` for `spec` at time `t`.
pub fn virial_terms(
    u: &ComplexField,
    spec: &PotentialSpec,
    t: f64,
    fam: &MultiplierFamily,
) -> Result<VirialTerms> {
    VirialCalculator::new(spec, t, u.grid(), fam)?.terms(u)
}

/// One row of the virial residual series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VirialRow {
    pub terms: VirialTerms,
    /// Centered second difference of `Θ`.
    pub theta_ddot: f64,
    /// `2 d/dt rhs_flux` by centered differences (`Θ̇ = 2 rhs_flux`).
    pub flux_rate: f64,
    /// `|LHS - flux_rate| / max(1, |LHS|)`
    pub residual: f64,
    /// `|LHS - theta_ddot| / max(1, |LHS|)`
    pub residual_theta: f64,
    pub quadrature: Option<QuadratureTerms>,
}

fn make_row(
    terms: VirialTerms,
    dt: f64,
    theta: [f64; 3],
    flux: [f64; 2],
    quadrature: Option<QuadratureTerms>,
) -> VirialRow {
    let theta_ddot = (theta[2] - 2.0 * theta[1] + theta[0]) / (dt * dt);
    let flux_rate = 2.0 * (flux[1] - flux[0]) / (2.0 * dt);
    let lhs = terms.lhs();
    let scale = lhs.abs().max(1.0);
    VirialRow {
        terms,
        theta_ddot,
        flux_rate,
        residual: (lhs - flux_rate).abs() / scale,
        residual_theta: (lhs - theta_ddot).abs() / scale,
        quadrature,
    }
}

/// Residuals at the interior snapshots of a uniformly spaced trajectory,
/// with time derivatives taken across neighbouring snapshots.
pub fn virial_residual(
    traj: &Trajectory,
    spec: &PotentialSpec,
    fam: &MultiplierFamily,
) -> Result<Vec<VirialRow>> {
    let snaps = traj.snapshots();
    if snaps.len() < 3 {
        return Err(Error::TooFewSnapshots {
            needed: 3,
            got: snaps.len(),
        });
    }
    let times = traj.times();
    let spacing = times[1] - times[0];
    if times
        .windows(2)
        .any(|w| ((w[1] - w[0]) - spacing).abs() > 1e-9 * spacing.abs())
    {
        return Err(Error::InvalidInput(
            "virial residuals need uniformly spaced snapshots".into(),
        ));
    }
    if !spec.is_static() {
        return Err(Error::InvalidInput(
            "virial residuals need a static potential".into(),
        ));
    }
    let calc = VirialCalculator::new(spec, 0.0, traj.grid(), fam)?;
    let theta: Vec<f64> = snaps.iter().map(|s| calc.theta_raw(s.values())).collect();
    let flux: Vec<f64> = snaps.iter().map(|s| calc.flux_raw(s.values())).collect();
    (1..snaps.len() - 1)
        .map(|k| {
            let mut terms = calc.terms(&snaps[k])?;
            terms.time = times[k];
            Ok(make_row(
                terms,
                spacing,
                [theta[k - 1], theta[k], theta[k + 1]],
                [flux[k - 1], flux[k + 1]],
                None,
            ))
        })
        .collect()
}

/// Collects `Θ` and the flux at every step of a propagation and the full
/// terms every `stride` steps, so residuals use the step size `Δt` rather
/// than the snapshot spacing.
pub struct VirialMonitor {
    calc: VirialCalculator,
    dt: f64,
    stride: usize,
    with_quadrature: bool,
    theta: Vec<f64>,
    flux: Vec<f64>,
    sampled: Vec<(usize, VirialTerms, Option<QuadratureTerms>)>,
}

impl VirialMonitor {
    pub fn new(
        spec: &PotentialSpec,
        g: &Grid,
        fam: &MultiplierFamily,
        dt: f64,
        stride: usize,
    ) -> Result<Self> {
        if !spec.is_static() {
            return Err(Error::InvalidInput(
                "virial residuals need a static potential".into(),
            ));
        }
        if stride == 0 {
            return Err(Error::InvalidInput(
                "snapshot stride must be positive".into(),
            ));
        }
        Ok(Self {
            calc: VirialCalculator::new(spec, 0.0, g, fam)?,
            dt,
            stride,
            with_quadrature: false,
            theta: Vec::new(),
            flux: Vec::new(),
            sampled: Vec::new(),
        })
    }

    /// Also evaluate the quadrature form of each term at sampled steps.
    pub fn with_quadrature(mut self, on: bool) -> Self {
        self.with_quadrature = on;
        self
    }

    /// Records step `k` (called in order, starting from 0).
    pub fn observe(&mut self, k: usize, u: &[Complex64]) -> Result<()> {
        if k != self.theta.len() {
            return Err(Error::InvalidInput(format!(
                "expected step {}, got {k}",
                self.theta.len()
            )));
        }
        self.theta.push(self.calc.theta_raw(u));
        self.flux.push(self.calc.flux_raw(u));
        if k % self.stride == 0 {
            let mut terms = self.calc.terms_raw(u);
            terms.time = k as f64 * self.dt;
            let quad = if self.with_quadrature {
                let field = ComplexField::from_raw(*self.calc.grid(), u.to_vec());
                Some(self.calc.quadrature_terms(&field)?)
            } else {
                None
            };
            self.sampled.push((k, terms, quad));
        }
        Ok(())
    }

    /// Rows for every sampled step that has neighbours on both sides.
    pub fn rows(&self) -> Vec<VirialRow> {
        let last = self.theta.len();
        self.sampled
            .iter()
            .filter(|(k, _, _)| *k >= 1 && k + 1 < last)
            .map(|&(k, terms, quad)| {
                make_row(
                    terms,
                    self.dt,
                    [self.theta[k - 1], self.theta[k], self.theta[k + 1]],
                    [self.flux[k - 1], self.flux[k + 1]],
                    quad,
                )
            })
            .collect()
    }

    pub fn calculator(&self) -> &VirialCalculator {
        &self.calc
    }
}

/// Largest `residual` and `residual_theta` over a series.
pub fn max_residuals(rows: &[VirialRow]) -> (f64, f64) {
    rows.iter().fold((0.0, 0.0), |(a, b), r| {
        (a.max(r.residual), b.max(r.residual_theta))
    })
}
