//! Time propagation of `u_t = -i H(t) u` with a midpoint Crank-Nicolson
//! scheme, plus a dense spectral propagator used as an oracle.

use std::cell::RefCell;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid};
use crate::operators::{
    assemble_hamiltonian, conjugate_gradient, DiscreteHamiltonian, SpectralDecomposition,
};
use crate::par;
use crate::potentials::PotentialSpec;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Relative residual of each linear solve.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Largest admissible boundary-layer mass as a fraction of `‖f‖²`.
    pub boundary_mass_limit: f64,
    /// Boundary-layer width in cells; `None` uses [`Grid::boundary_width`].
    pub boundary_width: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-12,
            max_iterations: 500,
            boundary_mass_limit: 1e-6,
            boundary_width: None,
        }
    }
}

/// Diagnostics recorded after each step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepDiagnostics {
    pub time: f64,
    pub l2_norm: f64,
    /// `⟨u, H u⟩` before the step, with `H` taken at the step midpoint.
    pub energy: f64,
    pub boundary_fraction: f64,
    pub iterations: usize,
    pub residual: f64,
}

impl StepDiagnostics {
    /// `‖u‖_{ℋ¹}` before the step.
    pub fn h1_norm(&self) -> f64 {
        self.energy.max(0.0).sqrt()
    }
}

/// Snapshots of a solution at uniformly spaced times.
#[derive(Clone, Debug)]
pub struct Trajectory {
    grid: Grid,
    dt: f64,
    initial_norm: f64,
    times: Vec<f64>,
    snapshots: Vec<ComplexField>,
    diagnostics: Vec<StepDiagnostics>,
}

impl Trajectory {
    /// Builds a trajectory from externally produced snapshots.
    pub fn from_snapshots(dt: f64, times: Vec<f64>, snapshots: Vec<ComplexField>) -> Result<Self> {
        let first = snapshots
            .first()
            .ok_or(Error::TooFewSnapshots { needed: 1, got: 0 })?;
        if times.len() != snapshots.len() {
            return Err(Error::InvalidInput(format!(
                "{} times for {} snapshots",
                times.len(),
                snapshots.len()
            )));
        }
        let grid = *first.grid();
        for s in &snapshots {
            grid.check(s.grid())?;
        }
        Ok(Self {
            grid,
            dt,
            initial_norm: first.norm(),
            times,
            snapshots,
            diagnostics: Vec::new(),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Time step of the underlying scheme.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn initial_norm(&self) -> f64 {
        self.initial_norm
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn snapshots(&self) -> &[ComplexField] {
        &self.snapshots
    }

    pub fn diagnostics(&self) -> &[StepDiagnostics] {
        &self.diagnostics
    }

    pub fn initial(&self) -> &ComplexField {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &ComplexField {
        self.snapshots.last().expect("trajectory is never empty")
    }

    /// Largest `|‖u(t_k)‖ - ‖f‖|` over the snapshots.
    pub fn max_norm_drift(&self) -> f64 {
        self.snapshots
            .iter()
            .map(|s| (s.norm() - self.initial_norm).abs())
            .fold(0.0, f64::max)
    }
}

/// Crank-Nicolson stepper:
/// `(I + i τ H) u^{k+1} = (I - i τ H) u^k` with `τ = Δt/2` and `H` at the
/// half step. The system is solved through the Hermitian positive
/// definite normal form `(I + τ² H²) y = (I - i τ H) u^k`,
/// `u^{k+1} = (I - i τ H) y`.
pub struct Propagator<'a> {
    spec: &'a PotentialSpec,
    grid: Grid,
    dt: f64,
    options: SolverOptions,
    fixed: Option<DiscreteHamiltonian>,
    time: f64,
    state: Vec<Complex64>,
    initial_norm_sqr: f64,
}

impl<'a> Propagator<'a> {
    pub fn new(
        f: &ComplexField,
        spec: &'a PotentialSpec,
        t0: f64,
        dt: f64,
        options: SolverOptions,
    ) -> Result<Self> {
        if !(dt.is_finite() && dt != 0.0) {
            return Err(Error::InvalidInput(format!(
                "time step {dt} must be finite and nonzero"
            )));
        }
        if !(options.tolerance > 0.0) {
            return Err(Error::InvalidInput(
                "solver tolerance must be positive".into(),
            ));
        }
        let grid = *f.grid();
        let fixed = spec
            .is_static()
            .then(|| assemble_hamiltonian(spec, t0, &grid));
        Ok(Self {
            spec,
            grid,
            dt,
            options,
            fixed,
            time: t0,
            state: f.values().to_vec(),
            initial_norm_sqr: f.norm_sqr(),
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn state(&self) -> ComplexField {
        ComplexField::from_raw(self.grid, self.state.clone())
    }

    pub fn state_values(&self) -> &[Complex64] {
        &self.state
    }

    /// The Hamiltonian of a static spec.
    pub fn static_hamiltonian(&self) -> Option<&DiscreteHamiltonian> {
        self.fixed.as_ref()
    }

    pub fn step(&mut self) -> Result<StepDiagnostics> {
        let tau = 0.5 * self.dt;
        let assembled;
        let h = match &self.fixed {
            Some(h) => h,
            None => {
                assembled = assemble_hamiltonian(self.spec, self.time + tau, &self.grid);
                &assembled
            }
        };
        let w = self.grid.cell_volume();
        let len = self.state.len();
        let mut hu = vec![ZERO; len];
        h.apply_raw(&self.state, &mut hu);
        let energy = par::dot(&self.state, &hu).re * w;
        let minus_i_tau = Complex64::new(0.0, -tau);
        let b: Vec<Complex64> = self
            .state
            .par_iter()
            .zip(hu.par_iter())
            .map(|(u, hu)| u + minus_i_tau * hu)
            .collect();
        let scratch = RefCell::new(vec![ZERO; len]);
        let normal = |x: &[Complex64], y: &mut [Complex64]| {
            let mut tmp = scratch.borrow_mut();
            h.apply_raw(x, &mut tmp);
            h.apply_raw(&tmp, y);
            y.par_iter_mut()
                .zip(x.par_iter())
                .for_each(|(y, x)| *y = x + *y * (tau * tau));
        };
        let mut y = b.clone();
        let outcome = conjugate_gradient(
            normal,
            &b,
            &mut y,
            self.options.tolerance,
            self.options.max_iterations,
        )?;
        h.apply_raw(&y, &mut hu);
        self.state
            .par_iter_mut()
            .zip(y.par_iter().zip(hu.par_iter()))
            .for_each(|(u, (y, hy))| *u = y + minus_i_tau * hy);
        self.time += self.dt;

        let norm_sqr = par::norm_sqr(&self.state) * w;
        let width = self
            .options
            .boundary_width
            .unwrap_or_else(|| self.grid.boundary_width());
        let layer = par::sum_by(len, |i| {
            if self.grid.in_boundary_layer(i, width) {
                self.state[i].norm_sqr()
            } else {
                0.0
            }
        }) * w;
        let boundary_fraction = if self.initial_norm_sqr > 0.0 {
            layer / self.initial_norm_sqr
        } else {
            0.0
        };
        if boundary_fraction > self.options.boundary_mass_limit {
            return Err(Error::BoundaryMass {
                time: self.time,
                fraction: boundary_fraction,
                limit: self.options.boundary_mass_limit,
            });
        }
        Ok(StepDiagnostics {
            time: self.time,
            l2_norm: norm_sqr.sqrt(),
            energy,
            boundary_fraction,
            iterations: outcome.iterations,
            residual: outcome.residual,
        })
    }
}

/// Number of steps of size `dt` covering `horizon`.
pub fn step_count(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidInput(format!(
            "time step {dt} must be positive"
        )));
    }
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "horizon {horizon} must be nonnegative"
        )));
    }
    let k = (horizon / dt).round();
    if (k * dt - horizon).abs() > 1e-9 * horizon.max(dt) {
        return Err(Error::InvalidInput(format!(
            "horizon {horizon} is not an integer multiple of the time step {dt}"
        )));
    }
    Ok(k as usize)
}

/// Propagates `f` over `[0, horizon]` keeping every step.
pub fn propagate(
    f: &ComplexField,
    spec: &PotentialSpec,
    horizon: f64,
    dt: f64,
) -> Result<Trajectory> {
    propagate_with(f, spec, horizon, dt, 1, SolverOptions::default())
}

/// Propagates `f` over `[0, horizon]` keeping every `stride`-th step and the final one.
pub fn propagate_with(
    f: &ComplexField,
    spec: &PotentialSpec,
    horizon: f64,
    dt: f64,
    stride: usize,
    options: SolverOptions,
) -> Result<Trajectory> {
    propagate_observed(f, spec, horizon, dt, stride, options, |_, _| Ok(()))
}

/// Like [`propagate_with`], calling `observe(step, propagator)` at step 0 and after every step.
pub fn propagate_observed<F>(
    f: &ComplexField,
    spec: &PotentialSpec,
    horizon: f64,
    dt: f64,
    stride: usize,
    options: SolverOptions,
    mut observe: F,
) -> Result<Trajectory>
where
    F: FnMut(usize, &Propagator<'_>) -> Result<()>,
{
    let steps = step_count(horizon, dt)?;
    if stride == 0 {
        return Err(Error::InvalidInput(
            "snapshot stride must be positive".into(),
        ));
    }
    let mut prop = Propagator::new(f, spec, 0.0, dt, options)?;
    let mut times = vec![0.0];
    let mut snapshots = vec![f.clone()];
    let mut diagnostics = Vec::with_capacity(steps);
    observe(0, &prop)?;
    for k in 1..=steps {
        let d = prop.step()?;
        diagnostics.push(d);
        observe(k, &prop)?;
        if k % stride == 0 || k == steps {
            times.push(k as f64 * dt);
            snapshots.push(prop.state());
        }
    }
    Ok(Trajectory {
        grid: *f.grid(),
        dt,
        initial_norm: f.norm(),
        times,
        snapshots,
        diagnostics,
    })
}

/// `u(t) = exp(-i t H_h) f` at each requested time by full diagonalization.
pub fn dense_propagate_times(
    f: &ComplexField,
    spec: &PotentialSpec,
    times: &[f64],
) -> Result<Trajectory> {
    if !spec.is_static() {
        return Err(Error::InvalidInput(
            "the dense oracle needs a static potential".into(),
        ));
    }
    let h = assemble_hamiltonian(spec, 0.0, f.grid());
    let spectral = SpectralDecomposition::new(&h)?;
    let snapshots = times
        .iter()
        .map(|&t| spectral.apply_function(f, |lambda| Complex64::from_polar(1.0, -t * lambda)))
        .collect::<Result<Vec<_>>>()?;
    let dt = if times.len() > 1 {
        times[1] - times[0]
    } else {
        0.0
    };
    let mut traj = Trajectory::from_snapshots(dt, times.to_vec(), snapshots)?;
    traj.initial_norm = f.norm();
    Ok(traj)
}

/// `exp(-i T H_h) f`, returned as the two-snapshot trajectory `{f, u(T)}`.
pub fn dense_propagate_oracle(
    f: &ComplexField,
    spec: &PotentialSpec,
    horizon: f64,
) -> Result<Trajectory> {
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "horizon {horizon} must be nonnegative"
        )));
    }
    dense_propagate_times(f, spec, &[0.0, horizon])
}

/// Gaussian wave packet `exp(-|x - x₀|²/(2σ²) + i k₀·x)`.
#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianPacket {
    pub center: Vec<f64>,
    pub width: f64,
    pub momentum: Vec<f64>,
}

impl GaussianPacket {
    pub fn sample(&self, g: &Grid) -> Result<ComplexField> {
        let n = g.dim();
        if self.center.len() != n || self.momentum.len() != n {
            return Err(Error::InvalidInput(format!(
                "packet center and momentum need {n} components"
            )));
        }
        if !(self.width.is_finite() && self.width > 0.0) {
            return Err(Error::InvalidInput(format!(
                "packet width {} must be positive",
                self.width
            )));
        }
        let field = g.complex_field(|x| {
            let mut r2 = 0.0;
            let mut phase = 0.0;
            for a in 0..n {
                let d = x[a] - self.center[a];
                r2 += d * d;
                phase += self.momentum[a] * x[a];
            }
            Complex64::from_polar((-r2 / (2.0 * self.width * self.width)).exp(), phase)
        });
        ComplexField::new(*g, field.into_values())
    }

    /// Sample scaled to unit discrete `L²` norm.
    pub fn sample_normalized(&self, g: &Grid) -> Result<ComplexField> {
        let u = self.sample(g)?;
        let norm = u.norm();
        if norm == 0.0 {
            return Err(Error::ZeroData);
        }
        Ok(u.scaled(Complex64::new(1.0 / norm, 0.0)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnapshotFormat {
    /// Header `re,im`, then one node per line in row-major order.
    Csv,
    /// Little-endian `f64` pairs `(re, im)` in row-major order.
    Binary,
}

pub fn write_snapshot<W: Write>(
    u: &ComplexField,
    out: &mut W,
    format: SnapshotFormat,
) -> std::io::Result<()> {
    match format {
        SnapshotFormat::Csv => {
            writeln!(out, "re,im")?;
            for v in u.values() {
                writeln!(out, "{:.16e},{:.16e}", v.re, v.im)?;
            }
        }
        SnapshotFormat::Binary => {
            for v in u.values() {
                out.write_all(&v.re.to_le_bytes())?;
                out.write_all(&v.im.to_le_bytes())?;
            }
        }
    }
    Ok(())
}
