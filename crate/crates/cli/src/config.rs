use std::path::PathBuf;

use magvirial::grid::{ComplexField, Grid};
use magvirial::multiplier::MultiplierFamily;
use magvirial::potentials::{PotentialConfig, PotentialSpec};
use magvirial::solver::{step_count, GaussianPacket, SolverOptions};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Failure;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    pub potential: PotentialConfig,
    #[serde(default)]
    pub multiplier: MultiplierConfig,
    pub time: TimeConfig,
    pub data: DataConfig,
    #[serde(default)]
    pub estimate: EstimateConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub hardy: HardyConfig,
    #[serde(default)]
    pub gauge_check: GaugeCheckConfig,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub extent: f64,
    pub points: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiplierConfig {
    #[serde(rename = "M", default = "one")]
    pub m: f64,
    /// Scale used by `virial-check`.
    #[serde(rename = "R", default = "one")]
    pub r: f64,
}

impl Default for MultiplierConfig {
    fn default() -> Self {
        Self { m: 1.0, r: 1.0 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub horizon: f64,
    pub dt: f64,
    pub snapshot_stride: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    Gaussian {
        center: Vec<f64>,
        width: f64,
        momentum: Vec<f64>,
    },
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    #[serde(rename = "R_set", default)]
    pub r_set: Option<Vec<f64>>,
    #[serde(default)]
    pub use_repulsive_rhs: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Binary,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub directory: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: None,
            formats: default_formats(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_boundary_mass_limit")]
    pub boundary_mass_limit: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: default_tolerance(),
            max_iterations: default_max_iterations(),
            boundary_mass_limit: default_boundary_mass_limit(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardyConfig {
    /// Seeded random states added to the data and its snapshots.
    #[serde(default = "default_random_states")]
    pub random_states: usize,
}

impl Default for HardyConfig {
    fn default() -> Self {
        Self {
            random_states: default_random_states(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeCheckConfig {
    #[serde(default = "one")]
    pub c0: f64,
}

impl Default for GaugeCheckConfig {
    fn default() -> Self {
        Self { c0: 1.0 }
    }
}

fn one() -> f64 {
    1.0
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv]
}

fn default_tolerance() -> f64 {
    SolverOptions::default().tolerance
}

fn default_max_iterations() -> usize {
    SolverOptions::default().max_iterations
}

fn default_boundary_mass_limit() -> f64 {
    SolverOptions::default().boundary_mass_limit
}

fn default_random_states() -> usize {
    4
}

/// A parsed and validated experiment.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub sha256: String,
    pub grid: Grid,
    pub spec: PotentialSpec,
    pub family: MultiplierFamily,
    pub data: ComplexField,
    pub steps: usize,
    pub options: SolverOptions,
}

impl Experiment {
    pub fn dt(&self) -> f64 {
        self.config.time.dt
    }

    pub fn horizon(&self) -> f64 {
        self.config.time.horizon
    }

    pub fn stride(&self) -> usize {
        self.config.time.snapshot_stride
    }

    pub fn wants(&self, format: Format) -> bool {
        self.config.output.formats.contains(&format)
    }

    /// Times of the snapshots kept by a propagation.
    pub fn snapshot_times(&self) -> Vec<f64> {
        let mut times: Vec<f64> = (0..=self.steps)
            .filter(|k| k % self.stride() == 0 || *k == self.steps)
            .map(|k| k as f64 * self.dt())
            .collect();
        times.dedup();
        times
    }
}

fn invalid(path: &str, message: impl std::fmt::Display) -> Failure {
    Failure::Config(format!("{path}: {message}"))
}

pub fn parse(bytes: &[u8]) -> Result<ExperimentConfig, Failure> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        Failure::Config(format!("{path}: {}", e.into_inner()))
    })
}

pub fn load(bytes: &[u8]) -> Result<Experiment, Failure> {
    let config = parse(bytes)?;
    let g = &config.grid;
    let grid = Grid::new(g.n, g.extent, g.points).map_err(|e| invalid("grid", e))?;
    let spec = config
        .potential
        .build()
        .map_err(|e| invalid("potential", e))?;
    let family = MultiplierFamily::new(config.multiplier.m, config.multiplier.r, g.n)
        .map_err(|e| invalid("multiplier", e))?;

    let t = &config.time;
    let steps = step_count(t.horizon, t.dt).map_err(|e| invalid("time", e))?;
    if t.snapshot_stride == 0 {
        return Err(invalid("time.snapshot_stride", "must be positive"));
    }

    let DataConfig::Gaussian {
        center,
        width,
        momentum,
    } = &config.data;
    let packet = GaussianPacket {
        center: center.clone(),
        width: *width,
        momentum: momentum.clone(),
    };
    let data = packet
        .sample_normalized(&grid)
        .map_err(|e| invalid("data", e))?;

    if let Some(radii) = &config.estimate.r_set {
        if radii.is_empty() {
            return Err(invalid("estimate.R_set", "must not be empty"));
        }
        if let Some(r) = radii.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(invalid(
                "estimate.R_set",
                format!("radius {r} must be positive"),
            ));
        }
    }
    if config.output.formats.is_empty() {
        return Err(invalid("output.formats", "must name at least one format"));
    }

    let s = &config.solver;
    if !(s.tolerance.is_finite() && s.tolerance > 0.0) {
        return Err(invalid("solver.tolerance", "must be positive"));
    }
    if s.max_iterations == 0 {
        return Err(invalid("solver.max_iterations", "must be positive"));
    }
    if !(s.boundary_mass_limit.is_finite() && s.boundary_mass_limit > 0.0) {
        return Err(invalid("solver.boundary_mass_limit", "must be positive"));
    }
    if !config.gauge_check.c0.is_finite() {
        return Err(invalid("gauge_check.c0", "must be finite"));
    }
    let options = SolverOptions {
        tolerance: s.tolerance,
        max_iterations: s.max_iterations,
        boundary_mass_limit: s.boundary_mass_limit,
        boundary_width: None,
    };

    let sha256 = format!("{:x}", Sha256::digest(bytes));
    Ok(Experiment {
        config,
        sha256,
        grid,
        spec,
        family,
        data,
        steps,
        options,
    })
}
