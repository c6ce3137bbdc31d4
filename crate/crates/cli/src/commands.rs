use magvirial::estimates::{
    default_radii, hardy_check, max_residuals, smoothing_ratio, VirialMonitor,
};
use magvirial::grid::ComplexField;
use magvirial::multiplier::{verify_bounds, MultiplierFamily};
use magvirial::operators::DENSE_LIMIT;
use magvirial::potentials::{
    apply_gauge_phase, check_assumptions, gauge_transform, magnetic_matrix, PotentialSpec,
};
use magvirial::solver::{
    dense_propagate_times, propagate_observed, propagate_with, write_snapshot, SnapshotFormat,
    Trajectory,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{Experiment, Format};
use crate::output::{json_bytes, Artifact, Cell, Table};
use crate::Failure;

pub const VIRIAL_TOLERANCE: f64 = 1e-3;
pub const GAUGE_FIELD_TOLERANCE: f64 = 1e-10;
pub const GAUGE_L2_TOLERANCE: f64 = 5e-4;

/// Rows written by [`multiplier_table`] per scale `R`, at `r = k R / 64`.
const TABLE_SAMPLES: usize = 256;

pub struct Report {
    pub artifacts: Vec<Artifact>,
    pub summary: Value,
    /// Set when the run completed but a hypothesis check failed.
    pub failure: Option<Failure>,
}

impl Report {
    fn new(summary: Value) -> Self {
        Self {
            artifacts: Vec::new(),
            summary,
            failure: None,
        }
    }
}

fn numerical(e: magvirial::Error) -> Failure {
    Failure::Numerical(e.to_string())
}

fn invalid(path: &str, message: impl std::fmt::Display) -> Failure {
    Failure::Config(format!("{path}: {message}"))
}

fn add_table(exp: &Experiment, artifacts: &mut Vec<Artifact>, stem: &str, table: &Table) {
    artifacts.push(Artifact {
        name: format!("{stem}.csv"),
        bytes: table.csv(),
    });
    if exp.wants(Format::Json) {
        artifacts.push(Artifact {
            name: format!("{stem}.json"),
            bytes: table.json(),
        });
    }
}

fn require_static(exp: &Experiment, what: &str) -> Result<(), Failure> {
    if exp.spec.is_static() {
        Ok(())
    } else {
        Err(invalid(
            "potential.gauge",
            format!("{what} needs a time-independent potential"),
        ))
    }
}

fn propagate(exp: &Experiment, spec: &PotentialSpec) -> Result<Trajectory, Failure> {
    propagate_with(
        &exp.data,
        spec,
        exp.horizon(),
        exp.dt(),
        exp.stride(),
        exp.options,
    )
    .map_err(numerical)
}

fn radii(exp: &Experiment) -> Vec<f64> {
    exp.config
        .estimate
        .r_set
        .clone()
        .unwrap_or_else(|| default_radii(&exp.grid))
}

pub fn simulate(exp: &Experiment) -> Result<Report, Failure> {
    let traj = propagate(exp, &exp.spec)?;
    let mut diagnostics = Table::new(&[
        "step",
        "t",
        "l2_norm",
        "energy",
        "boundary_fraction",
        "iterations",
        "residual",
    ]);
    for (k, d) in traj.diagnostics().iter().enumerate() {
        diagnostics.push(vec![
            (k + 1).into(),
            d.time.into(),
            d.l2_norm.into(),
            d.energy.into(),
            d.boundary_fraction.into(),
            d.iterations.into(),
            d.residual.into(),
        ]);
    }
    let mut snapshots = Table::new(&["index", "t", "l2_norm"]);
    let mut report = Report::new(json!({
        "steps": exp.steps,
        "snapshots": traj.snapshots().len(),
        "max_norm_drift": traj.max_norm_drift(),
        "final_norm": traj.last().norm(),
    }));
    for (k, (t, u)) in traj.times().iter().zip(traj.snapshots()).enumerate() {
        snapshots.push(vec![k.into(), (*t).into(), u.norm().into()]);
        for (format, kind, ext) in [
            (Format::Csv, SnapshotFormat::Csv, "csv"),
            (Format::Binary, SnapshotFormat::Binary, "bin"),
        ] {
            if exp.wants(format) {
                let mut bytes = Vec::new();
                write_snapshot(u, &mut bytes, kind).expect("writing to memory");
                report.artifacts.push(Artifact {
                    name: format!("snapshots/u_{k:05}.{ext}"),
                    bytes,
                });
            }
        }
    }
    add_table(exp, &mut report.artifacts, "diagnostics", &diagnostics);
    add_table(exp, &mut report.artifacts, "snapshots", &snapshots);
    Ok(report)
}

pub fn virial_check(exp: &Experiment) -> Result<Report, Failure> {
    require_static(exp, "virial-check")?;
    if exp.stride() >= exp.steps {
        return Err(invalid(
            "time.snapshot_stride",
            "must be smaller than the number of steps so that some snapshot has neighbours",
        ));
    }
    let mut monitor = VirialMonitor::new(&exp.spec, &exp.grid, &exp.family, exp.dt(), exp.stride())
        .map_err(|e| invalid("multiplier", e))?;
    propagate_observed(
        &exp.data,
        &exp.spec,
        exp.horizon(),
        exp.dt(),
        exp.stride(),
        exp.options,
        |k, p| monitor.observe(k, p.state_values()),
    )
    .map_err(numerical)?;
    let rows = monitor.rows();
    let mut table = Table::new(&[
        "t",
        "theta",
        "theta_ddot",
        "hessian",
        "bilap_ac",
        "bilap_sing",
        "potential",
        "magnetic",
        "rhs_flux",
        "residual",
        "residual_theta",
    ]);
    for r in &rows {
        let t = &r.terms;
        table.push(vec![
            t.time.into(),
            t.theta.into(),
            r.theta_ddot.into(),
            t.hessian.into(),
            t.bilap_ac.into(),
            t.bilap_sing.into(),
            t.potential.into(),
            t.magnetic.into(),
            t.rhs_flux.into(),
            r.residual.into(),
            r.residual_theta.into(),
        ]);
    }
    let (max_residual, max_residual_theta) = max_residuals(&rows);
    let mut report = Report::new(json!({
        "rows": rows.len(),
        "max_residual": max_residual,
        "max_residual_theta": max_residual_theta,
        "tolerance": VIRIAL_TOLERANCE,
        "passed": max_residual <= VIRIAL_TOLERANCE && max_residual_theta <= VIRIAL_TOLERANCE,
    }));
    add_table(exp, &mut report.artifacts, "virial", &table);
    Ok(report)
}

pub fn smoothing_estimate(exp: &Experiment) -> Result<Report, Failure> {
    let g = &exp.grid;
    let radii = radii(exp);
    let (lo, hi) = (g.spacing() / 2.0, g.extent());
    if let Some(r) = radii.iter().find(|r| !(**r > lo && **r < hi)) {
        return Err(invalid(
            "estimate.R_set",
            format!("radius {r} outside the admissible range ({lo}, {hi})"),
        ));
    }
    let repulsive = exp.config.estimate.use_repulsive_rhs;
    if repulsive && !exp.spec.is_repulsive() {
        return Err(invalid(
            "estimate.use_repulsive_rhs",
            "needs a repulsive electric potential",
        ));
    }

    let assumptions = check_assumptions(&exp.spec, g, &exp.snapshot_times());
    if !assumptions.passed {
        let mut report = Report::new(json!({ "assumptions": assumptions }));
        report.artifacts.push(Artifact {
            name: "assumptions.json".into(),
            bytes: json_bytes(&json!(assumptions)),
        });
        report.failure = Some(Failure::Assumptions(
            "potential fails the smoothing-estimate hypotheses".into(),
        ));
        return Ok(report);
    }

    let traj = propagate(exp, &exp.spec)?;
    let estimate = smoothing_ratio(&traj, &exp.spec, &radii, repulsive).map_err(numerical)?;
    let three = g.dim() == 3;
    let mut columns = vec!["R", "term_grad", "term_tan"];
    if !three {
        columns.push("term_u3");
    }
    columns.extend(["term_surface", "lhs_total", "rhs_norm2", "ratio"]);
    if three {
        columns.push("term_surface_alt");
    }
    let mut table = Table::new(&columns);
    for r in &estimate.rows {
        let mut row: Vec<Cell> = vec![r.radius.into(), r.term_grad.into(), r.term_tan.into()];
        if !three {
            row.push(r.term_u3.into());
        }
        row.extend([
            r.term_surface.into(),
            r.lhs_total.into(),
            r.rhs_norm2.into(),
            r.ratio.into(),
        ]);
        if three {
            row.push(r.term_surface_alt.into());
        }
        table.push(row);
    }
    let mut report = Report::new(json!({
        "rhs_exponent": estimate.rhs_exponent,
        "rhs_norm2": estimate.rhs_norm2,
        "sup_ratio": estimate.sup_ratio,
        "min_ratio": estimate.min_ratio,
        "uniform_in_r": estimate.uniform_in_r,
        "use_repulsive_rhs": repulsive,
    }));
    add_table(exp, &mut report.artifacts, "estimate", &table);
    Ok(report)
}

fn random_state(exp: &Experiment, rng: &mut ChaCha8Rng) -> ComplexField {
    let g = &exp.grid;
    let values = (0..g.len())
        .map(|i| {
            let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            z * (-g.radius(i).powi(2) / 2.0).exp()
        })
        .collect();
    ComplexField::new(*g, values).expect("finite values")
}

pub fn hardy(exp: &Experiment, seed: u64) -> Result<Report, Failure> {
    let traj = propagate(exp, &exp.spec)?;
    let mut states: Vec<(&str, usize, f64, ComplexField)> = traj
        .times()
        .iter()
        .zip(traj.snapshots())
        .enumerate()
        .map(|(k, (t, u))| (if k == 0 { "data" } else { "snapshot" }, k, *t, u.clone()))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for j in 0..exp.config.hardy.random_states {
        states.push(("random", j, 0.0, random_state(exp, &mut rng)));
    }

    let mut table = Table::new(&["kind", "index", "t", "ratio", "bound", "passed"]);
    let mut worst: f64 = 0.0;
    let mut bound = f64::NAN;
    let mut passed = true;
    for (kind, k, t, u) in &states {
        let r = hardy_check(u, &exp.spec, *t).map_err(numerical)?;
        worst = worst.max(r.ratio);
        bound = r.bound;
        passed &= r.passed;
        table.push(vec![
            (*kind).into(),
            (*k).into(),
            (*t).into(),
            r.ratio.into(),
            r.bound.into(),
            r.passed.into(),
        ]);
    }
    let mut report = Report::new(json!({
        "states": table.len(),
        "worst_ratio": worst,
        "bound": bound,
        "passed": passed,
        "seed": seed,
    }));
    add_table(exp, &mut report.artifacts, "hardy", &table);
    Ok(report)
}

pub fn multiplier_table(exp: &Experiment) -> Result<Report, Failure> {
    let n = exp.grid.dim();
    let m = exp.config.multiplier.m;
    let mut scales = Vec::new();
    let mut artifacts = Vec::new();
    for r_scale in radii(exp) {
        let fam = MultiplierFamily::new(m, r_scale, n).map_err(|e| invalid("estimate.R_set", e))?;
        let mut table = Table::new(&["r", "phi", "phi_p", "phi_pp", "lap_phi", "bilap_ac"]);
        for k in 1..=TABLE_SAMPLES {
            let r = k as f64 * r_scale / 64.0;
            let v = fam.eval(r).map_err(numerical)?;
            table.push(vec![
                r.into(),
                v.phi.into(),
                v.phi_p.into(),
                v.phi_pp.into(),
                v.lap_phi.into(),
                v.bilap_ac.into(),
            ]);
        }
        add_table(
            exp,
            &mut artifacts,
            &format!("multiplier_R{r_scale}"),
            &table,
        );
        let bounds = verify_bounds(&fam, &fam.log_samples()).map_err(numerical)?;
        scales.push(json!({
            "R": r_scale,
            "bounds": bounds,
            "singular_parts": fam.singular_parts(),
        }));
    }
    let passed = scales.iter().all(|s| s["bounds"]["passed"] == json!(true));
    let mut report = Report::new(json!({ "M": m, "n": n, "scales": scales, "passed": passed }));
    report.artifacts = artifacts;
    Ok(report)
}

pub fn assumptions(exp: &Experiment) -> Result<Report, Failure> {
    let report = check_assumptions(&exp.spec, &exp.grid, &exp.snapshot_times());
    let mut out = Report::new(json!({ "assumptions": report }));
    out.artifacts.push(Artifact {
        name: "assumptions.json".into(),
        bytes: json_bytes(&json!(report)),
    });
    if !report.passed {
        out.failure = Some(Failure::Assumptions(
            "potential fails the hypotheses".into(),
        ));
    }
    Ok(out)
}

pub fn gauge(exp: &Experiment) -> Result<Report, Failure> {
    let c0 = exp.config.gauge_check.c0;
    let gauged = gauge_transform(&exp.spec, c0);
    let base = propagate(exp, &exp.spec)?;
    let shifted = propagate(exp, &gauged)?;
    let mut table = Table::new(&["t", "field_change", "l2_error"]);
    let (mut worst_field, mut worst_l2): (f64, f64) = (0.0, 0.0);
    for ((t, u), v) in base
        .times()
        .iter()
        .zip(base.snapshots())
        .zip(shifted.snapshots())
    {
        let field = magnetic_matrix(&exp.spec, *t, &exp.grid)
            .max_difference(&magnetic_matrix(&gauged, *t, &exp.grid))
            .map_err(numerical)?;
        let back = apply_gauge_phase(v, -c0, exp.spec.m(), *t);
        let l2 = back.distance(u).map_err(numerical)?;
        worst_field = worst_field.max(field);
        worst_l2 = worst_l2.max(l2);
        table.push(vec![(*t).into(), field.into(), l2.into()]);
    }
    let mut report = Report::new(json!({
        "c0": c0,
        "max_field_change": worst_field,
        "max_l2_error": worst_l2,
        "field_tolerance": GAUGE_FIELD_TOLERANCE,
        "l2_tolerance": GAUGE_L2_TOLERANCE,
        "passed": worst_field <= GAUGE_FIELD_TOLERANCE && worst_l2 <= GAUGE_L2_TOLERANCE,
    }));
    add_table(exp, &mut report.artifacts, "gauge", &table);
    Ok(report)
}

pub fn oracle_compare(exp: &Experiment) -> Result<Report, Failure> {
    require_static(exp, "oracle-compare")?;
    if exp.grid.len() > DENSE_LIMIT {
        return Err(invalid(
            "grid",
            format!(
                "{} unknowns exceed the dense limit of {DENSE_LIMIT}",
                exp.grid.len()
            ),
        ));
    }
    let traj = propagate(exp, &exp.spec)?;
    let dense = dense_propagate_times(&exp.data, &exp.spec, traj.times()).map_err(numerical)?;
    let mut table = Table::new(&["t", "distance"]);
    let mut worst: f64 = 0.0;
    for ((t, u), v) in traj
        .times()
        .iter()
        .zip(traj.snapshots())
        .zip(dense.snapshots())
    {
        let d = u.distance(v).map_err(numerical)?;
        worst = worst.max(d);
        table.push(vec![(*t).into(), d.into()]);
    }
    let mut report = Report::new(json!({ "max_distance": worst, "snapshots": table.len() }));
    add_table(exp, &mut report.artifacts, "oracle", &table);
    Ok(report)
}
