use std::f64::consts::PI;

use approx::assert_relative_eq;
use magvirial::grid::{Grid, ScalarField};
use magvirial::multiplier::{verify_bounds, MultiplierFamily};
use magvirial::potentials::{
    b_tau, check_assumptions, eval_a, eval_v, gauge_transform, magnetic_matrix, MagneticFamily,
    PotentialConfig, PotentialSpec,
};
use magvirial::Error;

#[test]
fn grid_construction() {
    let g = Grid::new(3, 8.0, 32).unwrap();
    assert_eq!(g.spacing(), 0.5);
    let min_r = (0..g.len())
        .map(|i| g.radius(i))
        .fold(f64::INFINITY, f64::min);
    assert!(min_r >= 0.25);
    assert_eq!(Grid::new(3, 8.0, 33), Err(Error::OddPoints(33)));
    assert!(matches!(
        Grid::new(2, 8.0, 32),
        Err(Error::DimensionTooLow(2))
    ));
}

#[test]
fn integrals() {
    let g = Grid::new(3, 1.0, 8).unwrap();
    let one = ScalarField::constant(g, 1.0);
    assert_relative_eq!(g.integrate(&one, &one).unwrap(), 8.0, max_relative = 1e-14);
    let two = ScalarField::constant(g, 2.0);
    assert_relative_eq!(g.integrate(&one, &two).unwrap(), 16.0, max_relative = 1e-14);

    let g = Grid::new(3, 8.0, 64).unwrap();
    let f = g.scalar_field(|x| (-x.iter().map(|v| v * v).sum::<f64>()).exp());
    let got = g.integrate(&f, &ScalarField::constant(g, 1.0)).unwrap();
    assert!((got - PI.powf(1.5)).abs() < 1e-6, "{got}");
}

#[test]
fn shell_integrals() {
    let g = Grid::new(3, 4.0, 64).unwrap();
    let one = ScalarField::constant(g, 1.0);
    assert!((g.shell_integral(&one, 2.0).unwrap() / (16.0 * PI) - 1.0).abs() < 0.05);
    assert_eq!(
        g.shell_integral(&ScalarField::constant(g, 0.0), 2.0)
            .unwrap(),
        0.0
    );
    let r2 = g.scalar_field(|x| x.iter().map(|v| v * v).sum());
    assert!((g.shell_integral(&r2, 1.0).unwrap() / (4.0 * PI) - 1.0).abs() < 0.05);
}

#[test]
fn radial_unit_vectors() {
    // h = 2/3 puts a node at (1, 1, 1)
    let g = Grid::new(3, 2.0, 6).unwrap();
    let field = g.radial_unit_field();
    let i = g.flat_index(&[4, 4, 4]);
    assert!(g.position(i)[..3].iter().all(|c| (c - 1.0).abs() < 1e-15));
    let s = 1.0 / 3f64.sqrt();
    assert!(field.at(i).iter().all(|c| (c - s).abs() < 1e-15));
    let j = g.flat_index(&[4, 2, 3]);
    assert!((field.at(j)[0] - g.position(j)[0] / g.radius(j)).abs() < 1e-15);
    for i in 0..g.len() {
        let n: f64 = field.at(i).iter().map(|c| c * c).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-14);
    }
}

#[test]
fn electric_values() {
    let g = Grid::new(3, 8.0, 32).unwrap();
    let v = eval_v(&PotentialSpec::harmonic(), 0.0, &g);
    let near_origin = g.flat_index(&[16, 16, 16]);
    assert_relative_eq!(v.values()[near_origin], 1.1875, max_relative = 1e-15);
    let spec = PotentialSpec::harmonic();
    let g6 = Grid::new(3, 2.0, 6).unwrap();
    let ones = g6.flat_index(&[4, 4, 4]);
    assert_relative_eq!(
        eval_v(&spec, 0.0, &g6).values()[ones],
        4.0,
        max_relative = 1e-14
    );

    let shifted = gauge_transform(&spec, 1.0);
    let base = eval_v(&spec, 0.3, &g);
    let new = eval_v(&shifted, 0.3, &g);
    for i in (0..g.len()).step_by(97) {
        let x = g.position(i);
        let bracket2 = 1.0 + x[..3].iter().map(|v| v * v).sum::<f64>();
        assert_relative_eq!(
            new.values()[i] - base.values()[i],
            bracket2,
            max_relative = 1e-13
        );
    }
    assert_eq!(eval_v(&gauge_transform(&spec, 0.0), 0.3, &g), base);
}

#[test]
fn vector_potential_values() {
    let spec = PotentialSpec::harmonic()
        .with_magnetic(MagneticFamily::ConstantField { b: 1.0 })
        .unwrap();
    let mut a = [0.0; 3];
    spec.vector_potential_at(0.0, &[1.0, 0.0, 0.0], &mut a);
    assert_eq!(a, [0.0, 0.5, 0.0]);
    let g = Grid::new(3, 2.0, 8).unwrap();
    assert!(eval_a(&PotentialSpec::harmonic(), 0.0, &g)
        .values()
        .iter()
        .all(|v| *v == 0.0));

    // the time-dependent gauge shift adds -c₀ t ∇⟨x⟩^m, i.e. -2tx for m = 2
    let shifted = gauge_transform(&spec, 1.0);
    let x = [0.3, -1.2, 0.7];
    let mut base = [0.0; 3];
    let mut new = [0.0; 3];
    spec.vector_potential_at(1.0, &x, &mut base);
    shifted.vector_potential_at(1.0, &x, &mut new);
    for k in 0..3 {
        assert_relative_eq!(new[k] - base[k], -2.0 * x[k], max_relative = 1e-13);
    }
}

#[test]
fn magnetic_matrix_and_tangential_field() {
    let g = Grid::new(3, 3.0, 6).unwrap();
    let b = 0.7;
    let spec = PotentialSpec::harmonic()
        .with_magnetic(MagneticFamily::ConstantField { b })
        .unwrap();
    let field = magnetic_matrix(&spec, 0.0, &g);
    for i in 0..g.len() {
        let m = field.at(i);
        for (k, v) in m.iter().enumerate() {
            let expected = match k {
                1 => -b,
                3 => b,
                _ => 0.0,
            };
            assert!((v - expected).abs() < 1e-12, "{k}: {v}");
        }
    }
    let shifted = gauge_transform(&spec, 1.0);
    assert!(
        field
            .max_difference(&magnetic_matrix(&shifted, 0.8, &g))
            .unwrap()
            <= 1e-10
    );
    let zero = magnetic_matrix(&PotentialSpec::harmonic(), 0.0, &g);
    assert!(zero.values().iter().all(|v| *v == 0.0));
    assert!(b_tau(&zero, &g).unwrap().values().iter().all(|v| *v == 0.0));

    let bt = b_tau(&field, &g).unwrap();
    for i in 0..g.len() {
        let x = g.position(i);
        let dot: f64 = (0..3).map(|k| bt.at(i)[k] * x[k]).sum();
        assert!(dot.abs() < 1e-12);
    }
    // at an axis point the tangential field is (0, -b, 0)
    let mut out = [0.0; 3];
    spec.btau_at(0.0, &[1.0, 0.0, 0.0], 1e-3, &mut out);
    assert!((out[0]).abs() < 1e-12 && (out[1] + b).abs() < 1e-12 && out[2].abs() < 1e-12);
}

#[test]
fn assumption_constants() {
    let g = Grid::new(3, 8.0, 32).unwrap();
    let report = check_assumptions(&PotentialSpec::harmonic(), &g, &[0.0]);
    assert!(report.radial_growth <= 2.0 && report.radial_growth > 1.9);
    assert_eq!((report.btau, report.div_btau), (0.0, 0.0));
    assert!(report.passed);
    let b = 1.5;
    let spec = PotentialSpec::harmonic()
        .with_magnetic(MagneticFamily::ConstantField { b })
        .unwrap();
    let report = check_assumptions(&spec, &g, &[0.0, 1.0]);
    assert!(
        report.btau <= b + 1e-12 && report.btau > 0.9 * b,
        "{report:?}"
    );
}

#[test]
fn config_parsing() {
    let json = r#"{"electric": {"type": "polynomial", "c": 1.0, "m": 2},
                   "magnetic": {"type": "constant_field", "b": 0.5, "lambda": 1.0},
                   "gauge": {"c0": 1.0}}"#;
    let config: PotentialConfig = serde_json::from_str(json).unwrap();
    let spec = config.build().unwrap();
    assert_eq!((spec.m(), spec.lambda(), spec.gauge_c0()), (2.0, 1.0, 1.0));
    let bad = r#"{"electric": {"type": "polynomial", "c": 1.0, "m": 2},
                  "magnetic": {"type": "zero", "lambda": 1.5}}"#;
    let config: PotentialConfig = serde_json::from_str(bad).unwrap();
    assert!(matches!(config.build(), Err(Error::InvalidPotential(_))));
}

#[test]
fn multiplier_reference_values() {
    let fam = MultiplierFamily::new(1.0, 1.0, 3).unwrap();
    assert_eq!(fam.eval(0.0).unwrap().phi_p, 1.0);
    assert_relative_eq!(
        fam.eval(1.0).unwrap().phi_p,
        17.0 / 15.0,
        max_relative = 1e-15
    );
    assert_relative_eq!(
        fam.eval(2.0).unwrap().lap_phi,
        7.0 / 6.0,
        max_relative = 1e-15
    );
    for (m, r) in [(1.0, 0.5), (3.0, 2.0)] {
        let fam = MultiplierFamily::new(m, r, 3).unwrap();
        assert_relative_eq!(
            fam.eval(0.4 * r).unwrap().bilap_ac,
            -1.0 / r.powi(3),
            max_relative = 1e-14
        );
        assert_eq!(fam.eval(1.5 * r).unwrap().bilap_ac, 0.0);
    }
    assert_relative_eq!(
        MultiplierFamily::new(1.0, 2.0, 4)
            .unwrap()
            .singular_parts()
            .surface_weight,
        -1.0 / 32.0
    );
    assert_relative_eq!(
        MultiplierFamily::new(1.0, 1.0, 3)
            .unwrap()
            .singular_parts()
            .origin_mass,
        -8.0 * PI
    );
    assert_relative_eq!(
        MultiplierFamily::new(2.0, 3.0, 5)
            .unwrap()
            .singular_parts()
            .surface_weight,
        -0.2 / 9.0
    );
}

#[test]
fn multiplier_derivatives_match_quadrature() {
    // φ' at r recovered as φ'(0) + ∫₀^r φ''
    let fam = MultiplierFamily::new(1.0, 1.0, 3).unwrap();
    let k = 20_000;
    let h = 1.0 / k as f64;
    let integral: f64 = (0..k).map(|j| fam.phi_pp((j as f64 + 0.5) * h) * h).sum();
    assert!((fam.phi_p(0.0) + integral - 17.0 / 15.0).abs() < 1e-9);
}

#[test]
fn multiplier_bounds_at_dense_samples() {
    for r in [0.25, 1.0, 4.0] {
        let fam = MultiplierFamily::new(1.0, r, 3).unwrap();
        let report = verify_bounds(&fam, &fam.log_samples()).unwrap();
        assert!(report.passed, "{report:?}");
        assert!((report.sup_phi_p - (1.0 + 1.0 / 6.0)).abs() < 1e-6);
        assert!((report.sup_phi_pp - 1.0 / (6.0 * r)).abs() < 1e-6);
    }
}
