use approx::assert_relative_eq;
use magvirial::grid::{ComplexField, ComplexVectorField, Grid};
use magvirial::multiplier::MultiplierFamily;
use magvirial::operators::{
    apply_t, assemble_hamiltonian, covariant_gradient, ground_state, hessian_form,
    multiplier_nodes, radial_tangential_split, sobolev_norm, tangential_pairwise, SobolevMethod,
    SobolevScale,
};
use magvirial::potentials::{MagneticFamily, PotentialSpec};
use magvirial::solver::GaussianPacket;
use magvirial::Error;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const I: Complex64 = Complex64::new(0.0, 1.0);

fn with_field(b: f64) -> PotentialSpec {
    PotentialSpec::harmonic()
        .with_magnetic(MagneticFamily::ConstantField { b })
        .unwrap()
}

fn random_values(len: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    (0..len)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

fn random_field(g: &Grid, rng: &mut ChaCha8Rng) -> ComplexField {
    ComplexField::new(*g, random_values(g.len(), rng)).unwrap()
}

/// Random data times a Gaussian envelope.
fn random_decaying(g: &Grid, rng: &mut ChaCha8Rng) -> ComplexField {
    let values = random_values(g.len(), rng)
        .into_iter()
        .enumerate()
        .map(|(i, v)| v * (-g.radius(i).powi(2) / 2.0).exp())
        .collect();
    ComplexField::new(*g, values).unwrap()
}

fn random_vectors(g: &Grid, rng: &mut ChaCha8Rng) -> ComplexVectorField {
    ComplexVectorField::new(*g, random_values(g.len() * g.dim(), rng)).unwrap()
}

fn gaussian(g: &Grid, center: [f64; 3], momentum: [f64; 3]) -> ComplexField {
    GaussianPacket {
        center: center.to_vec(),
        width: 1.0,
        momentum: momentum.to_vec(),
    }
    .sample(g)
    .unwrap()
}

#[test]
fn plane_wave_gradient_is_second_order() {
    let spec = PotentialSpec::harmonic();
    let k = [0.7, -0.4, 0.2];
    let error = |points: usize| {
        let g = Grid::new(3, 2.0, points).unwrap();
        let u = g
            .complex_field(|x| Complex64::from_polar(1.0, k[0] * x[0] + k[1] * x[1] + k[2] * x[2]));
        let grad = covariant_gradient(&u, &spec, 0.0);
        (0..g.len())
            .flat_map(|i| (0..3).map(move |a| (i, a)))
            .map(|(i, a)| (grad.at(i)[a] - I * k[a] * u.values()[i]).norm())
            .fold(0.0, f64::max)
    };
    let ratio = error(16) / error(32);
    assert!((3.5..4.5).contains(&ratio), "{ratio}");
}

#[test]
fn real_data_has_real_gradient() {
    let g = Grid::new(3, 3.0, 12).unwrap();
    let u = gaussian(&g, [0.2, 0.0, -0.3], [0.0; 3]);
    let grad = covariant_gradient(&u, &PotentialSpec::harmonic(), 0.0);
    assert!(grad.values().iter().all(|c| c.im == 0.0));
}

#[test]
fn constant_data_gives_minus_i_a() {
    let g = Grid::new(3, 3.0, 12).unwrap();
    let spec = with_field(1.3);
    let u = g.complex_field(|_| Complex64::new(1.0, 0.0));
    let grad = covariant_gradient(&u, &spec, 0.0);
    let mut a = [0.0; 3];
    for i in 0..g.len() {
        spec.vector_potential_at(0.0, &g.position(i)[..3], &mut a);
        for k in 0..3 {
            assert!((grad.at(i)[k] + I * a[k]).norm() < 1e-12);
        }
    }
}

#[test]
fn hamiltonian_is_hermitian_and_positive() {
    let g = Grid::new(3, 3.0, 10).unwrap();
    let h = assemble_hamiltonian(&with_field(0.8), 0.0, &g);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let f = random_field(&g, &mut rng);
        let u = random_field(&g, &mut rng);
        let a = f.inner(&h.apply(&u).unwrap()).unwrap();
        let b = u.inner(&h.apply(&f).unwrap()).unwrap().conj();
        assert!((a - b).norm() <= 1e-12 * a.norm().max(1.0));
        assert!(h.quadratic_form(&f).unwrap() >= f.norm_sqr());
    }
}

#[test]
fn harmonic_ground_energy() {
    // V = ⟨x⟩² = 1 + |x|², so the continuum ground energy is 3 + 1
    let g = Grid::new(3, 8.0, 48).unwrap();
    let h = assemble_hamiltonian(&PotentialSpec::harmonic(), 0.0, &g);
    let start = gaussian(&g, [0.0; 3], [0.0; 3]);
    let (lambda, u) = ground_state(&h, &start, 1e-10).unwrap();
    assert!((lambda / 4.0 - 1.0).abs() < 0.02, "{lambda}");
    assert_relative_eq!(u.norm(), 1.0, max_relative = 1e-12);
}

#[test]
fn radial_and_tangential_parts() {
    let g = Grid::new(3, 2.0, 8).unwrap();
    let radial = g.radial_unit_field();
    let as_complex = |v: &[f64]| {
        v.iter()
            .map(|&x| Complex64::new(x, 0.0))
            .collect::<Vec<_>>()
    };
    let field = ComplexVectorField::new(g, as_complex(radial.values())).unwrap();
    let (r, t) = radial_tangential_split(&field, &g).unwrap();
    assert!(r.values().iter().all(|c| (c - 1.0).norm() < 1e-14));
    assert!(t.values().iter().all(|c| c.norm() < 1e-14));

    // (-y, x, 0) is tangent to spheres
    let mut values = vec![Complex64::new(0.0, 0.0); 3 * g.len()];
    for i in 0..g.len() {
        let x = g.position(i);
        values[3 * i] = Complex64::new(-x[1], 0.0);
        values[3 * i + 1] = Complex64::new(x[0], 0.0);
    }
    let (r, _) = radial_tangential_split(&ComplexVectorField::new(g, values).unwrap(), &g).unwrap();
    assert!(r.values().iter().all(|c| c.norm() < 1e-14));

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let field = random_vectors(&g, &mut rng);
    let (r, t) = radial_tangential_split(&field, &g).unwrap();
    let pairwise = tangential_pairwise(&field);
    for i in 0..g.len() {
        let tan: f64 = t.at(i).iter().map(|c| c.norm_sqr()).sum();
        let total: f64 = field.at(i).iter().map(|c| c.norm_sqr()).sum();
        assert!((tan - pairwise.values()[i]).abs() < 1e-12);
        assert!((total - tan - r.values()[i].norm_sqr()).abs() < 1e-12);
    }
}

#[test]
fn hessian_form_matches_matrix() {
    let g = Grid::new(3, 2.0, 8).unwrap();
    let fam = MultiplierFamily::new(1.5, 0.8, 3).unwrap();
    let zero = ComplexVectorField::new(g, vec![Complex64::new(0.0, 0.0); 3 * g.len()]).unwrap();
    assert!(hessian_form(&zero, &fam)
        .unwrap()
        .values()
        .iter()
        .all(|v| *v == 0.0));

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let field = random_vectors(&g, &mut rng);
    let form = hessian_form(&field, &fam).unwrap();
    for i in 0..g.len() {
        let x = g.position(i);
        let r = g.radius(i);
        let xh = [x[0] / r, x[1] / r, x[2] / r];
        let gi = field.at(i);
        let mut direct = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                let delta = if a == b { 1.0 } else { 0.0 };
                let d2 = fam.phi_pp(r) * xh[a] * xh[b] + fam.phi_p(r) / r * (delta - xh[a] * xh[b]);
                direct += (gi[a].conj() * d2 * gi[b]).re;
            }
        }
        assert!((form.values()[i] - direct).abs() < 1e-12 * direct.abs().max(1.0));
    }

    // purely radial G reduces to φ''|G|²
    let values: Vec<Complex64> = (0..g.len())
        .flat_map(|i| {
            let x = g.position(i);
            let r = g.radius(i);
            (0..3).map(move |a| Complex64::new(0.0, 2.0) * x[a] / r)
        })
        .collect();
    let radial = hessian_form(&ComplexVectorField::new(g, values).unwrap(), &fam).unwrap();
    for i in 0..g.len() {
        assert!((radial.values()[i] - 4.0 * fam.phi_pp(g.radius(i))).abs() < 1e-12);
    }
}

#[test]
fn multiplier_operator_is_skew() {
    let g = Grid::new(3, 3.0, 12).unwrap();
    let spec = with_field(0.6);
    let fam = MultiplierFamily::new(1.0, 1.0, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let f = random_decaying(&g, &mut rng);
        let u = random_decaying(&g, &mut rng);
        let tf = apply_t(&f, &fam, &spec, 0.0).unwrap();
        let tu = apply_t(&u, &fam, &spec, 0.0).unwrap();
        let sum = f.inner(&tu).unwrap() + tf.inner(&u).unwrap();
        assert!(sum.norm() <= 1e-12 * f.norm() * u.norm());
    }
    let real = gaussian(&g, [0.3, -0.2, 0.1], [0.0; 3]);
    let form = real
        .inner(&apply_t(&real, &fam, &PotentialSpec::harmonic(), 0.0).unwrap())
        .unwrap();
    assert!(form.norm() < 1e-14);
}

#[test]
fn multiplier_operator_is_consistent() {
    // T_h u ≈ 2∇φ·∇_A u + Δ_h φ u, with Δ_h the discrete Laplacian of the nodal φ
    let spec = with_field(0.5);
    let fam = MultiplierFamily::new(1.0, 1.0, 3).unwrap();
    let center = [0.4, -0.3, 0.2];
    let k = [0.0, 0.8, 0.0];
    let error = |points: usize| {
        let g = Grid::new(3, 6.0, points).unwrap();
        let h = g.spacing();
        let u = gaussian(&g, center, k);
        let tu = apply_t(&u, &fam, &spec, 0.0).unwrap();
        let phi = multiplier_nodes(&g, &fam);
        let mut err = 0.0;
        for i in 0..g.len() {
            let x = g.position(i);
            let r = g.radius(i);
            let mut a = [0.0; 3];
            spec.vector_potential_at(0.0, &x[..3], &mut a);
            let ui = u.values()[i];
            let mut flow = Complex64::new(0.0, 0.0);
            let mut lap = 0.0;
            for d in 0..3 {
                let grad = (-(x[d] - center[d]) + I * k[d] - I * a[d]) * ui;
                flow += grad * (fam.phi_p(r) * x[d] / r);
                let fwd = g.neighbor(i, d, true).map_or(0.0, |j| phi[j]);
                let bwd = g.neighbor(i, d, false).map_or(0.0, |j| phi[j]);
                lap += (fwd - 2.0 * phi[i] + bwd) / (h * h);
            }
            if g.in_boundary_layer(i, 1) {
                continue;
            }
            err += (tu.values()[i] - 2.0 * flow - lap * ui).norm_sqr();
        }
        (err * g.cell_volume()).sqrt()
    };
    let (e1, e2) = (error(24), error(48));
    assert!(e1 / e2 > 3.0, "{e1} {e2}");
}

#[test]
fn sobolev_scale_identities() {
    let g = Grid::new(3, 3.0, 8).unwrap();
    let spec = with_field(0.9);
    let h = assemble_hamiltonian(&spec, 0.0, &g);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let f = random_decaying(&g, &mut rng);
    let scale = SobolevScale::new(&h);
    assert_relative_eq!(
        sobolev_norm(&f, &scale, 0.0).unwrap(),
        f.norm(),
        max_relative = 1e-14
    );
    let hf = h.apply(&f).unwrap();
    assert_relative_eq!(
        sobolev_norm(&f, &scale, 2.0).unwrap(),
        hf.norm(),
        max_relative = 1e-10
    );
    let v: f64 = (0..g.len())
        .map(|i| h.potential()[i] * f.values()[i].norm_sqr())
        .sum::<f64>()
        * g.cell_volume();
    assert_relative_eq!(
        scale.norm_sqr(&f, 1.0).unwrap(),
        h.kinetic_energy(&f).unwrap() + v,
        max_relative = 1e-10
    );

    let dense = SobolevScale::with_method(&h, SobolevMethod::Dense);
    let krylov = SobolevScale::with_method(&h, SobolevMethod::Krylov);
    for s in [0.25, 0.5, 1.5] {
        let a = dense.norm_sqr(&f, s).unwrap();
        let b = krylov.norm_sqr(&f, s).unwrap();
        assert!((a - b).abs() < 1e-7 * a, "s={s}: {a} vs {b}");
    }
    for s in [1.0, 1.5] {
        assert_relative_eq!(
            dense.norm_sqr(&f, s).unwrap(),
            scale.norm_sqr(&f, s).unwrap(),
            max_relative = 1e-8
        );
    }
    assert!(matches!(scale.norm(&f, 2.5), Err(Error::InvalidInput(_))));
}
