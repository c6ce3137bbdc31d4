use num_complex::Complex64;

use crate::error::Result;
use crate::grid::{norm, ComplexField, ComplexVectorField, Grid, ScalarField, MAX_DIM};
use crate::multiplier::MultiplierFamily;
use crate::par;
use crate::potentials::PotentialSpec;

/// Nodewise `∇u - i A u` with central differences in the interior and
/// one-sided second-order stencils on the faces.
pub fn covariant_gradient(u: &ComplexField, spec: &PotentialSpec, t: f64) -> ComplexVectorField {
    let g = *u.grid();
    let n = g.dim();
    let h = g.spacing();
    let points = g.points();
    let v = u.values();
    let mut out = vec![Complex64::new(0.0, 0.0); g.len() * n];
    par::fill(&mut out, |flat| {
        let (i, a) = (flat / n, flat % n);
        let s = g.stride(a);
        let k = (i / s) % points;
        let d = if k == 0 {
            (-3.0 * v[i] + 4.0 * v[i + s] - v[i + 2 * s]) / (2.0 * h)
        } else if k + 1 == points {
            (3.0 * v[i] - 4.0 * v[i - s] + v[i - 2 * s]) / (2.0 * h)
        } else {
            (v[i + s] - v[i - s]) / (2.0 * h)
        };
        let x = g.position(i);
        let mut field = [0.0; MAX_DIM];
        spec.vector_potential_at(t, &x[..n], &mut field);
        d - Complex64::new(0.0, field[a]) * v[i]
    });
    ComplexVectorField::from_raw(g, out)
}

/// Splits `G` into the radial part `x̂·G` and the tangential part `G - x̂(x̂·G)`.
pub fn radial_tangential_split(
    field: &ComplexVectorField,
    g: &Grid,
) -> Result<(ComplexField, ComplexVectorField)> {
    g.check(field.grid())?;
    let n = g.dim();
    let mut radial = vec![Complex64::new(0.0, 0.0); g.len()];
    par::fill(&mut radial, |i| {
        let x = g.position(i);
        let r = norm(&x[..n]);
        field
            .at(i)
            .iter()
            .zip(&x[..n])
            .map(|(v, xa)| v * (xa / r))
            .sum()
    });
    let mut tangential = vec![Complex64::new(0.0, 0.0); g.len() * n];
    par::fill(&mut tangential, |flat| {
        let (i, a) = (flat / n, flat % n);
        let x = g.position(i);
        let r = norm(&x[..n]);
        field.at(i)[a] - radial[i] * (x[a] / r)
    });
    Ok((
        ComplexField::from_raw(*g, radial),
        ComplexVectorField::from_raw(*g, tangential),
    ))
}

/// Nodewise `φ''|G_R|² + (φ'/r)|G_T|²`.
pub fn hessian_form(field: &ComplexVectorField, fam: &MultiplierFamily) -> Result<ScalarField> {
    let g = *field.grid();
    let (radial, tangential) = radial_tangential_split(field, &g)?;
    let mut out = vec![0.0; g.len()];
    par::fill(&mut out, |i| {
        let r = g.radius(i);
        let tan: f64 = tangential.at(i).iter().map(|c| c.norm_sqr()).sum();
        fam.phi_pp(r) * radial.values()[i].norm_sqr() + fam.phi_p(r) / r * tan
    });
    ScalarField::new(g, out)
}

/// Nodewise `Σ_{j<k} |x_j G_k - x_k G_j|² / r²`, the pairwise form of `|G_T|²`.
pub fn tangential_pairwise(field: &ComplexVectorField) -> ScalarField {
    let g = *field.grid();
    let n = g.dim();
    let mut out = vec![0.0; g.len()];
    par::fill(&mut out, |i| {
        let x = g.position(i);
        let r2: f64 = x[..n].iter().map(|v| v * v).sum();
        let v = field.at(i);
        let mut s = 0.0;
        for j in 0..n {
            for k in j + 1..n {
                s += (v[k] * x[j] - v[j] * x[k]).norm_sqr();
            }
        }
        s / r2
    });
    ScalarField::new(g, out).expect("finite pairwise form")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{ElectricFamily, MagneticFamily};

    #[test]
    fn constant_function_gives_minus_i_a() {
        let g = Grid::new(3, 2.0, 8).unwrap();
        let spec = PotentialSpec::new(
            ElectricFamily::Polynomial { c: 1.0 },
            MagneticFamily::ConstantField { b: 1.0 },
            2.0,
            1.0,
        )
        .unwrap();
        let one = g.complex_field(|_| Complex64::new(1.0, 0.0));
        let grad = covariant_gradient(&one, &spec, 0.0);
        for i in 0..g.len() {
            let x = g.position(i);
            let mut a = [0.0; 3];
            spec.vector_potential_at(0.0, &x[..3], &mut a);
            for k in 0..3 {
                assert!((grad.at(i)[k] - Complex64::new(0.0, -a[k])).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn radial_field_splits_cleanly() {
        let g = Grid::new(3, 2.0, 6).unwrap();
        let unit = g.radial_unit_field();
        let vals = unit
            .values()
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        let field = ComplexVectorField::from_raw(g, vals);
        let (radial, tangential) = radial_tangential_split(&field, &g).unwrap();
        for i in 0..g.len() {
            assert!((radial.values()[i] - 1.0).norm() < 1e-14);
            assert!(tangential.at(i).iter().all(|c| c.norm() < 1e-14));
        }
    }
}
