use nalgebra::Vector3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splat_uncert::sh::{eval_basis, eval_field, field_gradient, num_coeffs, ShCoeffs};

fn uniform_dir(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    let z: f64 = rng.random_range(-1.0..=1.0);
    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).sqrt();
    Vector3::new(r * phi.cos(), r * phi.sin(), z)
}

#[test]
fn monte_carlo_gram_is_identity() {
    let n = num_coeffs(3);
    let samples = 1_000_000;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut gram = vec![0.0; n * n];
    for _ in 0..samples {
        let y = eval_basis(&uniform_dir(&mut rng), 3).unwrap();
        for i in 0..n {
            for j in i..n {
                gram[i * n + j] += y[i] * y[j];
            }
        }
    }
    let area = 4.0 * std::f64::consts::PI / samples as f64;
    for i in 0..n {
        for j in i..n {
            let want = if i == j { 1.0 } else { 0.0 };
            let got = gram[i * n + j] * area;
            assert!((got - want).abs() < 0.01, "gram[{i}][{j}] = {got}");
        }
    }
}

#[test]
fn field_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let h = 1e-3;
    for degree in 0..=3 {
        for _ in 0..50 {
            let values: Vec<f64> = (0..num_coeffs(degree)).map(|_| rng.random_range(-2.0..2.0)).collect();
            let coeffs = ShCoeffs::new(degree, values.clone()).unwrap();
            let d = uniform_dir(&mut rng);
            let grad = field_gradient(&coeffs, &d).unwrap();
            for k in 0..values.len() {
                let mut plus = values.clone();
                let mut minus = values.clone();
                plus[k] += h;
                minus[k] -= h;
                let fp = eval_field(&ShCoeffs::new(degree, plus).unwrap(), &d).unwrap();
                let fm = eval_field(&ShCoeffs::new(degree, minus).unwrap(), &d).unwrap();
                assert!((grad[k] - (fp - fm) / (2.0 * h)).abs() < 1e-6);
            }
        }
    }
}

fn coeffs(degree: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, num_coeffs(degree))
}

fn direction() -> impl Strategy<Value = Vector3<f64>> {
    (-1.0..1.0f64, 0.0..std::f64::consts::TAU).prop_map(|(z, phi)| {
        let r = (1.0 - z * z).sqrt();
        Vector3::new(r * phi.cos(), r * phi.sin(), z)
    })
}

proptest! {
    #[test]
    fn field_is_linear(a in coeffs(3), b in coeffs(3), s in -2.0..2.0f64, t in -2.0..2.0f64, d in direction()) {
        let ca = ShCoeffs::new(3, a).unwrap();
        let cb = ShCoeffs::new(3, b).unwrap();
        let mix = ca.linear_combination(s, &cb, t).unwrap();
        let lhs = mix.eval_unit(&d);
        let rhs = s * ca.eval_unit(&d) + t * cb.eval_unit(&d);
        prop_assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn antipode_flips_odd_bands(d in direction()) {
        let y = eval_basis(&d, 3).unwrap();
        let z = eval_basis(&-d, 3).unwrap();
        for l in 0..=3usize {
            let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
            for i in l * l..(l + 1) * (l + 1) {
                prop_assert!((z[i] - sign * y[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn nearly_unit_directions_are_renormalized(d in direction(), eps in -5e-4..5e-4f64) {
        let a = eval_basis(&(d * (1.0 + eps)), 2).unwrap();
        let b = eval_basis(&d, 2).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn far_from_unit_directions_are_rejected() {
    assert!(eval_basis(&Vector3::new(0.0, 0.0, 1.01), 1).is_err());
    assert!(eval_basis(&Vector3::zeros(), 1).is_err());
}
