use std::f64::consts::{PI, TAU};

use decay_spectra::decay::DecayProfile;
use decay_spectra::torus::{
    lyapunov_tau, resolvent, sample_brownian_path, DiffusionSpec, TorusField,
};
use num_complex::Complex64;
use proptest::prelude::*;

fn unwrapped_increments(values: &[f64]) -> impl Iterator<Item = f64> + '_ {
    values.windows(2).map(|w| {
        let d = (w[1] - w[0]).rem_euclid(TAU);
        if d > PI {
            d - TAU
        } else {
            d
        }
    })
}

#[test]
fn increment_variance_over_many_paths() {
    let (dt, sigma2) = (0.01, 1.3);
    let spec = DiffusionSpec::new(sigma2).unwrap();
    // one increment per path, 10⁴ paths
    let inc: Vec<f64> = (0..10_000u64)
        .map(|s| {
            let p = sample_brownian_path(5.0 * dt, dt, spec, s).unwrap();
            let third = unwrapped_increments(p.values()).nth(2).unwrap();
            third
        })
        .collect();
    let n = inc.len() as f64;
    let mean = inc.iter().sum::<f64>() / n;
    let var = inc.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let target = sigma2 * dt;
    let se = target * (2.0 / (n - 1.0)).sqrt();
    assert!(
        (var - target).abs() < 5.0 * se,
        "var {var}, target {target}, se {se}"
    );
}

#[test]
fn increments_are_gaussian_by_kurtosis() {
    let p = sample_brownian_path(1000.0, 0.01, DiffusionSpec::default(), 7).unwrap();
    let inc: Vec<f64> = unwrapped_increments(p.values()).collect();
    assert_eq!(inc.len(), 100_000);
    let n = inc.len() as f64;
    let mean = inc.iter().sum::<f64>() / n;
    let m2 = inc.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = inc.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let kurtosis = m4 / (m2 * m2);
    let se = (24.0 / n).sqrt();
    assert!((kurtosis - 3.0).abs() < 5.0 * se, "kurtosis {kurtosis}");
}

#[test]
fn tau_limits() {
    let spec = DiffusionSpec::default();
    let cos = TorusField::cos();
    assert!((lyapunov_tau(&cos, spec, 1.0).unwrap() - 1.0 / 68.0).abs() < 1e-15);
    assert!(lyapunov_tau(&cos, spec, 100.0).unwrap() < lyapunov_tau(&cos, spec, 1.0).unwrap());
    assert_eq!(lyapunov_tau(&TorusField::zero(), spec, 1.0).unwrap(), 0.0);
    assert!(lyapunov_tau(&cos, spec, 0.0).is_err());
    assert!(resolvent(&cos, spec, -1.0).is_err());
}

fn field_strategy() -> impl Strategy<Value = TorusField> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..5).prop_filter_map("nonzero", |c| {
        let modes: Vec<(usize, Complex64)> = c
            .iter()
            .enumerate()
            .map(|(i, &(re, im))| (i + 1, Complex64::new(re, im)))
            .collect();
        let f = TorusField::from_positive_modes(&modes).ok()?;
        (!f.is_zero()).then_some(f)
    })
}

proptest! {
    #[test]
    fn tau_is_quadratically_homogeneous(
        f in field_strategy(),
        c in -5.0f64..5.0,
        e in 0.05f64..20.0,
        sigma2 in 0.2f64..3.0,
    ) {
        let spec = DiffusionSpec::new(sigma2).unwrap();
        let base = lyapunov_tau(&f, spec, e).unwrap();
        let scaled = lyapunov_tau(&f.scaled(c), spec, e).unwrap();
        prop_assert!((scaled - c * c * base).abs() <= 1e-12 * (c * c * base).max(1e-300));
    }

    #[test]
    fn resolvent_round_trip(f in field_strategy(), kappa in 0.05f64..10.0) {
        let spec = DiffusionSpec::default();
        let g = resolvent(&f, spec, kappa).unwrap();
        prop_assert_eq!(g.coefficient(0), Complex64::new(0.0, 0.0));
        let back = g.apply_shifted_generator(spec, kappa);
        for n in -(f.n_max() as i64)..=(f.n_max() as i64) {
            let (a, b) = (back.coefficient(n), f.coefficient(n));
            prop_assert!((a - b).norm() <= 1e-14 * b.norm().max(1e-300) + 1e-300);
        }
    }

    #[test]
    fn a_squared_is_additive(
        alpha in 0.1f64..2.5,
        x in 0.0f64..50.0,
        y in 0.0f64..50.0,
        z in 0.0f64..50.0,
    ) {
        let mut v = [x, y, z];
        v.sort_by(f64::total_cmp);
        let p = DecayProfile::new(alpha).unwrap();
        let ab = p.integral_a_squared(v[0], v[1]).unwrap();
        let bc = p.integral_a_squared(v[1], v[2]).unwrap();
        let ac = p.integral_a_squared(v[0], v[2]).unwrap();
        prop_assert!((ab + bc - ac).abs() < 1e-12 * ac.max(1.0));
    }

    #[test]
    fn envelope_is_even_and_bounded(alpha in 0.1f64..3.0, t in -1e4f64..1e4) {
        let p = DecayProfile::new(alpha).unwrap();
        let a = p.evaluate(t);
        prop_assert_eq!(a, p.evaluate(-t));
        prop_assert!(a > 0.0 && a <= 1.0);
    }
}

#[test]
fn decay_examples() {
    let half = DecayProfile::new(0.5).unwrap();
    assert!((half.evaluate(1.0) - 2f64.powf(-0.25)).abs() < 1e-15);
    let r = half.evaluate(1e3) * 1e3f64.sqrt();
    assert!(r > 0.999 && r < 1.001);
    let n = 2000.0f64;
    let closed = (n + (1.0 + n * n).sqrt()).ln();
    assert!((half.integral_a_squared(0.0, n).unwrap() - closed).abs() < 1e-12);
    let one = DecayProfile::new(1.0).unwrap();
    assert!((one.integral_a_squared(0.0, 1e6).unwrap() - PI / 2.0).abs() < 1e-5);
    assert_eq!(one.integral_a_squared(3.0, 3.0).unwrap(), 0.0);
    assert!(one.integral_a_squared(3.0, 2.0).is_err());
    assert!(DecayProfile::new(0.0).is_err());
}
