//! Potential shapes on the circle, Brownian motion on it, and the
//! resolvent/Lyapunov-exponent formulas built from Fourier modes.
//!
//! The circle has circumference 2π and carries the normalized Haar measure,
//! so `∫|F|² = Σ|F̂ₙ|²`. The Brownian generator is `(σ²/2) d²/dx²`, acting on
//! mode `n` as multiplication by `-σ² n² / 2`.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

const IMAG_RESIDUE_TOL: f64 = 1e-10;
const HERMITIAN_TOL: f64 = 1e-12;

/// Mode-indexed Fourier coefficients, `coeffs[n + n_max]` holding mode `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexTorusField {
    n_max: usize,
    coeffs: Vec<Complex64>,
}

impl ComplexTorusField {
    pub fn new(n_max: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if n_max == 0 {
            return Err(Error::invalid("n_max must be at least 1"));
        }
        if coeffs.len() != 2 * n_max + 1 {
            return Err(Error::invalid(format!(
                "expected {} coefficients for n_max = {n_max}, got {}",
                2 * n_max + 1,
                coeffs.len()
            )));
        }
        Ok(Self { n_max, coeffs })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn coefficient(&self, n: i64) -> Complex64 {
        if n.unsigned_abs() as usize > self.n_max {
            return Complex64::new(0.0, 0.0);
        }
        self.coeffs[(n + self.n_max as i64) as usize]
    }

    /// Iterate `(n, ĝₙ)` over all stored modes.
    pub fn modes(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let offset = self.n_max as i64;
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(i, c)| (i as i64 - offset, *c))
    }

    /// Apply `(L + 2iκ)` modewise.
    pub fn apply_shifted_generator(&self, spec: DiffusionSpec, kappa: f64) -> ComplexTorusField {
        let coeffs = self
            .modes()
            .map(|(n, c)| c * spec.shifted_symbol(n, kappa))
            .collect();
        ComplexTorusField {
            n_max: self.n_max,
            coeffs,
        }
    }

    /// `∫|∇g|²` under the normalized measure.
    pub fn gradient_energy(&self) -> f64 {
        self.modes()
            .map(|(n, c)| (n * n) as f64 * c.norm_sqr())
            .sum()
    }
}

/// A real, mean-zero potential shape stored as a finite Fourier series.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusField {
    inner: ComplexTorusField,
}

impl TorusField {
    /// `F(x) = cos x`.
    pub fn cos() -> Self {
        Self::scaled_cos(1.0)
    }

    /// `F(x) = amplitude · cos x`.
    pub fn scaled_cos(amplitude: f64) -> Self {
        let half = Complex64::new(amplitude / 2.0, 0.0);
        Self {
            inner: ComplexTorusField {
                n_max: 1,
                coeffs: vec![half, Complex64::new(0.0, 0.0), half],
            },
        }
    }

    pub fn zero() -> Self {
        Self::scaled_cos(0.0)
    }

    /// Build from the coefficients of modes `n ≥ 1`; negative modes are filled
    /// in by conjugation and mode 0 is zero.
    pub fn from_positive_modes(modes: &[(usize, Complex64)]) -> Result<Self> {
        let n_max = modes.iter().map(|(n, _)| *n).max().unwrap_or(0).max(1);
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * n_max + 1];
        for &(n, c) in modes {
            if n == 0 {
                return Err(Error::Invariant(
                    "mode 0 must vanish (mean-zero field)".into(),
                ));
            }
            coeffs[n_max + n] += c;
            coeffs[n_max - n] += c.conj();
        }
        Self::from_complex(ComplexTorusField { n_max, coeffs })
    }

    /// Validate a complex coefficient set as a real mean-zero field.
    pub fn from_complex(field: ComplexTorusField) -> Result<Self> {
        let out = Self { inner: field };
        out.validate()?;
        Ok(out)
    }

    /// Wrap coefficients without checking realness or mean zero. Operations
    /// that rely on those properties re-check them.
    pub fn from_complex_unchecked(field: ComplexTorusField) -> Self {
        Self { inner: field }
    }

    pub fn validate(&self) -> Result<()> {
        let scale = self.coefficient_l1().max(f64::MIN_POSITIVE);
        if self.inner.coefficient(0).norm() > HERMITIAN_TOL * scale {
            return Err(Error::Invariant(format!(
                "mean-zero violated: F̂_0 = {}",
                self.inner.coefficient(0)
            )));
        }
        for n in 1..=self.inner.n_max as i64 {
            let diff = self.inner.coefficient(-n) - self.inner.coefficient(n).conj();
            if diff.norm() > HERMITIAN_TOL * scale {
                return Err(Error::Invariant(format!(
                    "Hermitian symmetry violated at mode {n}"
                )));
            }
        }
        Ok(())
    }

    pub fn as_complex(&self) -> &ComplexTorusField {
        &self.inner
    }

    pub fn n_max(&self) -> usize {
        self.inner.n_max
    }

    pub fn coefficient(&self, n: i64) -> Complex64 {
        self.inner.coefficient(n)
    }

    pub fn is_zero(&self) -> bool {
        self.inner
            .coeffs
            .iter()
            .all(|c| *c == Complex64::new(0.0, 0.0))
    }

    /// `Σ|F̂ₙ|`, an upper bound for `max|F|`.
    pub fn coefficient_l1(&self) -> f64 {
        self.inner.coeffs.iter().map(|c| c.norm()).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            inner: ComplexTorusField {
                n_max: self.inner.n_max,
                coeffs: self.inner.coeffs.iter().map(|c| c * factor).collect(),
            },
        }
    }

    /// `F(x)`, failing if the imaginary residue exceeds the rounding budget.
    pub fn value_at(&self, x: f64) -> Result<f64> {
        let z: Complex64 = self
            .inner
            .modes()
            .map(|(n, c)| c * Complex64::from_polar(1.0, n as f64 * x))
            .sum();
        let budget = IMAG_RESIDUE_TOL * self.coefficient_l1();
        if z.im.abs() > budget && z.im.abs() > f64::MIN_POSITIVE {
            return Err(Error::Invariant(format!(
                "imaginary residue {:.3e} at x = {x} exceeds {budget:.3e}",
                z.im
            )));
        }
        Ok(z.re)
    }

    /// Real-valued evaluation for hot loops; the field must already be validated.
    pub(crate) fn value_fast(&self, x: f64) -> f64 {
        self.inner
            .modes()
            .filter(|(n, _)| *n > 0)
            .map(|(n, c)| {
                let (s, co) = (n as f64 * x).sin_cos();
                2.0 * (c.re * co - c.im * s)
            })
            .sum()
    }
}

impl fmt::Display for TorusField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "zero");
        }
        if self.inner.n_max == 1 && self.coefficient(1).im == 0.0 {
            let amp = 2.0 * self.coefficient(1).re;
            return if amp == 1.0 {
                write!(f, "cos")
            } else {
                write!(f, "cos:{amp}")
            };
        }
        write!(f, "modes:")?;
        let mut first = true;
        for n in 1..=self.inner.n_max as i64 {
            let c = self.coefficient(n);
            if c.norm() == 0.0 {
                continue;
            }
            if !first {
                write!(f, ";")?;
            }
            first = false;
            write!(f, "{n}:{}:{}", c.re, c.im)?;
        }
        Ok(())
    }
}

impl FromStr for TorusField {
    type Err = Error;

    /// Accepts `cos`, `zero`, `cos:<amplitude>` or
    /// `modes:<n>:<re>:<im>;<n>:<re>:<im>...` listing modes `n ≥ 1`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Config(format!("unrecognized field spec {s:?}"));
        match s {
            "cos" => return Ok(Self::cos()),
            "zero" => return Ok(Self::zero()),
            _ => {}
        }
        if let Some(amp) = s.strip_prefix("cos:") {
            let amp: f64 = amp.parse().map_err(|_| bad())?;
            return Ok(Self::scaled_cos(amp));
        }
        if let Some(list) = s.strip_prefix("modes:") {
            let mut modes = Vec::new();
            for item in list.split(';').filter(|t| !t.is_empty()) {
                let parts: Vec<&str> = item.split(':').collect();
                if parts.len() != 3 {
                    return Err(bad());
                }
                let n: usize = parts[0].parse().map_err(|_| bad())?;
                let re: f64 = parts[1].parse().map_err(|_| bad())?;
                let im: f64 = parts[2].parse().map_err(|_| bad())?;
                modes.push((n, Complex64::new(re, im)));
            }
            return Self::from_positive_modes(&modes).map_err(|e| Error::Config(e.to_string()));
        }
        Err(bad())
    }
}

/// Law of the driving Brownian motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionSpec {
    sigma2: f64,
}

impl Default for DiffusionSpec {
    fn default() -> Self {
        Self { sigma2: 1.0 }
    }
}

impl DiffusionSpec {
    pub fn new(sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::invalid(format!(
                "sigma2 must be positive, got {sigma2}"
            )));
        }
        Ok(Self { sigma2 })
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Eigenvalue of the generator on mode `n`.
    pub fn generator_symbol(&self, n: i64) -> f64 {
        -self.sigma2 * (n * n) as f64 / 2.0
    }

    fn shifted_symbol(&self, n: i64, kappa: f64) -> Complex64 {
        Complex64::new(self.generator_symbol(n), 2.0 * kappa)
    }
}

/// One Brownian trajectory on the circle sampled on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DisorderPath {
    dt: f64,
    values: Vec<f64>,
    seed: u64,
    sigma2: f64,
}

impl DisorderPath {
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Last covered time.
    pub fn duration(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.dt
    }
}

/// Sample `X` on `[0, T]` with step `dt`, starting at the origin.
pub fn sample_brownian_path(
    duration: f64,
    dt: f64,
    spec: DiffusionSpec,
    seed: u64,
) -> Result<DisorderPath> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::invalid(format!(
            "duration must be positive, got {duration}"
        )));
    }
    if !(dt > 0.0 && dt <= duration) {
        return Err(Error::invalid(format!(
            "need 0 < dt <= T, got dt = {dt}, T = {duration}"
        )));
    }
    let steps = (duration / dt + 1e-9).floor() as usize;
    let normal =
        Normal::new(0.0, (spec.sigma2 * dt).sqrt()).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = rng_from_seed(seed);
    let mut values = Vec::with_capacity(steps + 1);
    let mut x = 0.0f64;
    values.push(x);
    for _ in 0..steps {
        x = (x + normal.sample(&mut rng)).rem_euclid(TAU);
        // rem_euclid can round up to exactly TAU
        if x >= TAU {
            x = 0.0;
        }
        values.push(x);
    }
    Ok(DisorderPath {
        dt,
        values,
        seed,
        sigma2: spec.sigma2,
    })
}

/// `F(X_{t_i})` along a path.
pub fn evaluate_field(field: &TorusField, path: &DisorderPath) -> Result<Vec<f64>> {
    field.validate()?;
    path.values.iter().map(|&x| field.value_at(x)).collect()
}

/// `g_κ = (L + 2iκ)⁻¹ F`, computed modewise.
pub fn resolvent(field: &TorusField, spec: DiffusionSpec, kappa: f64) -> Result<ComplexTorusField> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::invalid(format!(
            "kappa must be positive, got {kappa}"
        )));
    }
    let coeffs = field
        .inner
        .modes()
        .map(|(n, c)| c / spec.shifted_symbol(n, kappa))
        .collect();
    Ok(ComplexTorusField {
        n_max: field.inner.n_max,
        coeffs,
    })
}

/// Lyapunov exponent `τ(E) = (1/8E) ∫|∇(L + 2i√E)⁻¹F|²`.
pub fn lyapunov_tau(field: &TorusField, spec: DiffusionSpec, energy: f64) -> Result<f64> {
    if !(energy > 0.0 && energy.is_finite()) {
        return Err(Error::invalid(format!(
            "energy must be positive, got {energy}"
        )));
    }
    let g = resolvent(field, spec, energy.sqrt())?;
    Ok(g.gradient_energy() / (8.0 * energy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn path_starts_at_origin_with_expected_length() {
        let p = sample_brownian_path(1.0, 1.0, DiffusionSpec::default(), 99).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.values()[0], 0.0);
        let p = sample_brownian_path(1.0, 0.01, DiffusionSpec::default(), 99).unwrap();
        assert_eq!(p.len(), 101);
        assert!(p.values().iter().all(|&x| (0.0..TAU).contains(&x)));
    }

    #[test]
    fn path_is_deterministic_in_seed() {
        let a = sample_brownian_path(10.0, 0.01, DiffusionSpec::default(), 42).unwrap();
        let b = sample_brownian_path(10.0, 0.01, DiffusionSpec::default(), 42).unwrap();
        let c = sample_brownian_path(10.0, 0.01, DiffusionSpec::default(), 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn path_rejects_bad_arguments() {
        let spec = DiffusionSpec::default();
        assert!(sample_brownian_path(0.0, 0.1, spec, 1).is_err());
        assert!(sample_brownian_path(1.0, 0.0, spec, 1).is_err());
        assert!(sample_brownian_path(1.0, 2.0, spec, 1).is_err());
        assert!(DiffusionSpec::new(0.0).is_err());
    }

    #[test]
    fn cos_field_values() {
        let f = TorusField::cos();
        assert!((f.value_at(0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(f.value_at(FRAC_PI_2).unwrap().abs() < 1e-15);
        assert!((f.value_fast(0.3) - 0.3f64.cos()).abs() < 1e-15);
        let path = sample_brownian_path(5.0, 0.1, DiffusionSpec::default(), 3).unwrap();
        let zeros = evaluate_field(&TorusField::zero(), &path).unwrap();
        assert!(zeros.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn non_hermitian_field_is_rejected() {
        let raw = ComplexTorusField::new(
            1,
            vec![
                Complex64::new(0.5, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.5, 0.3),
            ],
        )
        .unwrap();
        assert!(matches!(
            TorusField::from_complex(raw.clone()),
            Err(Error::Invariant(_))
        ));
        let field = TorusField::from_complex_unchecked(raw);
        let path = sample_brownian_path(1.0, 0.5, DiffusionSpec::default(), 0).unwrap();
        assert!(matches!(
            evaluate_field(&field, &path),
            Err(Error::Invariant(_))
        ));
    }

    #[test]
    fn resolvent_of_cos_matches_modewise_formula() {
        let g = resolvent(&TorusField::cos(), DiffusionSpec::default(), 1.0).unwrap();
        let expected = Complex64::new(0.5, 0.0) / Complex64::new(-0.5, 2.0);
        assert!((g.coefficient(1) - expected).norm() < 1e-15);
        assert!((g.coefficient(-1) - expected).norm() < 1e-15);
        assert_eq!(g.coefficient(0), Complex64::new(0.0, 0.0));
        let back = g.apply_shifted_generator(DiffusionSpec::default(), 1.0);
        for n in -1..=1 {
            assert!((back.coefficient(n) - TorusField::cos().coefficient(n)).norm() < 1e-14);
        }
        assert!(resolvent(&TorusField::cos(), DiffusionSpec::default(), 0.0).is_err());
    }

    #[test]
    fn tau_closed_form_for_cos() {
        for e in [0.25, 1.0, 4.0] {
            let tau = lyapunov_tau(&TorusField::cos(), DiffusionSpec::default(), e).unwrap();
            let closed = 1.0 / (4.0 * e * (1.0 + 16.0 * e));
            assert!((tau - closed).abs() <= 1e-12 * closed, "E = {e}");
        }
        let tau1 = lyapunov_tau(&TorusField::cos(), DiffusionSpec::default(), 1.0).unwrap();
        assert!((tau1 - 1.0 / 68.0).abs() < 1e-15);
        let tau100 = lyapunov_tau(&TorusField::cos(), DiffusionSpec::default(), 100.0).unwrap();
        assert!(tau100 < tau1);
        assert_eq!(
            lyapunov_tau(&TorusField::zero(), DiffusionSpec::default(), 1.0).unwrap(),
            0.0
        );
        assert!(lyapunov_tau(&TorusField::cos(), DiffusionSpec::default(), -1.0).is_err());
    }

    #[test]
    fn field_spec_round_trips_through_text() {
        for spec in ["cos", "zero", "cos:3", "modes:1:0.5:0;3:0.1:-0.2"] {
            let f: TorusField = spec.parse().unwrap();
            let again: TorusField = f.to_string().parse().unwrap();
            assert_eq!(f, again, "{spec}");
        }
        assert!("sin".parse::<TorusField>().is_err());
    }
}
