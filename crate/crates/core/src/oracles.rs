//! Reference samplers for the limit objects: the clock process, Poisson
//! points of intensity `1/π`, an approximate `Sine_β` process and the
//! exponential Brownian measure.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Exp, StandardNormal};

use crate::error::{Error, Result};
use crate::measure::EigenfunctionMeasure;
use crate::points::{Origin, PointSample, Window};
use crate::rng::{rng_from_seed, SimRng};
use crate::tridiag::SymTridiagonal;

/// Distance function `k(t, U)` indexing the Brownian motion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Kernel {
    /// `log(t / U)`
    #[default]
    LogRatio,
    /// `t - U`
    AbsDiff,
}

impl Kernel {
    pub fn as_str(&self) -> &'static str {
        match self {
            Kernel::LogRatio => "log_ratio",
            Kernel::AbsDiff => "abs_diff",
        }
    }

    pub fn eval(&self, t: f64, u: f64) -> f64 {
        match self {
            Kernel::LogRatio => (t / u).ln(),
            Kernel::AbsDiff => t - u,
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log_ratio" => Ok(Kernel::LogRatio),
            "abs_diff" => Ok(Kernel::AbsDiff),
            other => Err(Error::invalid(format!("unknown kernel {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleKind {
    Clock,
    Poisson,
    SineBeta { beta: f64 },
    ExpBm { tau: f64, kernel: Kernel },
}

impl OracleKind {
    pub fn origin(&self) -> Origin {
        match self {
            OracleKind::Clock => Origin::Clock,
            OracleKind::Poisson => Origin::Poisson,
            OracleKind::SineBeta { .. } => Origin::SineBeta,
            OracleKind::ExpBm { .. } => Origin::ExpBm,
        }
    }

    /// Parse a kind name with its parameter (`beta` or `tau`; ignored otherwise).
    pub fn parse(name: &str, param: Option<f64>, kernel: Kernel) -> Result<Self> {
        let need = |what: &str| {
            param.ok_or_else(|| Error::invalid(format!("{name} oracle needs --param {what}")))
        };
        let kind = match name {
            "clock" => OracleKind::Clock,
            "poisson" => OracleKind::Poisson,
            "sine_beta" => OracleKind::SineBeta {
                beta: need("beta")?,
            },
            "exp_bm" => OracleKind::ExpBm {
                tau: need("tau")?,
                kernel,
            },
            other => return Err(Error::invalid(format!("unknown oracle kind {other:?}"))),
        };
        kind.validate()?;
        Ok(kind)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            OracleKind::SineBeta { beta } if !(beta > 0.0 && beta.is_finite()) => {
                Err(Error::invalid(format!("beta must be positive, got {beta}")))
            }
            OracleKind::ExpBm { tau, .. } if !(tau > 0.0 && tau.is_finite()) => {
                Err(Error::invalid(format!("tau must be positive, got {tau}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub kind: OracleKind,
    pub window: Window,
    pub cells: usize,
    pub sine: SineBetaConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleSample {
    Points(PointSample),
    Measure {
        measure: EigenfunctionMeasure,
        center: f64,
    },
}

impl OracleConfig {
    pub fn sample(&self, seed: u64) -> Result<OracleSample> {
        self.kind.validate()?;
        if self.window.width() <= 0.0 && !matches!(self.kind, OracleKind::ExpBm { .. }) {
            return Err(Error::invalid("oracle window is empty"));
        }
        Ok(match self.kind {
            OracleKind::Clock => OracleSample::Points(clock_sample(self.window, seed)),
            OracleKind::Poisson => OracleSample::Points(poisson_sample(self.window, seed)),
            OracleKind::SineBeta { beta } => {
                OracleSample::Points(sine_beta_sample_with(beta, self.window, seed, &self.sine)?)
            }
            OracleKind::ExpBm { tau, kernel } => {
                let (measure, center) = expbm_measure_sample(tau, kernel, self.cells, seed)?;
                OracleSample::Measure { measure, center }
            }
        })
    }
}

/// The clock phase `θ ~ U[0, π)` drawn for `seed`.
pub fn clock_phase(seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed);
    rng.random::<f64>() * PI
}

/// `Σ_n δ_{nπ + θ}` restricted to `window`.
pub fn clock_sample(window: Window, seed: u64) -> PointSample {
    let theta = clock_phase(seed);
    let first = ((window.lo - theta) / PI).ceil() as i64 - 1;
    let last = ((window.hi - theta) / PI).floor() as i64 + 1;
    let points = (first..=last).map(|n| n as f64 * PI + theta);
    PointSample::new(window, points, Origin::Clock)
}

/// Homogeneous Poisson points of intensity `1/π`.
pub fn poisson_sample(window: Window, seed: u64) -> PointSample {
    let mut rng = rng_from_seed(seed);
    let gap = Exp::new(1.0 / PI).expect("positive rate");
    let mut points = Vec::new();
    let mut x = window.lo + gap.sample(&mut rng);
    while x < window.hi {
        points.push(x);
        x += gap.sample(&mut rng);
    }
    PointSample::new(window, points, Origin::Poisson)
}

/// Size of the tridiagonal β-ensemble and the fraction of its spectrum kept.
#[derive(Debug, Clone, PartialEq)]
pub struct SineBetaConfig {
    pub size: usize,
    pub central_fraction: f64,
}

impl Default for SineBetaConfig {
    fn default() -> Self {
        Self {
            size: 400,
            central_fraction: 0.1,
        }
    }
}

impl SineBetaConfig {
    fn kept(&self) -> usize {
        ((self.size as f64 * self.central_fraction).round() as usize).max(2)
    }

    /// Half-width of the region covered by every sample after unfolding
    /// and the random shift.
    pub fn reach(&self) -> f64 {
        0.5 * (self.kept() - 2) as f64 * PI
    }
}

pub fn sine_beta_sample(beta: f64, window: Window, seed: u64) -> Result<PointSample> {
    sine_beta_sample_with(beta, window, seed, &SineBetaConfig::default())
}

/// Central eigenvalues of the tridiagonal β-ensemble, unfolded by the
/// semicircle law and rescaled to mean gap `π`. The sample is centred at 0,
/// then shifted uniformly by up to half a gap either way so that it is
/// stationary; it covers `[-reach, reach]`, which must contain `window`.
pub fn sine_beta_sample_with(
    beta: f64,
    window: Window,
    seed: u64,
    config: &SineBetaConfig,
) -> Result<PointSample> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::invalid(format!("beta must be positive, got {beta}")));
    }
    let n = config.size;
    let kept = config.kept();
    if n < 2 || kept > n {
        return Err(Error::invalid(
            "sine_beta needs size >= 2 and a fraction <= 1",
        ));
    }
    let reach = config.reach();
    if window.lo < -reach || window.hi > reach {
        return Err(Error::invalid(format!(
            "window [{}, {}) exceeds the sampled range ±{reach:.3}",
            window.lo, window.hi
        )));
    }
    let mut rng = rng_from_seed(seed);
    let matrix = beta_ensemble(beta, n, &mut rng)?;

    let radius = (2.0 * beta * n as f64).sqrt();
    let first = (n - kept) / 2;
    let unfolded: Vec<f64> = (first..first + kept)
        .map(|k| {
            let x = matrix.kth_eigenvalue(k, 0.0).clamp(-radius, radius) / radius;
            // N ∫_{-1}^{x} semicircle
            let cdf = 0.5 + (x * (1.0 - x * x).sqrt() + x.asin()) / PI;
            n as f64 * cdf
        })
        .collect();
    let mean_gap = (unfolded[kept - 1] - unfolded[0]) / (kept - 1) as f64;
    if !(mean_gap > 0.0) {
        return Err(Error::Invariant("degenerate β-ensemble sample".into()));
    }
    let centre = 0.5 * (unfolded[0] + unfolded[kept - 1]);
    let shift = (rng.random::<f64>() - 0.5) * PI;
    let points = unfolded
        .iter()
        .map(|y| (y - centre) * PI / mean_gap + shift);
    Ok(PointSample::new(window, points, Origin::SineBeta))
}

/// `(1/√2) tridiag(N(0,2), χ_{β(n-i)})`, eigenvalue density `∝ Π|Δλ|^β e^{-Σλ²/2}`.
fn beta_ensemble(beta: f64, n: usize, rng: &mut SimRng) -> Result<SymTridiagonal> {
    let diag = (0..n)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let off = (1..n)
        .map(|i| {
            let chi2 = ChiSquared::new(beta * (n - i) as f64)
                .map_err(|e| Error::invalid(format!("chi-square: {e}")))?;
            Ok((chi2.sample(rng) / 2.0).sqrt())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(SymTridiagonal::new(diag, off))
}

/// A two-sided Brownian motion `Z` (`Z_0 = 0`, independent halves) at the
/// points `s`, built from sequential Gaussian increments in sorted order.
pub fn two_sided_brownian<R: Rng + ?Sized>(s: &[f64], rng: &mut R) -> Vec<f64> {
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let split = order.partition_point(|&i| s[i] < 0.0);
    let mut z = vec![0.0; s.len()];
    let mut walk = |indices: &mut dyn Iterator<Item = &usize>, rng: &mut R| {
        let (mut pos, mut value) = (0.0f64, 0.0);
        for &i in indices {
            let step = (s[i] - pos).abs();
            value += step.sqrt() * rng.sample::<f64, _>(StandardNormal);
            pos = s[i];
            z[i] = value;
        }
    };
    walk(&mut order[split..].iter(), rng);
    walk(&mut order[..split].iter().rev(), rng);
    z
}

/// `exp(2 Z_{τ k(t,U)} - 2 τ |k(t,U)|)` at the cell centres, normalized;
/// returns the measure and `U`.
pub fn expbm_measure_sample(
    tau: f64,
    kernel: Kernel,
    cells: usize,
    seed: u64,
) -> Result<(EigenfunctionMeasure, f64)> {
    let mut rng = rng_from_seed(seed);
    let u: f64 = rng.random();
    // U = 0 has probability 2^-53; keep the log kernel finite
    let u = if u == 0.0 { f64::MIN_POSITIVE } else { u };
    let measure = expbm_measure(tau, kernel, cells, u, Some(&mut rng))?;
    Ok((measure, u))
}

/// The measure for a given `U`; `noise = None` gives the deterministic
/// envelope `exp(-2τ|k|)`.
pub fn expbm_measure(
    tau: f64,
    kernel: Kernel,
    cells: usize,
    u: f64,
    noise: Option<&mut SimRng>,
) -> Result<EigenfunctionMeasure> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::invalid(format!("tau must be positive, got {tau}")));
    }
    if cells == 0 {
        return Err(Error::invalid("need at least one cell"));
    }
    if !(u > 0.0 && u <= 1.0) {
        return Err(Error::invalid(format!("U must lie in (0, 1], got {u}")));
    }
    let w = 1.0 / cells as f64;
    let s: Vec<f64> = (0..cells)
        .map(|i| tau * kernel.eval((i as f64 + 0.5) * w, u))
        .collect();
    let z = match noise {
        Some(rng) => two_sided_brownian(&s, rng),
        None => vec![0.0; cells],
    };
    let log_density: Vec<f64> = s
        .iter()
        .zip(&z)
        .map(|(s, z)| 2.0 * z - 2.0 * s.abs())
        .collect();
    let top = log_density
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let density = log_density.iter().map(|l| (l - top).exp()).collect();
    EigenfunctionMeasure::from_density(density, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clock_counts_and_gaps() {
        let window = Window::new(0.0, 10.0 * PI).unwrap();
        for seed in 0..50 {
            let s = clock_sample(window, seed);
            assert_eq!(s.len(), 10);
            assert!(s.gaps().iter().all(|g| (g - PI).abs() < 1e-12));
        }
    }

    #[test]
    fn poisson_empty_window() {
        let w = Window::new(1.0, 1.0).unwrap();
        assert!(poisson_sample(w, 3).is_empty());
    }

    #[test]
    fn samplers_are_deterministic() {
        let w = Window::new(-10.0, 10.0).unwrap();
        assert_eq!(poisson_sample(w, 9), poisson_sample(w, 9));
        assert_eq!(
            sine_beta_sample(2.0, w, 9).unwrap(),
            sine_beta_sample(2.0, w, 9).unwrap()
        );
        let a = expbm_measure_sample(1.0, Kernel::LogRatio, 64, 4).unwrap();
        let b = expbm_measure_sample(1.0, Kernel::LogRatio, 64, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sine_window_must_be_covered() {
        let w = Window::new(-100.0, 100.0).unwrap();
        assert!(sine_beta_sample(2.0, w, 1).is_err());
        assert!(sine_beta_sample(0.0, Window::new(0.0, 1.0).unwrap(), 1).is_err());
    }

    #[test]
    fn envelope_peaks_at_u() {
        for kernel in [Kernel::LogRatio, Kernel::AbsDiff] {
            let m = 200;
            let u = (73.0 + 0.5) / m as f64;
            let mu = expbm_measure(3.0, kernel, m, u, None).unwrap();
            let argmax = mu
                .density()
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            assert_eq!(argmax, 73);
            assert!((mu.total_mass() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn brownian_origin_and_sides() {
        let mut rng = rng_from_seed(5);
        let s = [-2.0, -1.0, 0.0, 1.0, 3.0];
        let z = two_sided_brownian(&s, &mut rng);
        assert_eq!(z[2], 0.0);
        assert!(z.iter().all(|v| v.is_finite()));
    }
}
