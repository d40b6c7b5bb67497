//! Empirical distances between ensembles and their bootstrap intervals.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::measure::{localization_center, wasserstein1, EigenfunctionMeasure};
use crate::points::PointSample;
use crate::rng::{derive_seed, pairwise_mean, pairwise_sum, rng_from_seed};

pub const BOOTSTRAP_RESAMPLES: usize = 1000;

fn sorted(values: &[f64]) -> Result<Vec<f64>> {
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("NaN in sample"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// `sup |F_n - F|` for a continuous reference CDF.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("KS needs a nonempty sample"));
    }
    let v = sorted(samples)?;
    let n = v.len() as f64;
    Ok(v.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    }))
}

pub fn ks_uniform(samples: &[f64]) -> Result<f64> {
    ks_one_sample(samples, |x| x.clamp(0.0, 1.0))
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("KS needs nonempty samples"));
    }
    let (a, b) = (sorted(a)?, sorted(b)?);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Asymptotic `1 - level` quantile of `√n · D_n`, divided by `√n_eff`.
pub fn ks_critical_value(n_eff: f64, level: f64) -> f64 {
    (-(level / 2.0).ln() / 2.0).sqrt() / n_eff.sqrt()
}

/// Asymptotic p-value of a KS distance (Kolmogorov series).
pub fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let sqrt_n = n_eff.sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// `∫ |F_a - F_b|` for two empirical distributions.
pub fn w1_empirical(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("W1 needs nonempty samples"));
    }
    let (a, b) = (sorted(a)?, sorted(b)?);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut prev = a[0].min(b[0]);
    let mut total = 0.0;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        total += (i as f64 / na - j as f64 / nb).abs() * (x - prev);
        prev = x;
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: f64,
    pub p_value: f64,
}

/// Pearson goodness of fit; `dof = bins - 1 - fitted`.
pub fn chi_square_test(observed: &[f64], expected: &[f64], fitted: usize) -> Result<ChiSquareTest> {
    if observed.len() != expected.len() || observed.len() < 2 + fitted {
        return Err(Error::invalid(
            "chi-square needs matching bins and positive dof",
        ));
    }
    if expected.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::invalid("expected counts must be positive"));
    }
    let statistic = observed
        .iter()
        .zip(expected)
        .map(|(o, e)| (o - e).powi(2) / e)
        .sum::<f64>();
    let dof = (observed.len() - 1 - fitted) as f64;
    let dist = ChiSquared::new(dof).map_err(|e| Error::Statistical(e.to_string()))?;
    Ok(ChiSquareTest {
        statistic,
        dof,
        p_value: dist.sf(statistic),
    })
}

/// Consecutive gaps of a point sample, sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct GapStatistics {
    pub gaps: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
}

impl GapStatistics {
    pub fn from_gaps(gaps: Vec<f64>) -> Result<Self> {
        if gaps.is_empty() {
            return Err(Error::invalid("need at least 2 points for a gap"));
        }
        let gaps = sorted(&gaps)?;
        let mean = pairwise_mean(&gaps);
        let sq: Vec<f64> = gaps.iter().map(|g| (g - mean).powi(2)).collect();
        let sd = if gaps.len() > 1 {
            (pairwise_sum(&sq) / (gaps.len() - 1) as f64).sqrt()
        } else {
            0.0
        };
        Ok(Self { gaps, mean, sd })
    }

    pub fn len(&self) -> usize {
        self.gaps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaps.is_empty()
    }

    /// Empirical CDF `#{gaps <= x} / n`.
    pub fn ecdf(&self, x: f64) -> f64 {
        self.gaps.partition_point(|&g| g <= x) as f64 / self.gaps.len() as f64
    }
}

pub fn gap_statistics(points: &PointSample) -> Result<GapStatistics> {
    if points.len() < 2 {
        return Err(Error::invalid(format!(
            "gap statistics need at least 2 points, got {}",
            points.len()
        )));
    }
    GapStatistics::from_gaps(points.gaps())
}

/// Gaps pooled over samples; each sample contributes only its own gaps.
pub fn pooled_gaps<'a>(samples: impl IntoIterator<Item = &'a PointSample>) -> Vec<f64> {
    samples.into_iter().flat_map(|s| s.gaps()).collect()
}

/// A set of independent realizations; either part may be empty.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ensemble {
    pub points: Vec<PointSample>,
    pub measures: Vec<EigenfunctionMeasure>,
}

impl Ensemble {
    pub fn centers(&self) -> Vec<f64> {
        self.measures.iter().map(localization_center).collect()
    }
}

/// The comparison partner: another ensemble, or the uniform law on `[0, 1]`
/// (uniform centres and the uniform measure).
#[derive(Debug, Clone, Copy)]
pub enum Reference<'a> {
    Ensemble(&'a Ensemble),
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    GapW1,
    GapKs,
    CenterKsUniform,
    MeasureW1Mean,
}

impl Statistic {
    pub fn as_str(&self) -> &'static str {
        match self {
            Statistic::GapW1 => "gap_w1",
            Statistic::GapKs => "gap_ks",
            Statistic::CenterKsUniform => "center_ks_uniform",
            Statistic::MeasureW1Mean => "measure_w1_mean",
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "gap_w1" => Statistic::GapW1,
            "gap_ks" => Statistic::GapKs,
            "center_ks_uniform" => Statistic::CenterKsUniform,
            "measure_w1_mean" => Statistic::MeasureW1Mean,
            other => return Err(Error::invalid(format!("unknown statistic {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub statistic: Statistic,
    pub distance: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub confidence: f64,
    pub resamples: usize,
    pub n_a: usize,
    pub n_b: usize,
}

/// Two-sample distance with a basic bootstrap 95% interval, clamped at 0.
///
/// Realizations are the resampling unit. `measure_w1_mean` is the energy
/// distance `E W(A,B) - E W(A,A')/2 - E W(B,B')/2` under `W₁`, which vanishes
/// for identical ensembles; `center_ks_uniform` against [`Reference::Uniform`]
/// is the one-sample KS distance of the centres.
pub fn compare(
    a: &Ensemble,
    b: Reference<'_>,
    statistic: Statistic,
    seed: u64,
    resamples: usize,
) -> Result<Comparison> {
    let plan = Plan::new(a, b, statistic)?;
    let (na, nb) = (plan.n_a(), plan.n_b());
    let all_a: Vec<usize> = (0..na).collect();
    let all_b: Vec<usize> = (0..nb).collect();
    let distance = plan.evaluate(&all_a, &all_b)?;
    let mut boot = (0..resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_from_seed(derive_seed(seed, r as u64));
            let ia: Vec<usize> = (0..na).map(|_| rng.random_range(0..na)).collect();
            let ib: Vec<usize> = (0..nb).map(|_| rng.random_range(0..nb)).collect();
            plan.evaluate(&ia, &ib)
        })
        .collect::<Result<Vec<f64>>>()?;
    boot.sort_by(f64::total_cmp);
    let (ci_low, ci_high) = if boot.is_empty() {
        (distance, distance)
    } else {
        let lo = quantile_sorted(&boot, 0.025);
        let hi = quantile_sorted(&boot, 0.975);
        (
            (2.0 * distance - hi).max(0.0),
            (2.0 * distance - lo).max(0.0),
        )
    };
    Ok(Comparison {
        statistic,
        distance,
        ci_low,
        ci_high,
        confidence: 0.95,
        resamples,
        n_a: na,
        n_b: nb,
    })
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(v: &[f64], p: f64) -> f64 {
    let pos = p * (v.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < v.len() {
        v[i] + frac * (v[i + 1] - v[i])
    } else {
        v[i]
    }
}

enum Plan<'a> {
    Gaps {
        a: &'a [PointSample],
        b: &'a [PointSample],
        ks: bool,
    },
    Centers {
        a: Vec<f64>,
        b: Option<Vec<f64>>,
    },
    Measures {
        n_a: usize,
        n_b: usize,
        /// `W(A_i, A_j)`, `W(A_i, B_j)`, `W(B_i, B_j)`; the uniform reference
        /// is a single atom with `W(B, B) = 0`.
        aa: Vec<f64>,
        ab: Vec<f64>,
        bb: Vec<f64>,
    },
}

impl<'a> Plan<'a> {
    fn new(a: &'a Ensemble, b: Reference<'a>, statistic: Statistic) -> Result<Self> {
        let mismatch =
            |what: &str| Error::invalid(format!("{statistic} needs {what} in both ensembles"));
        match statistic {
            Statistic::GapW1 | Statistic::GapKs => {
                let Reference::Ensemble(b) = b else {
                    return Err(Error::invalid(format!(
                        "{statistic} has no uniform reference"
                    )));
                };
                if a.points.is_empty() || b.points.is_empty() {
                    return Err(mismatch("point samples"));
                }
                if pooled_gaps(&a.points).is_empty() || pooled_gaps(&b.points).is_empty() {
                    return Err(Error::Statistical(format!(
                        "{statistic}: an ensemble has no sample with 2 or more points"
                    )));
                }
                Ok(Plan::Gaps {
                    a: &a.points,
                    b: &b.points,
                    ks: statistic == Statistic::GapKs,
                })
            }
            Statistic::CenterKsUniform => {
                if a.measures.is_empty() {
                    return Err(mismatch("measures"));
                }
                let b = match b {
                    Reference::Ensemble(b) if b.measures.is_empty() => {
                        return Err(mismatch("measures"))
                    }
                    Reference::Ensemble(b) => Some(b.centers()),
                    Reference::Uniform => None,
                };
                Ok(Plan::Centers { a: a.centers(), b })
            }
            Statistic::MeasureW1Mean => {
                if a.measures.is_empty() {
                    return Err(mismatch("measures"));
                }
                let cells = a.measures[0].cells();
                let uniform = [EigenfunctionMeasure::uniform(cells)];
                let bm: &[EigenfunctionMeasure] = match b {
                    Reference::Ensemble(b) if b.measures.is_empty() => {
                        return Err(mismatch("measures"))
                    }
                    Reference::Ensemble(b) => &b.measures,
                    Reference::Uniform => &uniform,
                };
                Ok(Plan::Measures {
                    n_a: a.measures.len(),
                    n_b: bm.len(),
                    aa: w1_matrix(&a.measures, &a.measures)?,
                    ab: w1_matrix(&a.measures, bm)?,
                    bb: w1_matrix(bm, bm)?,
                })
            }
        }
    }

    fn n_a(&self) -> usize {
        match self {
            Plan::Gaps { a, .. } => a.len(),
            Plan::Centers { a, .. } => a.len(),
            Plan::Measures { n_a, .. } => *n_a,
        }
    }

    fn n_b(&self) -> usize {
        match self {
            Plan::Gaps { b, .. } => b.len(),
            Plan::Centers { b, .. } => b.as_ref().map_or(0, Vec::len),
            Plan::Measures { n_b, .. } => *n_b,
        }
    }

    fn evaluate(&self, ia: &[usize], ib: &[usize]) -> Result<f64> {
        match self {
            Plan::Gaps { a, b, ks } => {
                let ga = pooled_gaps(ia.iter().map(|&i| &a[i]));
                let gb = pooled_gaps(ib.iter().map(|&i| &b[i]));
                if *ks {
                    ks_two_sample(&ga, &gb)
                } else {
                    w1_empirical(&ga, &gb)
                }
            }
            Plan::Centers { a, b } => {
                let ca: Vec<f64> = ia.iter().map(|&i| a[i]).collect();
                match b {
                    Some(b) => {
                        let cb: Vec<f64> = ib.iter().map(|&i| b[i]).collect();
                        ks_two_sample(&ca, &cb)
                    }
                    None => ks_uniform(&ca),
                }
            }
            Plan::Measures {
                n_a,
                n_b,
                aa,
                ab,
                bb,
            } => {
                let cross = matrix_mean(ab, *n_b, ia, ib);
                let within_a = matrix_mean(aa, *n_a, ia, ia);
                let within_b = matrix_mean(bb, *n_b, ib, ib);
                Ok((cross - 0.5 * within_a - 0.5 * within_b).max(0.0))
            }
        }
    }
}

fn w1_matrix(a: &[EigenfunctionMeasure], b: &[EigenfunctionMeasure]) -> Result<Vec<f64>> {
    a.par_iter()
        .map(|x| {
            b.iter()
                .map(|y| wasserstein1(x, y))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<Vec<f64>>>>()
        .map(|rows| rows.concat())
}

fn matrix_mean(m: &[f64], cols: usize, rows_idx: &[usize], cols_idx: &[usize]) -> f64 {
    let row_means: Vec<f64> = rows_idx
        .iter()
        .map(|&i| {
            let row = &m[i * cols..(i + 1) * cols];
            let vals: Vec<f64> = cols_idx.iter().map(|&j| row[j]).collect();
            pairwise_mean(&vals)
        })
        .collect();
    pairwise_mean(&row_means)
}

/// Mean `W₁` between each measure of `a` and the uniform measure (reported
/// alongside the energy distance).
pub fn mean_w1_to_uniform(a: &[EigenfunctionMeasure]) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::invalid("empty ensemble"));
    }
    let u = EigenfunctionMeasure::uniform(a[0].cells());
    let v = a
        .iter()
        .map(|m| wasserstein1(m, &u))
        .collect::<Result<Vec<f64>>>()?;
    Ok(pairwise_mean(&v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::{clock_sample, poisson_sample};
    use crate::points::Window;
    use std::f64::consts::PI;

    #[test]
    fn ks_and_w1_basics() {
        let a = [0.1, 0.2, 0.3];
        assert_eq!(ks_two_sample(&a, &a).unwrap(), 0.0);
        assert_eq!(w1_empirical(&a, &a).unwrap(), 0.0);
        assert!((w1_empirical(&[0.0], &[2.5]).unwrap() - 2.5).abs() < 1e-15);
        assert!((ks_uniform(&[0.5]).unwrap() - 0.5).abs() < 1e-15);
        assert!((w1_empirical(&[0.0, 1.0], &[0.5]).unwrap() - 0.5).abs() < 1e-15);
        assert!(ks_two_sample(&[], &a).is_err());
    }

    #[test]
    fn critical_values() {
        assert!((ks_critical_value(1.0, 0.05) - 1.3581).abs() < 1e-3);
        assert!((ks_p_value(1.3581 / 100.0, 1e4) - 0.05).abs() < 0.01);
    }

    #[test]
    fn clock_gaps() {
        let s = clock_sample(Window::new(0.0, 100.0).unwrap(), 3);
        let g = gap_statistics(&s).unwrap();
        assert!((g.mean - PI).abs() < 1e-12 && g.sd < 1e-12);
        let one = PointSample::new(Window::new(0.0, 1.0).unwrap(), [0.5], s.origin());
        assert!(gap_statistics(&one).is_err());
    }

    #[test]
    fn self_comparison_is_zero() {
        let w = Window::new(0.0, 200.0).unwrap();
        let ens = Ensemble {
            points: (0..20).map(|i| poisson_sample(w, i)).collect(),
            measures: Vec::new(),
        };
        let c = compare(&ens, Reference::Ensemble(&ens), Statistic::GapW1, 1, 200).unwrap();
        assert_eq!(c.distance, 0.0);
        assert!(c.ci_low == 0.0 && c.ci_high >= 0.0);
        assert!(compare(
            &ens,
            Reference::Ensemble(&ens),
            Statistic::MeasureW1Mean,
            1,
            10
        )
        .is_err());
        assert!(compare(&ens, Reference::Uniform, Statistic::GapKs, 1, 10).is_err());
    }

    #[test]
    fn chi_square_uniform_counts() {
        let t = chi_square_test(&[10.0, 10.0, 10.0], &[10.0, 10.0, 10.0], 0).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert!((t.p_value - 1.0).abs() < 1e-12);
    }
}
