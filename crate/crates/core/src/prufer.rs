//! Prüfer phase/amplitude integration for `-x'' + q x = κ² x`.
//!
//! With `x = r sin θ`, `x'/κ = r cos θ` and `ρ = log r`:
//!
//! ```text
//! θ' = κ - (q/κ) sin²θ,      ρ' = (q / 2κ) sin 2θ = (1/2κ) Im(e^{2iθ} q)
//! ```
//!
//! `θ` is advanced with classical RK4. `ρ` is the Simpson quadrature of
//! `(q/2κ) sin 2θ` over each step, with the midpoint phase taken from the
//! cubic Hermite interpolant of `θ` (endpoint values and slopes), so `ρ` can
//! be re-derived from the stored phase alone.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decay::DecayProfile;
use crate::error::{Error, Result};
use crate::fd::SpectrumWindow;
use crate::potential::Potential;
use crate::rng::{derive_seed, pairwise_mean, pairwise_sum};
use crate::torus::{lyapunov_tau, sample_brownian_path, DiffusionSpec, DisorderPath, TorusField};

/// Largest admissible `κ dt`.
pub const MAX_PHASE_STEP: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct PruferTrajectory {
    pub dt: f64,
    pub kappa: f64,
    /// Continuous lift of the phase, `θ_0 = 0`.
    pub theta: Vec<f64>,
    /// Log-amplitude, `ρ_0 = 0`.
    pub rho: Vec<f64>,
}

impl PruferTrajectory {
    pub fn terminal_theta(&self) -> f64 {
        *self
            .theta
            .last()
            .expect("trajectory has at least one point")
    }

    pub fn terminal_rho(&self) -> f64 {
        *self.rho.last().expect("trajectory has at least one point")
    }

    /// `ρ` at time `t` by linear interpolation between steps.
    pub fn rho_at(&self, t: f64) -> f64 {
        let x = (t / self.dt).max(0.0);
        let k = x.floor() as usize;
        if k + 1 >= self.rho.len() {
            return self.terminal_rho();
        }
        let frac = x - k as f64;
        self.rho[k] + frac * (self.rho[k + 1] - self.rho[k])
    }
}

#[inline]
fn phase_rate(kappa: f64, q: f64, theta: f64) -> f64 {
    let s = theta.sin();
    kappa - q / kappa * s * s
}

#[inline]
fn amplitude_rate(kappa: f64, q: f64, theta: f64) -> f64 {
    q / (2.0 * kappa) * (2.0 * theta).sin()
}

/// Midpoint of the cubic Hermite interpolant through two phase samples.
#[inline]
pub fn hermite_midpoint(theta0: f64, theta1: f64, slope0: f64, slope1: f64, dt: f64) -> f64 {
    0.5 * (theta0 + theta1) + dt * (slope0 - slope1) / 8.0
}

struct Stepper<'a> {
    potential: &'a Potential,
    kappa: f64,
    dt: f64,
    steps: usize,
}

impl<'a> Stepper<'a> {
    fn new(potential: &'a Potential, kappa: f64, duration: f64, dt: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::invalid(format!(
                "kappa must be positive, got {kappa}"
            )));
        }
        if !(duration > 0.0) {
            return Err(Error::invalid(format!(
                "duration must be positive, got {duration}"
            )));
        }
        if !(dt > 0.0) || dt > MAX_PHASE_STEP / kappa * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "dt = {dt} exceeds {MAX_PHASE_STEP}/kappa = {}",
                MAX_PHASE_STEP / kappa
            )));
        }
        if dt > potential.dt() * (1.0 + 1e-9) {
            return Err(Error::invalid(format!(
                "dt = {dt} is coarser than the path step {}",
                potential.dt()
            )));
        }
        potential.require_cover(duration)?;
        let steps = (duration / dt - 1e-9).ceil().max(1.0) as usize;
        Ok(Self {
            potential,
            kappa,
            dt: duration / steps as f64,
            steps,
        })
    }

    /// Advance one step from `(t, θ, ρ)`; returns the new `(θ, ρ)`.
    #[inline]
    fn step(&self, t: f64, theta: f64, rho: f64) -> Result<(f64, f64)> {
        let (k, dt) = (self.kappa, self.dt);
        let q0 = self.potential.at(t);
        let qm = self.potential.at(t + 0.5 * dt);
        let q1 = self.potential.at(t + dt);
        let k1 = phase_rate(k, q0, theta);
        let k2 = phase_rate(k, qm, theta + 0.5 * dt * k1);
        let k3 = phase_rate(k, qm, theta + 0.5 * dt * k2);
        let k4 = phase_rate(k, q1, theta + dt * k3);
        let next = theta + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        let jump = next - theta;
        if !(jump.abs() <= PI) {
            return Err(Error::StepSize { time: t, jump });
        }
        let slope1 = phase_rate(k, q1, next);
        let mid = hermite_midpoint(theta, next, k1, slope1, dt);
        let drho = dt / 6.0
            * (amplitude_rate(k, q0, theta)
                + 4.0 * amplitude_rate(k, qm, mid)
                + amplitude_rate(k, q1, next));
        Ok((next, rho + drho))
    }
}

/// Integrate `(θ, ρ)` on `[0, T]` with step at most `dt` (shrunk so that the
/// grid ends exactly at `T`).
pub fn integrate(
    path: &DisorderPath,
    field: &TorusField,
    profile: &DecayProfile,
    kappa: f64,
    duration: f64,
    dt: f64,
) -> Result<PruferTrajectory> {
    let potential = Potential::new(path, field, profile)?;
    integrate_potential(&potential, kappa, duration, dt)
}

pub fn integrate_potential(
    potential: &Potential,
    kappa: f64,
    duration: f64,
    dt: f64,
) -> Result<PruferTrajectory> {
    let stepper = Stepper::new(potential, kappa, duration, dt)?;
    let mut theta = Vec::with_capacity(stepper.steps + 1);
    let mut rho = Vec::with_capacity(stepper.steps + 1);
    let (mut th, mut r) = (0.0, 0.0);
    theta.push(th);
    rho.push(r);
    for i in 0..stepper.steps {
        (th, r) = stepper.step(i as f64 * stepper.dt, th, r)?;
        theta.push(th);
        rho.push(r);
    }
    Ok(PruferTrajectory {
        dt: stepper.dt,
        kappa,
        theta,
        rho,
    })
}

/// `θ_T(κ)` without storing the trajectory.
pub fn terminal_phase(potential: &Potential, kappa: f64, duration: f64, dt: f64) -> Result<f64> {
    let stepper = Stepper::new(potential, kappa, duration, dt)?;
    let mut th = 0.0;
    for i in 0..stepper.steps {
        (th, _) = stepper.step(i as f64 * stepper.dt, th, 0.0)?;
    }
    Ok(th)
}

/// Step used by the shooting solver: the path step, refined until
/// `κ_max dt ≤ 0.1`.
pub fn shooting_step(path_dt: f64, kappa_max: f64) -> f64 {
    let refine = (path_dt * kappa_max / MAX_PHASE_STEP).ceil().max(1.0);
    path_dt / refine
}

/// Dirichlet eigenvalues of `H_L` in `J = [lo, hi]` by shooting on the
/// terminal phase: `E = κ²` is an eigenvalue iff `θ_L(κ) ∈ πℤ`.
pub fn shoot_eigenvalues(
    path: &DisorderPath,
    field: &TorusField,
    profile: &DecayProfile,
    length: f64,
    lo: f64,
    hi: f64,
) -> Result<SpectrumWindow> {
    if !(lo > 0.0 && lo <= hi) {
        return Err(Error::invalid(format!("need 0 < a <= b, got [{lo}, {hi}]")));
    }
    let potential = Potential::new(path, field, profile)?;
    let dt = shooting_step(path.dt(), hi.sqrt());
    shoot_eigenvalues_potential(&potential, length, lo, hi, dt)
}

pub fn shoot_eigenvalues_potential(
    potential: &Potential,
    length: f64,
    lo: f64,
    hi: f64,
    dt: f64,
) -> Result<SpectrumWindow> {
    let phase = |k: f64| terminal_phase(potential, k, length, dt);
    let (ka, kb) = (lo.sqrt(), hi.sqrt());
    let mut samples = vec![(ka, phase(ka)?), (kb, phase(kb)?)];
    if samples[1].1 < samples[0].1 {
        return Err(Error::NonMonotone { kappa: kb });
    }
    let first = (samples[0].1 / PI).floor() as usize;
    let last = (samples[1].1 / PI).floor() as usize;
    let mut energies = Vec::with_capacity(last - first);
    for j in (first + 1)..=last {
        let target = j as f64 * PI;
        let kappa = solve_phase(&phase, target, &mut samples)?;
        energies.push(kappa * kappa);
    }
    Ok(SpectrumWindow {
        lo,
        hi,
        first_index: first,
        energies,
    })
}

const KAPPA_TOL: f64 = 1e-10;

/// Solve `phase(κ) = target` by bracketed Illinois iteration, recording every
/// evaluation in `samples` (kept sorted) for later brackets and for the
/// monotonicity check.
fn solve_phase(
    phase: &impl Fn(f64) -> Result<f64>,
    target: f64,
    samples: &mut Vec<(f64, f64)>,
) -> Result<f64> {
    let pos = samples.partition_point(|s| s.1 < target);
    let (mut a, mut fa) = (samples[pos - 1].0, samples[pos - 1].1 - target);
    let (mut b, mut fb) = (samples[pos].0, samples[pos].1 - target);
    if fb == 0.0 {
        return Ok(b);
    }
    let slope = (fb - fa) / (b - a);
    let mut side = 0i8;
    let mut last_width = b - a;
    for iter in 0..200 {
        let width = b - a;
        if width <= KAPPA_TOL {
            return Ok(0.5 * (a + b));
        }
        let mut x = (a * fb - b * fa) / (fb - fa);
        // fall back to bisection when the bracket stalls
        if !(x > a && x < b) || (iter % 4 == 3 && width > 0.5 * last_width) {
            x = 0.5 * (a + b);
        }
        if iter % 4 == 3 {
            last_width = width;
        }
        let theta = phase(x)?;
        insert_sample(samples, x, theta)?;
        let fx = theta - target;
        if fx == 0.0 || fx.abs() / slope <= 0.5 * KAPPA_TOL {
            return Ok(x);
        }
        if fx < 0.0 {
            a = x;
            fa = fx;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = x;
            fb = fx;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    Ok(0.5 * (a + b))
}

fn insert_sample(samples: &mut Vec<(f64, f64)>, kappa: f64, theta: f64) -> Result<()> {
    let pos = samples.partition_point(|s| s.0 < kappa);
    let below_ok = pos == 0 || samples[pos - 1].1 < theta;
    let above_ok = pos == samples.len() || samples[pos].1 > theta;
    if !(below_ok && above_ok) {
        return Err(Error::NonMonotone { kappa });
    }
    samples.insert(pos, (kappa, theta));
    Ok(())
}

/// `ρ̃^{(n)}_t(κ_λ) = ρ_{nt}(κ_λ) - τ(κ₀²) ∫₀ⁿ a²` sampled on a grid in `(0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RenormalizedRho {
    pub n: f64,
    pub kappa0: f64,
    pub lambda: f64,
    pub tau: f64,
    /// `τ(κ₀²) ∫₀ⁿ a(s)² ds`.
    pub centering: f64,
    pub t_grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl RenormalizedRho {
    pub fn value_at(&self, t: f64) -> Option<f64> {
        self.t_grid
            .iter()
            .position(|&g| (g - t).abs() <= 1e-12 * t.abs().max(1.0))
            .map(|i| self.values[i])
    }
}

#[allow(clippy::too_many_arguments)]
pub fn renormalized_rho(
    path: &DisorderPath,
    field: &TorusField,
    profile: &DecayProfile,
    n: f64,
    kappa0: f64,
    lambda: f64,
    t_grid: &[f64],
    dt: f64,
) -> Result<RenormalizedRho> {
    if !(n > 0.0 && kappa0 > 0.0) {
        return Err(Error::invalid("need n > 0 and kappa0 > 0"));
    }
    if t_grid.is_empty() || t_grid.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
        return Err(Error::invalid("t grid must be a nonempty subset of (0, 1]"));
    }
    let kappa = kappa0 + lambda / n;
    let spec = DiffusionSpec::new(path.sigma2())?;
    let tau = lyapunov_tau(field, spec, kappa0 * kappa0)?;
    let centering = tau * profile.integral_a_squared(0.0, n)?;
    let t_max = t_grid.iter().cloned().fold(0.0, f64::max);
    let traj = integrate(path, field, profile, kappa, n * t_max, dt)?;
    let values = t_grid
        .iter()
        .map(|&t| traj.rho_at(n * t) - centering)
        .collect();
    Ok(RenormalizedRho {
        n,
        kappa0,
        lambda,
        tau,
        centering,
        t_grid: t_grid.to_vec(),
        values,
    })
}

/// Parameters of a `ρ̃` ensemble; realization `i` uses the path seeded by
/// `derive_seed(master_seed, i)`.
#[derive(Debug, Clone)]
pub struct RhoEnsembleSpec {
    pub field: TorusField,
    pub profile: DecayProfile,
    pub diffusion: DiffusionSpec,
    pub n: f64,
    pub kappa0: f64,
    pub lambda: f64,
    pub dt: f64,
    pub t_grid: Vec<f64>,
    pub n_paths: usize,
    pub master_seed: u64,
}

pub fn rho_ensemble(spec: &RhoEnsembleSpec) -> Result<Vec<RenormalizedRho>> {
    let t_max = spec.t_grid.iter().cloned().fold(0.0, f64::max);
    (0..spec.n_paths)
        .into_par_iter()
        .map(|i| {
            let path = sample_brownian_path(
                spec.n * t_max,
                spec.dt,
                spec.diffusion,
                derive_seed(spec.master_seed, i as u64),
            )?;
            renormalized_rho(
                &path,
                &spec.field,
                &spec.profile,
                spec.n,
                spec.kappa0,
                spec.lambda,
                &spec.t_grid,
                spec.dt,
            )
            .map_err(|e| Error::Realization {
                index: i,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Moments of `ρ̃_t - ρ̃_s` across an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdeDiagnostics {
    pub n: f64,
    #[serde(rename = "E0")]
    pub e0: f64,
    pub lambda: f64,
    pub s: f64,
    pub t: f64,
    pub drift: f64,
    pub qv: f64,
    pub se_drift: f64,
    pub se_qv: f64,
    pub n_paths: usize,
    pub tau_log_ratio: f64,
}

pub fn sde_diagnostics(ensemble: &[RenormalizedRho], s: f64, t: f64) -> Result<SdeDiagnostics> {
    if ensemble.len() < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 realizations, got {}",
            ensemble.len()
        )));
    }
    if !(0.0 < s && s < t && t <= 1.0) {
        return Err(Error::invalid(format!(
            "need 0 < s < t <= 1, got s = {s}, t = {t}"
        )));
    }
    let first = &ensemble[0];
    let increments = ensemble
        .iter()
        .map(|r| {
            if r.n != first.n || r.kappa0 != first.kappa0 || r.lambda != first.lambda {
                return Err(Error::invalid("ensemble mixes (n, kappa0, lambda)"));
            }
            match (r.value_at(s), r.value_at(t)) {
                (Some(a), Some(b)) => Ok(b - a),
                _ => Err(Error::invalid(format!(
                    "s = {s} and t = {t} must lie on the t grid"
                ))),
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = increments.len() as f64;
    let mean = pairwise_mean(&increments);
    let sq: Vec<f64> = increments.iter().map(|x| (x - mean).powi(2)).collect();
    let m2 = pairwise_mean(&sq);
    let quart: Vec<f64> = sq.iter().map(|v| v * v).collect();
    let m4 = pairwise_mean(&quart);
    let var = pairwise_sum(&sq) / (n - 1.0);
    Ok(SdeDiagnostics {
        n: first.n,
        e0: first.kappa0 * first.kappa0,
        lambda: first.lambda,
        s,
        t,
        drift: mean,
        qv: var,
        se_drift: (var / n).sqrt(),
        se_qv: ((m4 - m2 * m2).max(0.0) / n).sqrt(),
        n_paths: ensemble.len(),
        tau_log_ratio: first.tau * (t / s).ln(),
    })
}
