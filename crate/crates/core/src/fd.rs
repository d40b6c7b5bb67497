//! Finite-difference Dirichlet Hamiltonian on `[0, L]`.
//!
//! `H_L` is discretized with the three-point Laplacian on `m` interior nodes
//! `t_i = i h`, giving the tridiagonal matrix `diag 2/h² + q_i`, `off -1/h²`.
//! All spectral kernels work on the scaled matrix `h² H_L` written as
//! `T₀ + diag(h² q_i)` with `T₀ = tridiag(-1, 2, -1)`, and the Sturm
//! recurrence tracks pivots in the form `p_i = 1 + u_i`. The `u_i` are small
//! (`~1/i` for the free matrix), so the shift `h² E` is never absorbed into
//! the `2/h²` diagonal and eigenvalues keep full relative accuracy even for
//! `h² E ~ 1e-7`.

use rand::Rng;

use crate::decay::DecayProfile;
use crate::error::{Error, Result};
use crate::points::{Origin, PointSample, Window};
use crate::potential::Potential;
use crate::rng::rng_from_seed;
use crate::torus::{DisorderPath, TorusField};
use crate::tridiag::ShiftedLu;

const PIVOT_FLOOR: f64 = 1e-300;
const MAX_INVERSE_ITERATIONS: usize = 50;
const RESIDUAL_TOL: f64 = 1e-8;
const BATCH: usize = 8;

#[derive(Debug, Clone)]
pub struct GridHamiltonian {
    length: f64,
    h: f64,
    /// `q_i` at interior nodes `i = 1..=m`.
    potential: Vec<f64>,
    /// `h² q_i`.
    scaled: Vec<f64>,
}

/// Eigenvalue with its normalized eigenvector (`h Σ ψ_i² = 1`, first nonzero
/// entry positive).
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub energy: f64,
    /// Number of eigenvalues below `energy`, i.e. the oscillation count.
    pub index: usize,
    pub vector: Vec<f64>,
    pub h: f64,
    pub length: f64,
}

impl EigenPair {
    /// `‖(H - E)ψ‖ / ‖Hψ‖` recomputed against `ham`.
    pub fn relative_residual(&self, ham: &GridHamiltonian) -> f64 {
        ham.relative_residual(self.energy, &self.vector)
    }
}

/// Sorted eigenvalues of `H_L` in `J = [a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumWindow {
    pub lo: f64,
    pub hi: f64,
    /// Number of eigenvalues below `lo`; the `k`-th entry of `energies` has
    /// oscillation index `first_index + k`.
    pub first_index: usize,
    pub energies: Vec<f64>,
}

impl SpectrumWindow {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.energies.len()).map(move |k| self.first_index + k)
    }
}

/// Build `H_L` from one disorder realization on a grid of step close to `h`
/// (adjusted so that `L/h` is an integer and the right wall sits at `L`).
pub fn assemble(
    path: &DisorderPath,
    field: &TorusField,
    profile: &DecayProfile,
    length: f64,
    h: f64,
) -> Result<GridHamiltonian> {
    if !(length > 0.0 && h > 0.0) {
        return Err(Error::invalid(format!(
            "need L > 0 and h > 0, got L = {length}, h = {h}"
        )));
    }
    if path.dt() > h * (1.0 + 1e-9) {
        return Err(Error::invalid(format!(
            "path step {} is coarser than the grid step {h}",
            path.dt()
        )));
    }
    let potential = Potential::new(path, field, profile)?;
    potential.require_cover(length)?;
    GridHamiltonian::from_potential(&potential, length, h)
}

impl GridHamiltonian {
    pub fn from_potential(potential: &Potential, length: f64, h: f64) -> Result<Self> {
        let cells = (length / h).round() as usize;
        if cells < 3 {
            return Err(Error::invalid(format!(
                "grid has {cells} cells; need at least 3"
            )));
        }
        let h = length / cells as f64;
        let q: Vec<f64> = (1..cells).map(|i| potential.at(i as f64 * h)).collect();
        Ok(Self::from_values(length, h, q))
    }

    /// Free Laplacian (`q ≡ 0`) with `m = round(L/h) - 1` interior nodes.
    pub fn free(length: f64, h: f64) -> Result<Self> {
        let cells = (length / h).round() as usize;
        if cells < 3 {
            return Err(Error::invalid(format!(
                "grid has {cells} cells; need at least 3"
            )));
        }
        let h = length / cells as f64;
        Ok(Self::from_values(length, h, vec![0.0; cells - 1]))
    }

    fn from_values(length: f64, h: f64, potential: Vec<f64>) -> Self {
        let scaled = potential.iter().map(|q| q * h * h).collect();
        Self {
            length,
            h,
            potential,
            scaled,
        }
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Interior node count `m`.
    pub fn size(&self) -> usize {
        self.potential.len()
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let inv = 1.0 / (self.h * self.h);
        self.potential.iter().map(|q| 2.0 * inv + q).collect()
    }

    pub fn off_diagonal(&self) -> f64 {
        -1.0 / (self.h * self.h)
    }

    /// Exact eigenvalues of the free discrete problem,
    /// `(4/h²) sin²(kπ / 2(m+1))`, `k = 1..=m`.
    pub fn free_eigenvalue(&self, k: usize) -> f64 {
        let s = (k as f64 * std::f64::consts::PI / (2.0 * (self.size() + 1) as f64)).sin();
        4.0 * s * s / (self.h * self.h)
    }

    /// Number of eigenvalues strictly below `energy`.
    pub fn count_below(&self, energy: f64) -> usize {
        self.count_below_many(&[energy])[0]
    }

    /// Sturm counts for several energies in one sweep over the matrix.
    pub fn count_below_many(&self, energies: &[f64]) -> Vec<usize> {
        let h2 = self.h * self.h;
        let mut out = Vec::with_capacity(energies.len());
        for chunk in energies.chunks(BATCH) {
            let mut mu = [0.0f64; BATCH];
            for (m, e) in mu.iter_mut().zip(chunk) {
                *m = e * h2;
            }
            let mut w = [1.0f64; BATCH];
            let mut count = [0usize; BATCH];
            for &c in &self.scaled {
                for k in 0..BATCH {
                    let u = (c - mu[k]) + w[k];
                    let mut p = 1.0 + u;
                    if p == 0.0 {
                        p = PIVOT_FLOOR;
                    }
                    count[k] += (p < 0.0) as usize;
                    w[k] = u / p;
                }
            }
            out.extend_from_slice(&count[..chunk.len()]);
        }
        out
    }

    /// Lower and upper Gershgorin bounds.
    pub fn gershgorin(&self) -> (f64, f64) {
        let inv = 1.0 / (self.h * self.h);
        let (qmin, qmax) = self
            .potential
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &q| {
                (lo.min(q), hi.max(q))
            });
        (qmin, qmax + 4.0 * inv)
    }

    /// Eigenvalues in `[lo, hi]` by bisection on the Sturm count to the
    /// default absolute tolerance `1e-10 · max(1, |hi|)`.
    pub fn eigenvalues_in(&self, lo: f64, hi: f64) -> Result<SpectrumWindow> {
        self.eigenvalues_in_tol(lo, hi, 1e-10 * hi.abs().max(1.0))
    }

    /// As [`eigenvalues_in`](Self::eigenvalues_in) with an explicit absolute
    /// tolerance; `tol = 0` bisects down to adjacent floating-point numbers.
    pub fn eigenvalues_in_tol(&self, lo: f64, hi: f64, tol: f64) -> Result<SpectrumWindow> {
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::invalid(format!(
                "invalid energy window [{lo}, {hi}]"
            )));
        }
        let counts = self.count_below_many(&[lo, hi]);
        let (c_lo, c_hi) = (counts[0], counts[1]);
        let mut found: Vec<f64> = Vec::with_capacity(c_hi - c_lo);
        // intervals (lo, hi, count(lo), count(hi)) with at least one eigenvalue
        let mut active = vec![(lo, hi, c_lo, c_hi)];
        active.retain(|iv| iv.3 > iv.2);
        while !active.is_empty() {
            let mut next = Vec::with_capacity(active.len() * 2);
            let mut pending = Vec::with_capacity(active.len());
            for iv in active {
                let mid = 0.5 * (iv.0 + iv.1);
                if iv.1 - iv.0 <= tol || mid <= iv.0 || mid >= iv.1 {
                    found.extend(std::iter::repeat_n(mid, iv.3 - iv.2));
                } else {
                    pending.push((iv, mid));
                }
            }
            let mids: Vec<f64> = pending.iter().map(|p| p.1).collect();
            let mid_counts = self.count_below_many(&mids);
            for ((iv, mid), c_mid) in pending.into_iter().zip(mid_counts) {
                if c_mid > iv.2 {
                    next.push((iv.0, mid, iv.2, c_mid));
                }
                if iv.3 > c_mid {
                    next.push((mid, iv.1, c_mid, iv.3));
                }
            }
            active = next;
        }
        found.sort_by(f64::total_cmp);
        Ok(SpectrumWindow {
            lo,
            hi,
            first_index: c_lo,
            energies: found,
        })
    }

    /// `(h² H - shift) x` for the scaled matrix.
    fn scaled_apply(&self, mu: f64, x: &[f64], out: &mut [f64]) {
        let m = x.len();
        for i in 0..m {
            let left = if i > 0 { x[i - 1] } else { 0.0 };
            let right = if i + 1 < m { x[i + 1] } else { 0.0 };
            out[i] = ((x[i] - left) - (right - x[i])) + (self.scaled[i] - mu) * x[i];
        }
    }

    /// `‖(H - E)ψ‖ / ‖Hψ‖`.
    pub fn relative_residual(&self, energy: f64, psi: &[f64]) -> f64 {
        let mut r = vec![0.0; psi.len()];
        let mut hpsi = vec![0.0; psi.len()];
        self.scaled_apply(energy * self.h * self.h, psi, &mut r);
        self.scaled_apply(0.0, psi, &mut hpsi);
        norm(&r) / norm(&hpsi)
    }

    /// Eigenvector for an isolated eigenvalue by inverse iteration. The
    /// oscillation index is read off the Sturm count just below `energy`, so
    /// neighbours must be further than `1e-9 · max(1, E)` away.
    pub fn eigenvector(&self, energy: f64) -> Result<EigenPair> {
        let index = self.count_below(energy - 1e-9 * energy.abs().max(1.0));
        self.eigenvector_with_index(energy, index)
    }

    /// Eigenpair `k` of a window computed by [`eigenvalues_in`](Self::eigenvalues_in).
    pub fn eigenpair(&self, spectrum: &SpectrumWindow, k: usize) -> Result<EigenPair> {
        self.eigenvector_with_index(spectrum.energies[k], spectrum.first_index + k)
    }

    fn eigenvector_with_index(&self, energy: f64, index: usize) -> Result<EigenPair> {
        let m = self.size();
        let h2 = self.h * self.h;
        let mu = energy * h2;
        let diag: Vec<f64> = self.scaled.iter().map(|c| 2.0 + c - mu).collect();
        let off = vec![-1.0; m - 1];
        let scale = diag.iter().fold(1.0f64, |s, d| s.max(d.abs()));
        let lu = ShiftedLu::factor(&diag, &off, scale);

        let mut rng = rng_from_seed(energy.to_bits() ^ m as u64);
        let mut x: Vec<f64> = (0..m).map(|_| rng.random::<f64>() - 0.5).collect();
        let mut residual = f64::INFINITY;
        let mut r = vec![0.0; m];
        for step in 0..MAX_INVERSE_ITERATIONS {
            if step < 2 || residual > 1e-5 {
                x = lu.solve(&x);
            } else {
                // Plain inverse iteration stalls at ~eps‖T‖/|h²E|. Remove the
                // error component orthogonal to x instead: solve against the
                // projected residual, which the second differences give
                // almost exactly.
                self.scaled_apply(mu, &x, &mut r);
                let along: f64 = r.iter().zip(&x).map(|(a, b)| a * b).sum();
                r.iter_mut().zip(&x).for_each(|(ri, xi)| *ri -= along * xi);
                let mut y = lu.solve(&r);
                let along: f64 = y.iter().zip(&x).map(|(a, b)| a * b).sum();
                y.iter_mut().zip(&x).for_each(|(yi, xi)| *yi -= along * xi);
                x.iter_mut().zip(&y).for_each(|(xi, yi)| *xi -= yi);
            }
            let n = norm(&x);
            if !(n.is_finite() && n > 0.0) {
                return Err(Error::NoConvergence {
                    iterations: step + 1,
                    residual: f64::NAN,
                });
            }
            x.iter_mut().for_each(|v| *v /= n);
            residual = self.relative_residual(energy, &x);
            if residual <= RESIDUAL_TOL {
                return Ok(self.finish_pair(energy, index, x));
            }
        }
        Err(Error::NoConvergence {
            iterations: MAX_INVERSE_ITERATIONS,
            residual,
        })
    }

    fn finish_pair(&self, energy: f64, index: usize, mut x: Vec<f64>) -> EigenPair {
        let sign = x
            .iter()
            .find(|v| **v != 0.0)
            .map(|v| v.signum())
            .unwrap_or(1.0);
        let scale = sign / (self.h * x.iter().map(|v| v * v).sum::<f64>()).sqrt();
        x.iter_mut().for_each(|v| *v *= scale);
        EigenPair {
            energy,
            index,
            vector: x,
            h: self.h,
            length: self.length,
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    // scaled to avoid overflow for unnormalized iterates
    let max = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 || !max.is_finite() {
        return max;
    }
    max * x.iter().map(|v| (v / max) * (v / max)).sum::<f64>().sqrt()
}

/// `ξ_{L,E₀}`: points `L(√E_j - √E₀)` in the window induced by `J`.
pub fn rescaled_process(spectrum: &SpectrumWindow, length: f64, e0: f64) -> Result<PointSample> {
    if !(e0 > 0.0) {
        return Err(Error::invalid(format!("E0 must be positive, got {e0}")));
    }
    let k0 = e0.sqrt();
    let map = |e: f64| length * (e.max(0.0).sqrt() - k0);
    // closed on the right so that an eigenvalue at b is kept
    let window = Window::new(map(spectrum.lo), map(spectrum.hi).next_up())?;
    Ok(PointSample::new(
        window,
        spectrum.energies.iter().map(|&e| map(e)),
        Origin::Simulation,
    ))
}
