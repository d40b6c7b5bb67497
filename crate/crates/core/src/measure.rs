//! Eigenfunction measures on `[0, 1]`.
//!
//! A measure is a piecewise-constant density on `m` equal cells. It is built
//! from an eigenpair by spreading the discrete energy density
//!
//! ```text
//! ψ_i ψ_{i+1} + (1/E) ((ψ_{i+1} - ψ_i) / h)²
//! ```
//!
//! over each grid interval `[t_i, t_{i+1}]` of the box (with `ψ_0 = ψ_{m+1} = 0`)
//! and averaging onto the cells. For the free discrete eigenfunctions this
//! quantity is exactly constant, the discrete form of `sin² + cos² = 1`.

use crate::error::{Error, Result};
use crate::fd::EigenPair;

pub const DEFAULT_CELLS: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenfunctionMeasure {
    density: Vec<f64>,
    energy: Option<f64>,
}

impl EigenfunctionMeasure {
    /// Normalizes `density` to unit mass.
    pub fn from_density(density: Vec<f64>, energy: Option<f64>) -> Result<Self> {
        if density.is_empty() {
            return Err(Error::invalid("measure needs at least one cell"));
        }
        if density.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::invalid("density must be finite and nonnegative"));
        }
        let m = density.len() as f64;
        let mass: f64 = density.iter().sum::<f64>() / m;
        if !(mass > 0.0) {
            return Err(Error::invalid("density has zero mass"));
        }
        Ok(Self {
            density: density.into_iter().map(|d| d / mass).collect(),
            energy,
        })
    }

    pub fn uniform(cells: usize) -> Self {
        Self {
            density: vec![1.0; cells],
            energy: None,
        }
    }

    /// All mass in one cell.
    pub fn concentrated(cells: usize, cell: usize) -> Self {
        let mut density = vec![0.0; cells];
        density[cell] = cells as f64;
        Self {
            density,
            energy: None,
        }
    }

    pub fn cells(&self) -> usize {
        self.density.len()
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn energy(&self) -> Option<f64> {
        self.energy
    }

    pub fn cell_width(&self) -> f64 {
        1.0 / self.density.len() as f64
    }

    pub fn cell_centers(&self) -> impl Iterator<Item = f64> + '_ {
        let w = self.cell_width();
        (0..self.density.len()).map(move |i| (i as f64 + 0.5) * w)
    }

    pub fn total_mass(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.cell_width()
    }

    /// CDF at the cell edges `0, 1/m, ..., 1`.
    pub fn cdf_at_edges(&self) -> Vec<f64> {
        let w = self.cell_width();
        let mut out = Vec::with_capacity(self.density.len() + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for d in &self.density {
            acc += d * w;
            out.push(acc);
        }
        out
    }

    /// Merge groups of `factor` adjacent cells.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.density.len().is_multiple_of(factor) {
            return Err(Error::invalid(format!(
                "cannot merge {} cells in groups of {factor}",
                self.density.len()
            )));
        }
        let density = self
            .density
            .chunks(factor)
            .map(|c| c.iter().sum::<f64>() / factor as f64)
            .collect();
        Ok(Self {
            density,
            energy: self.energy,
        })
    }

    pub fn total_variation(&self, other: &Self) -> Result<f64> {
        same_grid(self, other)?;
        Ok(0.5
            * self
                .density
                .iter()
                .zip(&other.density)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
            * self.cell_width())
    }
}

fn same_grid(a: &EigenfunctionMeasure, b: &EigenfunctionMeasure) -> Result<()> {
    if a.cells() != b.cells() {
        return Err(Error::invalid(format!(
            "grid mismatch: {} vs {} cells",
            a.cells(),
            b.cells()
        )));
    }
    Ok(())
}

/// `μ^{(L)}` of an eigenpair on `cells` cells, with derivative weight `1/energy`.
pub fn build_measure(pair: &EigenPair, energy: f64, cells: usize) -> Result<EigenfunctionMeasure> {
    if !(energy > 0.0) {
        return Err(Error::invalid(format!(
            "energy must be positive, got {energy}"
        )));
    }
    if cells == 0 {
        return Err(Error::invalid("need at least one cell"));
    }
    let h = pair.h;
    if energy * h * h >= 4.0 {
        return Err(Error::invalid(
            "grid too coarse for this energy (E h² >= 4)",
        ));
    }
    if pair.vector.iter().all(|v| *v == 0.0) {
        return Err(Error::invalid("eigenvector is identically zero"));
    }
    let psi = &pair.vector;
    let m = psi.len();
    let at = |i: usize| if i == 0 || i > m { 0.0 } else { psi[i - 1] };
    let inv_e = 1.0 / energy;
    let intervals = m + 1;
    // interval masses in box coordinates
    let mass: Vec<f64> = (0..intervals)
        .map(|i| {
            let (a, b) = (at(i), at(i + 1));
            let slope = (b - a) / h;
            (a * b + inv_e * slope * slope) * h
        })
        .collect();

    // spread interval i = [i/intervals, (i+1)/intervals] onto the cells
    let mut cell_mass = vec![0.0; cells];
    let ratio = cells as f64 / intervals as f64;
    for (i, &w) in mass.iter().enumerate() {
        let start = i as f64 * ratio;
        let end = (i + 1) as f64 * ratio;
        let mut c = (start.floor() as usize).min(cells - 1);
        let mut pos = start;
        while pos < end && c < cells {
            let edge = ((c + 1) as f64).min(end);
            cell_mass[c] += w * (edge - pos) / ratio;
            pos = edge;
            c += 1;
        }
    }
    let density = cell_mass
        .iter()
        .map(|w| w.max(0.0) * cells as f64)
        .collect();
    EigenfunctionMeasure::from_density(density, Some(energy))
}

/// Median of the measure, interpolated linearly inside its cell.
pub fn localization_center(mu: &EigenfunctionMeasure) -> f64 {
    quantile(mu, 0.5)
}

pub fn quantile(mu: &EigenfunctionMeasure, p: f64) -> f64 {
    let cdf = mu.cdf_at_edges();
    let w = mu.cell_width();
    let k = cdf.partition_point(|&c| c < p);
    if k == 0 {
        return 0.0;
    }
    if k >= cdf.len() {
        return 1.0;
    }
    let (c0, c1) = (cdf[k - 1], cdf[k]);
    let frac = if c1 > c0 { (p - c0) / (c1 - c0) } else { 0.0 };
    ((k - 1) as f64 + frac) * w
}

/// `∫|a(t)| dt` over one cell when `a` is linear between `d0` and `d1`.
fn abs_linear_integral(d0: f64, d1: f64, width: f64) -> f64 {
    if d0 * d1 >= 0.0 {
        0.5 * width * (d0.abs() + d1.abs())
    } else {
        0.5 * width * (d0 * d0 + d1 * d1) / (d0.abs() + d1.abs())
    }
}

/// `W₁(μ, ν) = ∫₀¹ |F_μ - F_ν|`, exact for piecewise-constant densities.
pub fn wasserstein1(mu: &EigenfunctionMeasure, nu: &EigenfunctionMeasure) -> Result<f64> {
    same_grid(mu, nu)?;
    let w = mu.cell_width();
    let (mut f, mut g) = (0.0, 0.0);
    let mut total = 0.0;
    for (a, b) in mu.density.iter().zip(&nu.density) {
        let d0 = f - g;
        f += a * w;
        g += b * w;
        total += abs_linear_integral(d0, f - g, w);
    }
    Ok(total)
}

/// `W₁(μ, δ_x) = ∫ |t - x| μ(dt)`.
pub fn wasserstein1_to_point(mu: &EigenfunctionMeasure, x: f64) -> f64 {
    let w = mu.cell_width();
    mu.density
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let (a, b) = (i as f64 * w, (i + 1) as f64 * w);
            // ∫_a^b |t - x| dt
            let part = if x <= a {
                0.5 * ((b - x).powi(2) - (a - x).powi(2))
            } else if x >= b {
                0.5 * ((x - a).powi(2) - (x - b).powi(2))
            } else {
                0.5 * ((x - a).powi(2) + (b - x).powi(2))
            };
            d * part
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd::GridHamiltonian;

    #[test]
    fn free_measures_are_flat() {
        let ham = GridHamiltonian::free(10.0, 1e-3).unwrap();
        let spec = ham.eigenvalues_in_tol(0.05, 40.0, 0.0).unwrap();
        assert_eq!(spec.len(), 20);
        let uniform = EigenfunctionMeasure::uniform(DEFAULT_CELLS);
        for k in 0..spec.len() {
            let pair = ham.eigenpair(&spec, k).unwrap();
            let mu = build_measure(&pair, pair.energy, DEFAULT_CELLS).unwrap();
            assert!((mu.total_mass() - 1.0).abs() < 1e-12);
            assert!(mu.total_variation(&uniform).unwrap() < 1e-6, "k = {k}");
        }
    }

    #[test]
    fn amplitude_does_not_matter() {
        let ham = GridHamiltonian::free(5.0, 1e-2).unwrap();
        let spec = ham.eigenvalues_in(1.0, 3.0).unwrap();
        let pair = ham.eigenpair(&spec, 0).unwrap();
        let mut doubled = pair.clone();
        doubled.vector.iter_mut().for_each(|v| *v *= 2.0);
        let a = build_measure(&pair, pair.energy, 64).unwrap();
        let b = build_measure(&doubled, pair.energy, 64).unwrap();
        for (x, y) in a.density().iter().zip(b.density()) {
            assert!((x - y).abs() < 1e-12);
        }
        let mut zero = pair.clone();
        zero.vector.iter_mut().for_each(|v| *v = 0.0);
        assert!(build_measure(&zero, 1.0, 64).is_err());
        assert!(build_measure(&pair, 0.0, 64).is_err());
    }

    #[test]
    fn centers() {
        assert!((localization_center(&EigenfunctionMeasure::uniform(512)) - 0.5).abs() < 1e-12);
        let m = 100;
        let mu = EigenfunctionMeasure::concentrated(m, 30);
        assert!((localization_center(&mu) - 0.3).abs() <= 1.0 / m as f64);
    }

    #[test]
    fn wasserstein_values() {
        let u = EigenfunctionMeasure::uniform(511);
        assert_eq!(wasserstein1(&u, &u).unwrap(), 0.0);
        // the middle cell of an odd grid, width w: W₁ to uniform is (1 - w)/4
        let c = EigenfunctionMeasure::concentrated(511, 255);
        let w = 1.0 / 511.0;
        assert!((wasserstein1(&c, &u).unwrap() - (1.0 - w) / 4.0).abs() < 1e-12);
        assert!((wasserstein1_to_point(&u, 0.5) - 0.25).abs() < 1e-15);
        assert!(wasserstein1(&u, &EigenfunctionMeasure::uniform(512)).is_err());
    }

    #[test]
    fn coarsening_preserves_mass() {
        let density: Vec<f64> = (0..512)
            .map(|i| 1.0 + (i as f64 * 0.1).sin().abs())
            .collect();
        let mu = EigenfunctionMeasure::from_density(density, None).unwrap();
        let coarse = mu.coarsen(8).unwrap();
        assert_eq!(coarse.cells(), 64);
        assert!((coarse.total_mass() - mu.total_mass()).abs() < 1e-14);
        assert!(mu.coarsen(7).is_err());
    }
}
