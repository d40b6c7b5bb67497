//! The realized potential `q(t) = a(t) F(X_t)`.
//!
//! Values are exact at the path nodes and linearly interpolated in between,
//! so the finite-difference and Prüfer solvers see the same function.

use crate::decay::DecayProfile;
use crate::error::{Error, Result};
use crate::torus::{DisorderPath, TorusField};

#[derive(Debug, Clone)]
pub struct Potential {
    dt: f64,
    nodes: Vec<f64>,
}

impl Potential {
    pub fn new(path: &DisorderPath, field: &TorusField, profile: &DecayProfile) -> Result<Self> {
        field.validate()?;
        let dt = path.dt();
        let nodes = path
            .values()
            .iter()
            .enumerate()
            .map(|(i, &x)| profile.evaluate(i as f64 * dt) * field.value_fast(x))
            .collect();
        Ok(Self { dt, nodes })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn duration(&self) -> f64 {
        (self.nodes.len() - 1) as f64 * self.dt
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn require_cover(&self, t_end: f64) -> Result<()> {
        if t_end > self.duration() * (1.0 + 1e-12) + 1e-12 {
            return Err(Error::invalid(format!(
                "path covers [0, {}] but [0, {t_end}] is required",
                self.duration()
            )));
        }
        Ok(())
    }

    /// `q(t)`, clamped to the covered interval.
    pub fn at(&self, t: f64) -> f64 {
        let x = t / self.dt;
        let last = self.nodes.len() - 1;
        let k = x.floor();
        if k < 0.0 {
            return self.nodes[0];
        }
        let k = k as usize;
        if k >= last {
            return self.nodes[last];
        }
        let frac = x - k as f64;
        // snap near-node evaluations so grids that coincide with the path
        // reproduce node values exactly
        if frac < 1e-9 {
            return self.nodes[k];
        }
        if frac > 1.0 - 1e-9 {
            return self.nodes[k + 1];
        }
        self.nodes[k] + frac * (self.nodes[k + 1] - self.nodes[k])
    }
}

#[cfg(test)]
pub(crate) mod tests_support {
    use super::Potential;

    pub(crate) fn with_nodes(dt: f64, nodes: Vec<f64>) -> Potential {
        Potential { dt, nodes }
    }
}
