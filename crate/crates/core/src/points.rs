use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Where a point configuration came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Origin {
    Simulation,
    Clock,
    Poisson,
    SineBeta,
    ExpBm,
}

impl Origin {
    pub fn as_str(&self) -> &'static str {
        match self {
            Origin::Simulation => "simulation",
            Origin::Clock => "clock",
            Origin::Poisson => "poisson",
            Origin::SineBeta => "sine_beta",
            Origin::ExpBm => "exp_bm",
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Origin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "simulation" => Origin::Simulation,
            "clock" => Origin::Clock,
            "poisson" => Origin::Poisson,
            "sine_beta" => Origin::SineBeta,
            "exp_bm" => Origin::ExpBm,
            other => return Err(Error::invalid(format!("unknown origin {other:?}"))),
        })
    }
}

/// Half-open observation window `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::invalid(format!("invalid window [{lo}, {hi})")));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x < self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// A finite point configuration observed in a window.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSample {
    window: Window,
    points: Vec<f64>,
    origin: Origin,
}

impl PointSample {
    /// Keeps the points inside the window and sorts them.
    pub fn new(window: Window, points: impl IntoIterator<Item = f64>, origin: Origin) -> Self {
        let mut points: Vec<f64> = points.into_iter().filter(|&x| window.contains(x)).collect();
        points.sort_by(f64::total_cmp);
        Self {
            window,
            points,
            origin,
        }
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Consecutive spacings.
    pub fn gaps(&self) -> Vec<f64> {
        self.points.windows(2).map(|w| w[1] - w[0]).collect()
    }
}
