//! Spectra and eigenfunction measures of the one-dimensional Schrödinger
//! operator `H = -d²/dt² + a(t) F(X_t)`, where `a` decays like `t^{-α}` and
//! `X` is Brownian motion on the circle, together with reference samplers
//! for the scaling limits of its eigenvalues and eigenfunctions.

// `!(x > 0.0)` is used throughout to reject NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decay;
pub mod error;
pub mod experiment;
pub mod fd;
pub mod io;
pub mod measure;
pub mod oracles;
pub mod points;
pub mod potential;
pub mod prufer;
pub mod rng;
pub mod stats;
pub mod torus;
pub mod tridiag;

pub use error::{Error, Result};
