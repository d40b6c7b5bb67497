//! Python bindings: a thin layer over `decay_spectra` returning plain lists,
//! tuples and dicts.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use decay_spectra::decay::DecayProfile;
use decay_spectra::experiment::{run_experiment, ExperimentConfig};
use decay_spectra::measure::localization_center;
use decay_spectra::oracles::{
    clock_sample, expbm_measure_sample, poisson_sample, sine_beta_sample, Kernel,
};
use decay_spectra::points::{Origin, PointSample, Window};
use decay_spectra::stats::{self, gap_statistics};
use decay_spectra::torus::{lyapunov_tau, DiffusionSpec, TorusField};
use decay_spectra::Error;

fn to_py(e: Error) -> PyErr {
    match e.exit_code() {
        2 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Lyapunov exponent `tau(E)` of the field at energy `E`.
#[pyfunction]
#[pyo3(signature = (energy, field = "cos", sigma2 = 1.0))]
fn tau(energy: f64, field: &str, sigma2: f64) -> PyResult<f64> {
    let field: TorusField = field.parse().map_err(to_py)?;
    let spec = DiffusionSpec::new(sigma2).map_err(to_py)?;
    lyapunov_tau(&field, spec, energy).map_err(to_py)
}

/// Integral of `a(s)^2` over `[lower, upper]`.
#[pyfunction]
fn integral_a_squared(alpha: f64, lower: f64, upper: f64) -> PyResult<f64> {
    DecayProfile::new(alpha)
        .and_then(|p| p.integral_a_squared(lower, upper))
        .map_err(to_py)
}

/// Run the experiment described by a `key = value` config text. One dict
/// per realization: `index`, `seed`, `energies`, `points`, `centers`.
#[pyfunction]
fn simulate<'py>(py: Python<'py>, config: &str) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let config = ExperimentConfig::parse(config).map_err(to_py)?;
    let outputs = py.detach(|| run_experiment(&config)).map_err(to_py)?;
    outputs
        .into_iter()
        .map(|o| {
            let d = PyDict::new(py);
            d.set_item("index", o.index)?;
            d.set_item("seed", o.seed)?;
            d.set_item("energies", o.spectrum.energies)?;
            d.set_item("points", o.points.points().to_vec())?;
            let centers: Vec<f64> = o
                .pairs
                .iter()
                .map(|p| localization_center(&p.measure))
                .collect();
            d.set_item("centers", centers)?;
            Ok(d)
        })
        .collect()
}

/// Points of `clock`, `poisson` or `sine_beta` (with `param = beta`) in
/// `[lo, hi)`.
#[pyfunction]
#[pyo3(signature = (kind, lo, hi, seed, param = None))]
fn oracle_points(
    kind: &str,
    lo: f64,
    hi: f64,
    seed: u64,
    param: Option<f64>,
) -> PyResult<Vec<f64>> {
    let window = Window::new(lo, hi).map_err(to_py)?;
    let sample = match (kind, param) {
        ("clock", _) => clock_sample(window, seed),
        ("poisson", _) => poisson_sample(window, seed),
        ("sine_beta", Some(beta)) => sine_beta_sample(beta, window, seed).map_err(to_py)?,
        ("sine_beta", None) => return Err(PyValueError::new_err("sine_beta needs param = beta")),
        _ => {
            return Err(PyValueError::new_err(format!(
                "unknown point process {kind:?}"
            )))
        }
    };
    Ok(sample.points().to_vec())
}

/// Cell densities of an `exp_bm` measure and its centre `U`.
#[pyfunction]
#[pyo3(signature = (tau, seed, cells = 512, kernel = "log_ratio"))]
fn expbm_measure(tau: f64, seed: u64, cells: usize, kernel: &str) -> PyResult<(Vec<f64>, f64)> {
    let kernel: Kernel = kernel.parse().map_err(to_py)?;
    let (mu, u) = expbm_measure_sample(tau, kernel, cells, seed).map_err(to_py)?;
    Ok((mu.density().to_vec(), u))
}

/// `(mean, sd, count)` of the gaps of sorted points.
#[pyfunction]
fn gap_stats(points: Vec<f64>) -> PyResult<(f64, f64, usize)> {
    let (lo, hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        });
    if lo.is_nan() || hi.is_nan() || lo >= hi {
        return Err(PyValueError::new_err("need at least two distinct points"));
    }
    let window = Window::new(lo, hi.next_up()).map_err(to_py)?;
    let g = gap_statistics(&PointSample::new(window, points, Origin::Simulation)).map_err(to_py)?;
    Ok((g.mean, g.sd, g.len()))
}

#[pyfunction]
fn ks_two_sample(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    stats::ks_two_sample(&a, &b).map_err(to_py)
}

#[pyfunction]
fn w1_empirical(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    stats::w1_empirical(&a, &b).map_err(to_py)
}

#[pymodule]
fn decay_spectra_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(tau, m)?)?;
    m.add_function(wrap_pyfunction!(integral_a_squared, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_points, m)?)?;
    m.add_function(wrap_pyfunction!(expbm_measure, m)?)?;
    m.add_function(wrap_pyfunction!(gap_stats, m)?)?;
    m.add_function(wrap_pyfunction!(ks_two_sample, m)?)?;
    m.add_function(wrap_pyfunction!(w1_empirical, m)?)?;
    Ok(())
}
