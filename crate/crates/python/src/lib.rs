//! Python bindings: coverage and collision probabilities, expected draws and
//! toy-run bound tables.

use negbound::bounds::{write_csv, EvalProtocol};
use negbound::probkit::{
    all_classes_probability_with, collision_probability, expected_draws as quadrature_draws, ClassDistribution,
    CoverMethod, ProbEstimate,
};
use negbound::toytrain::{run_toy, TrainConfig};
use pyo3::exceptions::{PyArithmeticError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: negbound::Error) -> PyErr {
    match e {
        negbound::Error::Diverged { .. } => PyRuntimeError::new_err(e.to_string()),
        e if e.is_numerical() => PyArithmeticError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn distribution(classes: Option<usize>, probs: Option<Vec<f64>>) -> PyResult<ClassDistribution> {
    match (classes, probs) {
        (Some(n), None) => ClassDistribution::uniform(n).map_err(to_py),
        (None, Some(p)) => ClassDistribution::new(p).map_err(to_py),
        _ => Err(PyValueError::new_err("pass exactly one of classes or probs")),
    }
}

fn estimate_tuple(e: ProbEstimate) -> (f64, f64, String) {
    let method = serde_json::to_value(e.method)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default();
    (e.value, e.stderr, method)
}

/// Probability that `draws` draws see every class, as (value, stderr, method).
#[pyfunction]
#[pyo3(signature = (draws, classes=None, probs=None, method="auto", trials=1_000_000, seed=0))]
fn coupon_probability(
    draws: u64,
    classes: Option<usize>,
    probs: Option<Vec<f64>>,
    method: &str,
    trials: u64,
    seed: u64,
) -> PyResult<(f64, f64, String)> {
    let dist = distribution(classes, probs)?;
    let m = match method {
        "auto" => CoverMethod::Auto,
        "dp" => CoverMethod::Dp,
        "ie" => CoverMethod::InclusionExclusion,
        "mc" => CoverMethod::MonteCarlo { trials, seed },
        other => return Err(PyValueError::new_err(format!("unknown method '{other}'"))),
    };
    all_classes_probability_with(&dist, draws, m)
        .map(estimate_tuple)
        .map_err(to_py)
}

/// Probability that at least one of `k` negatives shares the anchor's class.
#[pyfunction]
#[pyo3(signature = (k, classes=None, probs=None))]
fn tau(k: u64, classes: Option<usize>, probs: Option<Vec<f64>>) -> PyResult<f64> {
    Ok(collision_probability(&distribution(classes, probs)?, k).value)
}

/// Expected number of draws to see every class, as (value, ceil).
#[pyfunction]
#[pyo3(signature = (classes=None, probs=None))]
fn expected_draws(classes: Option<usize>, probs: Option<Vec<f64>>) -> PyResult<(f64, u64)> {
    let e = quadrature_draws(&distribution(classes, probs)?).map_err(to_py)?;
    Ok((e.value, e.ceil))
}

/// Trains a toy encoder and returns the bound table for each number of
/// negatives in `ks` as CSV text. Both configurations are JSON objects whose
/// missing keys take their defaults.
#[pyfunction]
#[pyo3(signature = (ks, train_config=None, eval_config=None))]
fn toy_bounds_csv(ks: Vec<usize>, train_config: Option<&str>, eval_config: Option<&str>) -> PyResult<String> {
    let parse_err = |e: serde_json::Error| PyValueError::new_err(e.to_string());
    let config: TrainConfig = match train_config {
        Some(s) => serde_json::from_str(s).map_err(parse_err)?,
        None => TrainConfig::default(),
    };
    let protocol: EvalProtocol = match eval_config {
        Some(s) => serde_json::from_str(s).map_err(parse_err)?,
        None => EvalProtocol::default(),
    };
    let run = run_toy(&config, &protocol, Some(&ks)).map_err(to_py)?;
    let mut buf = Vec::new();
    write_csv(&run.reports, &mut buf).map_err(to_py)?;
    String::from_utf8(buf).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
fn negbound_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(coupon_probability, m)?)?;
    m.add_function(wrap_pyfunction!(tau, m)?)?;
    m.add_function(wrap_pyfunction!(expected_draws, m)?)?;
    m.add_function(wrap_pyfunction!(toy_bounds_csv, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
