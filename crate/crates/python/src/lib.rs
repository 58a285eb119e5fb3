//! Python bindings. Configs are passed as the same `key = value` text the
//! command-line runner reads.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use mmwcov::analytic::{CoverageEngine, Interference};
use mmwcov::channel::AngleLaw;
use mmwcov::cli::{execute, parse_config, RunConfig};
use mmwcov::simkernel::run_experiment;

fn py_err(e: mmwcov::Error) -> PyErr {
    PyValueError::new_err(format!("{} ({})", e, e.kind()))
}

fn config(text: &str) -> PyResult<RunConfig> {
    parse_config(text).map_err(py_err)
}

/// Canonical text of the reference configuration.
#[pyfunction]
fn defaults() -> String {
    RunConfig::default().canonical_text()
}

/// Canonical text and digest of a config document.
#[pyfunction]
fn canonicalize(text: &str) -> PyResult<(String, String)> {
    let c = config(text)?;
    Ok((c.canonical_text(), c.digest()))
}

/// Analytic SINR coverage on the config's threshold grid, as `(thresholds_db, ccdf)`.
#[pyfunction]
fn analytic_coverage(text: &str) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let c = config(text)?;
    let p = c.params();
    let engine = CoverageEngine::new(&p, c.analytic_config()).map_err(py_err)?;
    let model = match (c.interference, p.paths_los == 1 && p.paths_nlos == 1) {
        (false, _) => Interference::Off,
        (true, true) => Interference::SinglePath,
        (true, false) => Interference::LowerBound,
    };
    let curve = engine.coverage_curve(&c.thresholds_db(), model, "analytic").map_err(py_err)?;
    Ok((curve.thresholds, curve.values))
}

/// Simulated SINR coverage, as `(thresholds_db, ccdf, ci_low, ci_high)`.
#[pyfunction]
fn simulate_coverage(text: &str) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
    let c = config(text)?;
    let r = run_experiment(&c.plan(c.params(), c.scheme)).map_err(py_err)?;
    let ci = r.sinr.ci.unwrap_or_default();
    Ok((r.sinr.thresholds, r.sinr.values, ci.iter().map(|x| x.0).collect(), ci.iter().map(|x| x.1).collect()))
}

/// ZF success probability for `users` co-scheduled users on `eta`-path channels.
#[pyfunction]
#[pyo3(signature = (n_bs, n_ue, eta, users, equiprobable = true))]
fn zeta(n_bs: usize, n_ue: usize, eta: usize, users: usize, equiprobable: bool) -> PyResult<f64> {
    let p = mmwcov::NetworkParams { n_bs, n_ue, ..mmwcov::NetworkParams::table1() };
    let law = if equiprobable { AngleLaw::Equiprobable } else { AngleLaw::Arcsine };
    Ok(mmwcov::analytic::zf_success_prob(eta, users, &p, law).map_err(py_err)?.value)
}

/// Runs a config end to end and returns the JSON summary.
#[pyfunction]
fn run(text: &str, output_dir: &str) -> PyResult<String> {
    let mut c = config(text)?;
    c.output_dir = output_dir.into();
    let s = execute(&c).map_err(py_err)?;
    serde_json::to_string(&s).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn mmwcov_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(defaults, m)?)?;
    m.add_function(wrap_pyfunction!(canonicalize, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_coverage, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_coverage, m)?)?;
    m.add_function(wrap_pyfunction!(zeta, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
