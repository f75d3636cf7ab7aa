//! Python bindings: thin wrappers that return plain Python values.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use qfound::acceptance::{run_acceptance, AcceptOptions};
use qfound::epistemic::{fr_build_kb, fr_quantum_probability, fr_run, TrustMode, FR_MAX_DEPTH};
use qfound::hardylab::{coincidence_probability, lhv_search, run_scenario, ApparatusConfig, CC, CD, DC, DD, GAMMA};
use qfound::hepplab::{evolve_chain, reduced_coherence, ChainState};
use qfound::kslab::gleason::sample_frame_function;
use qfound::kslab::{color_search, gleason_fit, parse_ray_text, validate_rays, KS117_TEXT};
use qfound::numkernel::random::{random_density, seeded};
use qfound::numkernel::{TolerancePolicy, C64};
use qfound::waylab::minimal_cutoff;
use std::collections::BTreeMap;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn config(name: &str) -> PyResult<ApparatusConfig> {
    ApparatusConfig::parse(name).ok_or_else(|| value_err(format!("unknown config {name:?}; expected neither, plus, minus or both")))
}

/// Exact coincidence probability P(d⁺d⁻) as (numerator, denominator, float).
#[pyfunction]
#[pyo3(signature = (config_name = "both"))]
fn hardy_coincidence(config_name: &str) -> PyResult<(i64, i64, f64)> {
    let co = coincidence_probability(config(config_name)?).map_err(value_err)?;
    Ok((*co.exact.numer(), *co.exact.denom(), co.float))
}

/// Detector-pair probabilities as "p/q" strings, keyed by channel label.
#[pyfunction]
#[pyo3(signature = (config_name = "both"))]
fn hardy_probabilities(config_name: &str) -> PyResult<BTreeMap<String, String>> {
    let amps = run_scenario(config(config_name)?);
    let mut out = BTreeMap::new();
    for (label, ch) in [("cc", CC), ("cd", CD), ("dc", DC), ("dd", DD), ("gamma", GAMMA)] {
        out.insert(label.to_string(), amps.probability(ch).map_err(value_err)?.to_string());
    }
    Ok(out)
}

/// True when no deterministic assignment produces both dark clicks.
#[pyfunction]
fn hardy_lhv_refuted() -> bool {
    lhv_search().contradiction
}

/// The bundled 117-ray file as text.
#[pyfunction]
fn ks117_text() -> &'static str {
    KS117_TEXT
}

/// Whether a ray file admits a two-valued coloring.
#[pyfunction]
#[pyo3(signature = (text, dim = 3))]
fn ks_colorable(text: &str, dim: usize) -> PyResult<bool> {
    let rays = parse_ray_text(text).map_err(value_err)?;
    let (g, _) = validate_rays(&rays, dim);
    Ok(color_search(&g, &BTreeMap::new()).map_err(value_err)?.coloring.is_some())
}

/// Fit a random density operator from frame-function samples; returns
/// (max entry error, fit residual).
#[pyfunction]
#[pyo3(signature = (seed, dim = 3, bases = 50))]
fn gleason_roundtrip(seed: u64, dim: usize, bases: usize) -> PyResult<(f64, f64)> {
    if dim < 2 {
        return Err(value_err("dim must be at least 2"));
    }
    let mut rng = seeded(seed);
    let t = random_density(&mut rng, dim).matrix().clone();
    let fit = gleason_fit(&sample_frame_function(&t, bases, &mut rng), dim, &TolerancePolicy::default());
    Ok((fit.t.max_diff(&t), fit.residual))
}

/// Exact P(ok~ ∧ ok) as (numerator, denominator).
#[pyfunction]
fn fr_probability() -> (i64, i64) {
    let (p, _) = fr_quantum_probability();
    (*p.numer(), *p.denom())
}

/// Verdict label of the bundled scenario in "plain" or "contextual" mode.
#[pyfunction]
#[pyo3(signature = (mode = "plain"))]
fn fr_verdict(mode: &str) -> PyResult<String> {
    let mode = TrustMode::parse(mode).ok_or_else(|| value_err(format!("unknown mode {mode:?}")))?;
    let run = fr_run(&fr_build_kb(mode), FR_MAX_DEPTH).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(run.verdict.label())
}

/// Smallest N with 2l/(N + ½) ≤ epsilon.
#[pyfunction]
fn way_cutoff(l: i64, epsilon: f64) -> PyResult<i64> {
    if l < 1 || epsilon.is_nan() || epsilon <= 0.0 {
        return Err(value_err("need l ≥ 1 and epsilon > 0"));
    }
    Ok(minimal_cutoff(l, epsilon))
}

/// |ρ₊₋| of the system after `t` kicks of an `n`-site chain.
#[pyfunction]
#[pyo3(signature = (theta, t, n = 10))]
fn hepp_coherence(theta: f64, t: usize, n: usize) -> PyResult<f64> {
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let s = ChainState::new(h, h, n, theta).map_err(value_err)?;
    Ok(reduced_coherence(&evolve_chain(&s, t).map_err(value_err)?))
}

/// Run an acceptance suite; one (number, title, passed) per criterion.
#[pyfunction]
#[pyo3(signature = (suite = "all", seed = 42))]
fn accept(suite: &str, seed: u64) -> PyResult<Vec<(usize, String, bool)>> {
    let opts = AcceptOptions { seed, ..AcceptOptions::default() };
    let results = run_acceptance(suite, &opts).ok_or_else(|| value_err(format!("unknown suite {suite:?}")))?;
    Ok(results.iter().map(|r| (r.criterion.number, r.criterion.title.to_string(), r.passed())).collect())
}

/// Run the command-line driver with the given arguments; returns its exit code.
#[pyfunction]
fn cli(args: Vec<String>) -> i32 {
    qfound::cli::dispatch(std::iter::once("qfound".to_string()).chain(args))
}

#[pymodule]
fn qfound_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(hardy_coincidence, m)?)?;
    m.add_function(wrap_pyfunction!(hardy_probabilities, m)?)?;
    m.add_function(wrap_pyfunction!(hardy_lhv_refuted, m)?)?;
    m.add_function(wrap_pyfunction!(ks117_text, m)?)?;
    m.add_function(wrap_pyfunction!(ks_colorable, m)?)?;
    m.add_function(wrap_pyfunction!(gleason_roundtrip, m)?)?;
    m.add_function(wrap_pyfunction!(fr_probability, m)?)?;
    m.add_function(wrap_pyfunction!(fr_verdict, m)?)?;
    m.add_function(wrap_pyfunction!(way_cutoff, m)?)?;
    m.add_function(wrap_pyfunction!(hepp_coherence, m)?)?;
    m.add_function(wrap_pyfunction!(accept, m)?)?;
    m.add_function(wrap_pyfunction!(cli, m)?)?;
    Ok(())
}
