//! Python bindings. Configs travel as TOML text and results come back as
//! plain dicts and lists decoded from the JSON artifacts.

use haps_planner::channel::{free_space_loss, p_los as core_p_los};
use haps_planner::optimizer::{run_baseline, solve as core_solve, Regime};
use haps_planner::report::{baseline_row, build_artifact};
use haps_planner::scenario::linear_to_db;
use haps_planner::{min_ris_for_full_coverage, CoverageRegime, PlannerError, ScenarioConfig, SweepSpec};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn to_py(e: PlannerError) -> PyErr {
    match e {
        PlannerError::Io(m) => PyIOError::new_err(m),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn to_object<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_config(config: Option<&str>) -> PyResult<ScenarioConfig> {
    config.map_or_else(|| Ok(ScenarioConfig::default()), |t| ScenarioConfig::from_toml_str(t).map_err(to_py))
}

/// Default scenario as TOML text.
#[pyfunction]
fn default_config() -> String {
    ScenarioConfig::default().to_toml_string()
}

/// Builds the scenario and returns its user positions; raises ValueError
/// naming the offending field.
#[pyfunction]
#[pyo3(signature = (config=None, seed=0))]
fn validate_config(config: Option<&str>, seed: u64) -> PyResult<Vec<(f64, f64)>> {
    let s = parse_config(config)?.build(seed).map_err(to_py)?;
    Ok(s.users.iter().map(|p| (p.x, p.y)).collect())
}

/// Full solution artifact: summary, per-user rows, per-kappa trace.
#[pyfunction]
#[pyo3(signature = (config=None, seed=0))]
fn solve<'py>(py: Python<'py>, config: Option<&str>, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let cfg = parse_config(config)?;
    let artifact = py
        .detach(|| {
            let scenario = cfg.build(seed)?;
            let out = core_solve(&scenario, &cfg.optimizer, seed)?;
            Ok(build_artifact(&out, &cfg, &scenario, seed))
        })
        .map_err(to_py)?;
    to_object(py, &artifact)
}

/// One row per regime: uav-only, haps-only, equal-split, optimized.
#[pyfunction]
#[pyo3(signature = (config=None, seed=0))]
fn baseline<'py>(py: Python<'py>, config: Option<&str>, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let cfg = parse_config(config)?;
    let rows = py
        .detach(|| {
            let scenario = cfg.build(seed)?;
            Regime::ALL
                .iter()
                .map(|&r| Ok(baseline_row(r, &run_baseline(r, &scenario, &cfg.optimizer, seed)?.best)))
                .collect::<Result<Vec<_>, PlannerError>>()
        })
        .map_err(to_py)?;
    to_object(py, &rows)
}

/// Sweep rows sorted by value then seed.
#[pyfunction]
fn sweep<'py>(py: Python<'py>, spec: &str) -> PyResult<Bound<'py, PyAny>> {
    let spec = SweepSpec::from_toml_str(spec).map_err(to_py)?;
    let result = py.detach(|| haps_planner::run_sweep(&spec)).map_err(to_py)?;
    to_object(py, &result.rows)
}

/// Smallest RIS size with no user in outage at `r0_bps`. `max_uav=None`
/// means HAPS-RIS only.
#[pyfunction]
#[pyo3(signature = (r0_bps, max_uav=None, config=None, seed=0))]
fn min_ris<'py>(
    py: Python<'py>,
    r0_bps: f64,
    max_uav: Option<usize>,
    config: Option<&str>,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = parse_config(config)?;
    let regime = max_uav.map_or(CoverageRegime::HapsOnly, |max_uav| CoverageRegime::UavAssisted { max_uav });
    let result = py
        .detach(|| {
            let scenario = cfg.build(seed)?;
            min_ris_for_full_coverage(r0_bps, regime, &scenario, &cfg.optimizer, seed)
        })
        .map_err(to_py)?;
    to_object(py, &result)
}

#[pyfunction]
#[pyo3(signature = (elevation_deg, psi=5.0, beta=0.5))]
fn p_los(elevation_deg: f64, psi: f64, beta: f64) -> f64 {
    core_p_los(elevation_deg, psi, beta)
}

/// Free-space loss in dB under the default radio parameters.
#[pyfunction]
#[pyo3(signature = (distance_m, fc_hz=2e9))]
fn free_space_loss_db(distance_m: f64, fc_hz: f64) -> f64 {
    let radio = ScenarioConfig { fc_hz, ..ScenarioConfig::default() }.radio();
    linear_to_db(free_space_loss(distance_m, &radio))
}

#[pymodule]
#[pyo3(name = "haps_planner")]
fn haps_planner_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(validate_config, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(baseline, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(min_ris, m)?)?;
    m.add_function(wrap_pyfunction!(p_los, m)?)?;
    m.add_function(wrap_pyfunction!(free_space_loss_db, m)?)?;
    Ok(())
}
