use plm::asymptotics::{solve as ode_solve, OdeControls};
use plm::cyclefinder::{run_pipeline, CycleConfig};
use plm::dist::{bhattacharyya as bc, exponential_threshold_rate, threshold_margin as margin, DivergenceConfig, WeightDistribution};
use plm::harness::checks::CheckName;
use plm::harness::{build_instance, run_checks, ExperimentConfig};
use plm::matching::{mle, objective, reconstruction_error, LlrGraph};
use plm::model::{read_instance, write_instance, PlantedInstance};
use plm::posterior::exhaustive_posterior_llr;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn law(s: &str) -> PyResult<WeightDistribution> {
    s.parse().map_err(err)
}

/// Bhattacharyya coefficient of two laws given as `exp:1`, `unif:0:1`, ...
#[pyfunction]
fn bhattacharyya(p: &str, q: &str) -> PyResult<f64> {
    bc(&law(p)?, &law(q)?, &DivergenceConfig::default()).map_err(err)
}

/// `sqrt(d) B(p, q) - 1`.
#[pyfunction]
fn threshold_margin(d: f64, p: &str, q: &str) -> PyResult<f64> {
    margin(d, &law(p)?, &law(q)?, &DivergenceConfig::default()).map_err(err)
}

/// Planted rate at which the exponential model of size `n` sits at the threshold.
#[pyfunction]
fn exponential_threshold(n: usize) -> PyResult<f64> {
    exponential_threshold_rate(n, &DivergenceConfig::default()).map_err(err)
}

/// Instance file text with the planted trailer.
#[pyfunction]
#[pyo3(signature = (model, n, param, seed=0))]
fn generate(model: &str, n: usize, param: f64, seed: u64) -> PyResult<String> {
    let inst = build_instance(model, n, param, seed).map_err(err)?;
    Ok(write_instance(&inst.graph, Some(&inst.planted)))
}

/// Maximum-likelihood matching of an instance: `(perm, error, objective)`,
/// with `error` None when the instance has no planted trailer.
#[pyfunction]
fn solve(instance: &str) -> PyResult<(Vec<usize>, Option<f64>, f64)> {
    let file = read_instance(instance).map_err(err)?;
    let llr = LlrGraph::from_graph(&file.graph);
    let m = mle(&llr).map_err(err)?;
    let e = file.planted.as_ref().map(|t| reconstruction_error(&m, t)).transpose().map_err(err)?;
    let obj = objective(&llr, &m);
    Ok((m.into_vec(), e, obj))
}

/// Exhaustive posterior as `<perm> <log-mass>` lines.
#[pyfunction]
fn posterior_dump(instance: &str) -> PyResult<String> {
    let file = read_instance(instance).map_err(err)?;
    Ok(exhaustive_posterior_llr(&LlrGraph::from_graph(&file.graph)).map_err(err)?.dump())
}

/// Asymptotic exponential-model error at rate `lam`.
#[pyfunction]
#[pyo3(signature = (lam, tol=None))]
fn asymptotic_error(lam: f64, tol: Option<f64>) -> PyResult<f64> {
    let mut ctl = OdeControls::default();
    if let Some(t) = tol {
        ctl.rel_tol = t;
        ctl.abs_tol = t / 100.0;
    }
    Ok(ode_solve(lam, &ctl).map_err(err)?.error)
}

/// Cycle-finder report for an instance with a planted trailer.
#[pyfunction]
#[pyo3(signature = (instance, overrides=Vec::new()))]
fn cyclefind(instance: &str, overrides: Vec<(String, String)>) -> PyResult<String> {
    let file = read_instance(instance).map_err(err)?;
    let planted = file.planted.ok_or_else(|| PyValueError::new_err("instance has no planted trailer"))?;
    let inst = PlantedInstance { graph: file.graph, planted };
    let mut cfg = CycleConfig::for_graph(&inst.graph).map_err(err)?;
    for (k, v) in &overrides {
        cfg.set(k, v).map_err(err)?;
    }
    Ok(run_pipeline(&inst, &cfg).map_err(err)?.render())
}

/// Runs an experiment config; returns `(csv, passed)`.
#[pyfunction]
#[pyo3(signature = (config, workers=1))]
fn experiment(config: &str, workers: usize) -> PyResult<(String, bool)> {
    let cfg = ExperimentConfig::parse(config).map_err(err)?;
    let out = plm::harness::run_experiment(&cfg, workers.max(1)).map_err(err)?;
    Ok((out.table.to_csv(), out.passed))
}

/// Runs named property checks; returns `(csv, passed)`.
#[pyfunction]
#[pyo3(signature = (names, seed=0, workers=1))]
fn check(names: Vec<String>, seed: u64, workers: usize) -> PyResult<(String, bool)> {
    let list: Vec<CheckName> = names.iter().map(|s| s.parse()).collect::<Result<_, _>>().map_err(err)?;
    let r = run_checks(&list, seed, workers.max(1));
    Ok((r.table.to_csv(), r.passed))
}

#[pymodule]
#[pyo3(name = "plm")]
fn plm_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(bhattacharyya, m)?)?;
    m.add_function(wrap_pyfunction!(threshold_margin, m)?)?;
    m.add_function(wrap_pyfunction!(exponential_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(posterior_dump, m)?)?;
    m.add_function(wrap_pyfunction!(asymptotic_error, m)?)?;
    m.add_function(wrap_pyfunction!(cyclefind, m)?)?;
    m.add_function(wrap_pyfunction!(experiment, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    Ok(())
}
