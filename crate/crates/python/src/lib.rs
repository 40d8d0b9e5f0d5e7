//! Python bindings: parse TIR programs, run the static analyzer, execute
//! single inputs, and drive whole campaigns. Structured results cross the
//! boundary as JSON strings (load them with `json.loads`).

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use std::sync::Arc;

use tirfuzz::fuzzer::{run_campaign, CampaignConfig};
use tirfuzz::report;
use tirfuzz::runtime::execute_with_trace;

/// A parsed, validated TIR program.
#[pyclass(frozen, name = "Program")]
struct PyProgram {
    inner: Arc<tirfuzz::ir::Program>,
}

#[pymethods]
impl PyProgram {
    /// Parse and validate TIR source text.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        tirfuzz::ir::parse_program(text)
            .map(|p| PyProgram { inner: Arc::new(p) })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    /// Canonical text form.
    fn pretty(&self) -> String {
        tirfuzz::ir::pretty_print(&self.inner)
    }

    fn function_names(&self) -> Vec<String> {
        self.inner.functions.iter().map(|f| f.name.clone()).collect()
    }

    fn digest(&self) -> String {
        report::program_digest(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "Program({} functions, digest {})",
            self.inner.functions.len(),
            report::program_digest(&self.inner)
        )
    }
}

fn products_for(
    program: &PyProgram,
    targets: &[String],
) -> PyResult<report::AnalysisProducts> {
    report::analyze_program(&program.inner, targets)
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Static analysis report as a JSON string.
#[pyfunction]
fn analyze(program: &PyProgram, targets: Vec<String>) -> PyResult<String> {
    let products = products_for(program, &targets)?;
    Ok(report::analyze_report(&program.inner, &products).to_string())
}

/// Execute one input under the targets' instrumentation plan; returns the
/// replay record as a JSON string.
#[pyfunction]
#[pyo3(signature = (program, targets, input, step_limit = 100_000))]
fn replay(
    program: &PyProgram,
    targets: Vec<String>,
    input: &Bound<'_, PyBytes>,
    step_limit: u64,
) -> PyResult<String> {
    let products = products_for(program, &targets)?;
    let config = CampaignConfig::default();
    let (plan, _) = report::assemble_plan(&program.inner, &products, &config)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    let (outcome, feedback, trace) =
        execute_with_trace(&program.inner, input.as_bytes(), &plan, step_limit);
    Ok(report::replay_report(&program.inner, &outcome, &feedback, &trace).to_string())
}

/// Run a fuzzing campaign; returns the campaign report as a JSON string.
/// Time is virtual (executions) by default so runs reproduce exactly.
#[pyfunction]
#[pyo3(signature = (
    program,
    targets,
    seed = 1,
    time_budget = 50_000,
    t_x = 2_000.0,
    step_limit = 5_000,
    bitmap_size = 65_536,
    virtual_time = true,
    stop_on_first_crash = false,
    seed_len = 4,
    ablation = None,
))]
#[allow(clippy::too_many_arguments)]
fn fuzz(
    program: &PyProgram,
    targets: Vec<String>,
    seed: u64,
    time_budget: u64,
    t_x: f64,
    step_limit: u64,
    bitmap_size: usize,
    virtual_time: bool,
    stop_on_first_crash: bool,
    seed_len: usize,
    ablation: Option<String>,
) -> PyResult<String> {
    let mut config = CampaignConfig {
        rng_seed: seed,
        time_budget,
        t_x,
        step_limit,
        bitmap_size,
        virtual_time,
        stop_on_first_crash,
        initial_seed_len: seed_len,
        ..CampaignConfig::default()
    };
    if let Some(a) = ablation {
        tirfuzz::cli::apply_ablation(&mut config, &a).map_err(PyValueError::new_err)?;
    }
    let products = products_for(program, &targets)?;
    if !products.reachable {
        return Err(PyValueError::new_err(format!(
            "target unreachable: {}",
            products.diagnostics.join("; ")
        )));
    }
    let (plan, _) = report::assemble_plan(&program.inner, &products, &config)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    let campaign = run_campaign(&program.inner, plan, config)
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(report::campaign_report(&program.inner, &campaign).to_string())
}

#[pymodule]
fn tirfuzz_python(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProgram>()?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(replay, m)?)?;
    m.add_function(wrap_pyfunction!(fuzz, m)?)?;
    Ok(())
}
