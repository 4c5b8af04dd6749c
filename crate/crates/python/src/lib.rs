//! Python module `kirchhoff_lab`.

use std::path::Path;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use kirchhoff::cli::{self, Command, RunConfig};
use kirchhoff::ground_state::{build_ground_state_with, energy_constants, KirchhoffParams, ShootingOptions};
use kirchhoff::spectral::{build_sector, sector_spectrum, spectral_report};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn params(a: f64, b: f64, p: f64) -> PyResult<KirchhoffParams> {
    KirchhoffParams::new(a, b, p).map_err(value_err)
}

fn shooting(step: Option<f64>) -> ShootingOptions {
    let mut opts = ShootingOptions::default();
    if let Some(h) = step {
        opts.step = h;
    }
    opts
}

/// Ground state constants and the sampled profile `(r, U)`.
#[pyfunction]
#[pyo3(signature = (a, b, p, step=None))]
pub fn ground_state(py: Python<'_>, a: f64, b: f64, p: f64, step: Option<f64>) -> PyResult<Bound<'_, PyDict>> {
    let gs = build_ground_state_with(params(a, b, p)?, shooting(step)).map_err(runtime_err)?;
    let (big_a, big_b, m) = energy_constants(&gs);
    let d = PyDict::new(py);
    d.set_item("c", gs.c)?;
    d.set_item("K", gs.k_u)?;
    d.set_item("M", gs.m_u)?;
    d.set_item("P", gs.p_u)?;
    d.set_item("A", big_a)?;
    d.set_item("B", big_b)?;
    d.set_item("m", m)?;
    d.set_item("self_consistency", gs.self_consistency())?;
    d.set_item("nehari", gs.profile.nehari_defect())?;
    d.set_item("pohozaev", gs.profile.pohozaev_defect())?;
    d.set_item("r", gs.grid().nodes().to_vec())?;
    d.set_item("u", gs.u.values().to_vec())?;
    Ok(d)
}

/// Lowest `n_eigs` eigenvalues of the angular-momentum-`k` sector operator.
#[pyfunction]
#[pyo3(signature = (a, b, p, k, n_eigs=4, step=None))]
pub fn sector_eigenvalues(a: f64, b: f64, p: f64, k: u32, n_eigs: usize, step: Option<f64>) -> PyResult<Vec<f64>> {
    let gs = build_ground_state_with(params(a, b, p)?, shooting(step)).map_err(runtime_err)?;
    Ok(sector_spectrum(&build_sector(&gs, k), n_eigs))
}

/// Kernel summary over sectors `0..=max_k`.
#[pyfunction]
#[pyo3(signature = (a, b, p, max_k=5))]
pub fn nondegeneracy(py: Python<'_>, a: f64, b: f64, p: f64, max_k: u32) -> PyResult<Bound<'_, PyDict>> {
    let gs = build_ground_state_with(params(a, b, p)?, ShootingOptions::default()).map_err(runtime_err)?;
    let report = spectral_report(&gs, max_k, 4);
    let d = PyDict::new(py);
    let kernel: Vec<u32> = report.sectors.iter().filter(|s| s.near_zero > 0).map(|s| s.k).collect();
    d.set_item("kernel_sectors", kernel)?;
    d.set_item("kernel_dimension", report.kernel_dimension)?;
    d.set_item("kernel_cosine", report.kernel_cosine)?;
    d.set_item("smallest_singular_value", report.smallest_singular_value)?;
    d.set_item("certified", report.certified)?;
    Ok(d)
}

/// Runs a CLI subcommand with a JSON config and returns the report as JSON.
#[pyfunction]
#[pyo3(signature = (command, config="{}", out_dir="out"))]
pub fn run(py: Python<'_>, command: &str, config: &str, out_dir: &str) -> PyResult<String> {
    let cmd = Command::from_name(command).ok_or_else(|| value_err(format!("unknown command {command:?}")))?;
    let cfg = RunConfig::from_json(config, "<config>").map_err(value_err)?;
    let out = Path::new(out_dir).to_path_buf();
    let report = py.detach(|| cli::run(cmd, &cfg, &out)).map_err(runtime_err)?;
    serde_json::to_string(&report).map_err(runtime_err)
}

/// Reads a field written by `perturb` as `(values, n, half_width)`.
#[pyfunction]
pub fn read_field(path: &str) -> PyResult<(Vec<f64>, usize, f64)> {
    let (field, header) = kirchhoff::io::read_field(Path::new(path)).map_err(value_err)?;
    Ok((field.values, header.grid.n, header.grid.half_width))
}

#[pymodule]
fn kirchhoff_lab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(ground_state, m)?)?;
    m.add_function(wrap_pyfunction!(sector_eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(nondegeneracy, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(read_field, m)?)?;
    Ok(())
}
