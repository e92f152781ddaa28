//! Python bindings. Structured results (records, reports) are returned as
//! plain dicts and lists via their JSON form.

use std::path::PathBuf;
use std::sync::Arc;

use gff_thinlab::cli::{run_experiment as run_cfg, ExperimentConfig};
use gff_thinlab::dyadic::{box_count as set_box_count, Cell, DyadicWord, Shape};
use gff_thinlab::exploration::{self, BranchingSchedule};
use gff_thinlab::green_field::{self, LatticeDomain};
use gff_thinlab::rng::StreamKey;
use gff_thinlab::thinness;
use gff_thinlab::Error;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn err(e: Error) -> PyErr {
    match e {
        Error::Io(_) => PyOSError::new_err(e.to_string()),
        Error::Resolution(_) | Error::Budget(_) | Error::Range(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_py<'py>(py: Python<'py>, v: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let s = serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (s,))
}

fn key(seed: u64, replica: u64) -> StreamKey {
    StreamKey::replica(seed, replica)
}

/// Lattice Green operator of the unit box with `side` intervals per axis.
#[pyclass(name = "GreensOperator", frozen)]
struct PyGreens {
    inner: Arc<green_field::GreensOperator>,
}

#[pymethods]
impl PyGreens {
    #[new]
    fn new(dim: usize, side: usize) -> PyResult<Self> {
        let dom = LatticeDomain::new(dim, side).map_err(err)?;
        let inner = green_field::GreensOperator::build(dom).map_err(err)?;
        Ok(PyGreens {
            inner: Arc::new(inner),
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.domain().dim()
    }

    #[getter]
    fn side(&self) -> usize {
        self.inner.domain().side()
    }

    #[getter]
    fn mesh(&self) -> f64 {
        self.inner.domain().mesh()
    }

    /// Number of interior vertices.
    fn __len__(&self) -> usize {
        self.inner.domain().len()
    }

    fn index(&self, coords: Vec<usize>) -> usize {
        self.inner.domain().index(&coords)
    }

    fn entry(&self, x: usize, y: usize) -> f64 {
        self.inner.entry(x, y)
    }

    fn apply(&self, w: Vec<f64>) -> PyResult<Vec<f64>> {
        self.check(&w)?;
        Ok(self.inner.apply(&w))
    }

    fn covariance(&self, f: Vec<f64>, g: Vec<f64>) -> PyResult<f64> {
        self.check(&f)?;
        self.check(&g)?;
        Ok(self.inner.covariance(&f, &g))
    }

    fn variance(&self, f: Vec<f64>) -> PyResult<f64> {
        self.check(&f)?;
        Ok(self.inner.variance(&f))
    }

    /// Covariance of the masses of two dyadic cells given by corner and depth.
    #[pyo3(signature = (depth, corner, other_depth=None, other_corner=None, closed=false))]
    fn cell_variance(
        &self,
        depth: usize,
        corner: Vec<u64>,
        other_depth: Option<usize>,
        other_corner: Option<Vec<u64>>,
        closed: bool,
    ) -> PyResult<f64> {
        let d = self.dim();
        let mk = |n: usize, c: &[u64]| -> PyResult<Cell> {
            let w = DyadicWord::from_corner(d, n, c).map_err(err)?;
            Ok(if closed {
                Cell::closed(w)
            } else {
                Cell::open(w)
            })
        };
        let a = mk(depth, &corner)?;
        let b = mk(
            other_depth.unwrap_or(depth),
            other_corner.as_deref().unwrap_or(&corner),
        )?;
        green_field::cell_variance(&self.inner, &a, &b).map_err(err)
    }

    #[pyo3(signature = (seed, replica=0))]
    fn sample(&self, seed: u64, replica: u64) -> PyFieldSample {
        PyFieldSample {
            inner: self.inner.sample(key(seed, replica)),
        }
    }
}

impl PyGreens {
    fn check(&self, w: &[f64]) -> PyResult<()> {
        if w.len() != self.inner.domain().len() {
            return Err(PyValueError::new_err(format!(
                "expected {} interior values, got {}",
                self.inner.domain().len(),
                w.len()
            )));
        }
        Ok(())
    }
}

/// One sample of the lattice field, on interior vertices.
#[pyclass(name = "FieldSample", frozen)]
struct PyFieldSample {
    inner: green_field::FieldSample,
}

#[pymethods]
impl PyFieldSample {
    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    /// Value at lattice coordinates in `0..=m`; zero on the boundary.
    fn at(&self, coords: Vec<usize>) -> f64 {
        self.inner.at(&coords)
    }

    /// `(Gamma, f)` for a weight on interior vertices.
    fn pair(&self, weight: Vec<f64>) -> PyResult<f64> {
        green_field::pair(&self.inner, &weight).map_err(err)
    }

    /// Masses of all open depth-`n` cells, row-major by corner.
    fn open_cell_masses(&self, n: usize) -> PyResult<Vec<f64>> {
        self.inner.open_cell_masses(n).map_err(err)
    }

    #[pyo3(signature = (beta, n, weight=None))]
    fn sup_cell_statistic(&self, beta: f64, n: usize, weight: Option<Vec<f64>>) -> PyResult<f64> {
        thinness::sup_cell_statistic(&self.inner, beta, n, weight.as_deref()).map_err(err)
    }

    /// `sum |(Gamma, 1_s)|` over depth-`n` cells meeting the set described by `set_text`.
    fn indicator_sum(&self, set_text: &str, n: usize) -> PyResult<f64> {
        let shape = Shape::parse(set_text).map_err(err)?;
        thinness::indicator_sum(&self.inner, &shape, n).map_err(err)
    }
}

/// Result of one exploration run.
#[pyclass(name = "ExplorationState", frozen)]
struct PyState {
    inner: exploration::ExplorationState,
}

#[pymethods]
impl PyState {
    #[getter]
    fn generation(&self) -> usize {
        self.inner.generation
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim
    }

    #[getter]
    fn active_count(&self) -> usize {
        self.inner.active.len()
    }

    /// Per-generation records as dicts.
    fn records<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.records)
    }

    fn observables<'py>(&self, py: Python<'py>, n: usize) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &exploration::observables(&self.inner, n).map_err(err)?)
    }

    fn box_count(&self, n: usize) -> PyResult<u64> {
        exploration::box_count(&self.inner, n).map_err(err)
    }

    fn check_invariants(&self) -> PyResult<()> {
        self.inner.check_invariants().map_err(err)
    }
}

#[pyfunction]
fn bm_hit_prob(tau: f64) -> PyResult<f64> {
    exploration::bm_hit_prob(tau).map_err(err)
}

#[pyfunction]
fn branching_time(dim: usize, t: f64, n: usize) -> f64 {
    exploration::branching_times(dim, t, n)
}

#[pyfunction]
#[pyo3(signature = (dim, t, n_max, seed, replica=0))]
fn run_bbm(
    py: Python<'_>,
    dim: usize,
    t: f64,
    n_max: usize,
    seed: u64,
    replica: u64,
) -> PyResult<PyState> {
    let sched = BranchingSchedule::new(dim, t).map_err(err)?;
    let st = py.detach(|| exploration::run_bbm(&sched, n_max, key(seed, replica)));
    Ok(PyState {
        inner: st.map_err(err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (op, n_max, seed, replica=0))]
fn run_field_coupled(
    py: Python<'_>,
    op: &PyGreens,
    n_max: usize,
    seed: u64,
    replica: u64,
) -> PyResult<PyState> {
    let inner = op.inner.clone();
    let st = py.detach(move || exploration::run_field_coupled(&inner, n_max, key(seed, replica)));
    Ok(PyState {
        inner: st.map_err(err)?,
    })
}

#[pyfunction]
fn gaussian_bound_check<'py>(
    py: Python<'py>,
    rho_grid: Vec<f64>,
    p_grid: Vec<f64>,
    bivariate_p: Vec<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    to_py(
        py,
        &thinness::gaussian_bound_check(&rho_grid, &p_grid, &bivariate_p).map_err(err)?,
    )
}

/// Exact `Var(Gamma, 1_{A_n})` for `n` in `lo..=hi`.
#[pyfunction]
fn deterministic_thin_report<'py>(
    py: Python<'py>,
    op: &PyGreens,
    set_text: &str,
    lo: usize,
    hi: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let shape = Shape::parse(set_text).map_err(err)?;
    to_py(
        py,
        &thinness::deterministic_thin_report(&op.inner, &shape, None, lo..=hi).map_err(err)?,
    )
}

#[pyfunction]
fn box_count(set_text: &str, dim: usize, n: usize) -> PyResult<usize> {
    Ok(set_box_count(&Shape::parse(set_text).map_err(err)?, dim, n))
}

/// Run an experiment from configuration text; returns the summary and the
/// written files.
#[pyfunction]
#[pyo3(signature = (config_text, out=None))]
fn run_experiment<'py>(
    py: Python<'py>,
    config_text: &str,
    out: Option<PathBuf>,
) -> PyResult<Bound<'py, PyAny>> {
    let mut cfg = ExperimentConfig::parse(config_text, None).map_err(err)?;
    if let Some(o) = out {
        cfg.out = o;
    }
    let bundle = py.detach(|| run_cfg(&cfg)).map_err(err)?;
    let files: Vec<String> = bundle
        .files
        .iter()
        .map(|p| p.display().to_string())
        .collect();
    let summary = serde_json::json!({
        "all_pass": bundle.all_pass,
        "criteria": bundle.results.criteria,
        "rows": bundle.results.rows,
        "files": files,
    });
    to_py(py, &summary)
}

#[pymodule]
fn gff_thinlab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGreens>()?;
    m.add_class::<PyFieldSample>()?;
    m.add_class::<PyState>()?;
    m.add_function(wrap_pyfunction!(bm_hit_prob, m)?)?;
    m.add_function(wrap_pyfunction!(branching_time, m)?)?;
    m.add_function(wrap_pyfunction!(run_bbm, m)?)?;
    m.add_function(wrap_pyfunction!(run_field_coupled, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_bound_check, m)?)?;
    m.add_function(wrap_pyfunction!(deterministic_thin_report, m)?)?;
    m.add_function(wrap_pyfunction!(box_count, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_classes() {
        Python::initialize();
        Python::attach(|py| {
            assert!(err(Error::Domain("x".into())).is_instance_of::<PyValueError>(py));
            assert!(err(Error::Budget("x".into())).is_instance_of::<PyRuntimeError>(py));
        });
    }
}
