//! Python module `dirac_collapse`.

use dirac_collapse::assembly::{assemble_dirac, limit_operator};
use dirac_collapse::cli::{run, ExperimentConfig};
use dirac_collapse::clifford::{exterior_module, spinor_gammas, CliffordModule};
use dirac_collapse::collapse::{blowup_check, collapse_run};
use dirac_collapse::geometry::{AffineMappingTorus, BundleModel, FlatTorusModel, LiftSpec, WindowConstants};
use dirac_collapse::spectrum::{eigensolve, epsilon_close as close, subset_epsilon_close as subset_close};
use dirac_collapse::Error;
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use std::path::PathBuf;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn matrix_rows(m: &dirac_collapse::linalg::CMat) -> Vec<Vec<Complex64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[pyclass(name = "CliffordModule", frozen)]
struct PyCliffordModule {
    inner: CliffordModule,
}

#[pymethods]
impl PyCliffordModule {
    #[staticmethod]
    fn spinor(n: usize) -> PyResult<Self> {
        Ok(Self {
            inner: spinor_gammas(n).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn exterior(n: usize) -> PyResult<Self> {
        Ok(Self {
            inner: exterior_module(n).map_err(py_err)?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn dim_v(&self) -> usize {
        self.inner.dim_v
    }

    fn gammas(&self) -> Vec<Vec<Vec<Complex64>>> {
        self.inner.gammas.iter().map(matrix_rows).collect()
    }

    /// Largest residual among the module relations.
    fn max_residual(&self) -> f64 {
        self.inner.residuals().max()
    }

    fn casimir(&self) -> PyResult<f64> {
        self.inner.casimir().map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("CliffordModule(n={}, dim_v={}, group={:?})", self.inner.n, self.inner.dim_v, self.inner.group)
    }
}

#[pyclass(name = "FlatTorus", frozen)]
struct PyFlatTorus {
    inner: FlatTorusModel,
}

#[pymethods]
impl PyFlatTorus {
    #[new]
    #[pyo3(signature = (basis, spin_shift=None))]
    fn new(basis: Vec<Vec<f64>>, spin_shift: Option<Vec<f64>>) -> PyResult<Self> {
        let shift = spin_shift.unwrap_or_else(|| vec![0.0; basis.len()]);
        Ok(Self {
            inner: FlatTorusModel::new(basis, shift).map_err(py_err)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn diameter(&self) -> f64 {
        self.inner.diameter()
    }

    /// Sorted eigenvalues of the Dirac operator truncated at `n`.
    fn dirac_spectrum(&self, module: &PyCliffordModule, n: usize) -> PyResult<Vec<f64>> {
        let op = assemble_dirac(&BundleModel::FlatTorus(self.inner.clone()), &module.inner, n).map_err(py_err)?;
        Ok(eigensolve(&op).map_err(py_err)?.values)
    }
}

#[pyclass(name = "MappingTorus", frozen)]
struct PyMappingTorus {
    inner: AffineMappingTorus,
}

#[pymethods]
impl PyMappingTorus {
    /// `rotation` is `(a, b, angle)` for the lift `exp(angle σ^{ab})`.
    #[new]
    #[pyo3(signature = (fiber, base_length, fiber_scale=1.0, base_spin_shift=0.0, holonomy=None, rotation=None))]
    fn new(
        fiber: &PyFlatTorus,
        base_length: f64,
        fiber_scale: f64,
        base_spin_shift: f64,
        holonomy: Option<Vec<Vec<i64>>>,
        rotation: Option<(usize, usize, f64)>,
    ) -> PyResult<Self> {
        let mut m = AffineMappingTorus::product(fiber.inner.clone(), base_length, fiber_scale).map_err(py_err)?;
        m.base_spin_shift = base_spin_shift;
        if let Some(h) = holonomy {
            m.holonomy = h;
        }
        if let Some((a, b, angle)) = rotation {
            m.lift = LiftSpec::Rotation { a, b, angle };
        }
        m.validate().map_err(py_err)?;
        Ok(Self { inner: m })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn with_scale(&self, eps: f64) -> Self {
        Self {
            inner: self.inner.with_scale(eps),
        }
    }

    fn dirac_spectrum(&self, module: &PyCliffordModule, n: usize) -> PyResult<Vec<f64>> {
        let op = assemble_dirac(&BundleModel::MappingTorus(self.inner.clone()), &module.inner, n).map_err(py_err)?;
        Ok(eigensolve(&op).map_err(py_err)?.values)
    }

    fn limit_spectrum(&self, module: &PyCliffordModule, n: usize) -> PyResult<Vec<f64>> {
        let op = limit_operator(&self.inner, &module.inner, n).map_err(py_err)?;
        Ok(eigensolve(&op).map_err(py_err)?.values)
    }

    /// Collapse report as a JSON string.
    #[pyo3(signature = (module, epsilons, k_max, n, window_a=std::f64::consts::PI * std::f64::consts::PI, window_c=10.0))]
    fn collapse(
        &self,
        module: &PyCliffordModule,
        epsilons: Vec<f64>,
        k_max: usize,
        n: usize,
        window_a: f64,
        window_c: f64,
    ) -> PyResult<String> {
        let constants = WindowConstants { a: window_a, c: window_c };
        let report = collapse_run(&self.inner, &module.inner, &epsilons, k_max, n, &constants).map_err(py_err)?;
        Ok(serde_json::to_string(&report).expect("serializable report"))
    }

    /// `(min|λ|(ε) per ε, fitted rate)`.
    fn blowup(&self, module: &PyCliffordModule, epsilons: Vec<f64>, n: usize) -> PyResult<(Vec<f64>, f64)> {
        let r = blowup_check(&self.inner, &module.inner, &epsilons, n).map_err(py_err)?;
        Ok((r.min_abs, r.rate))
    }
}

#[pyfunction]
fn epsilon_close(a: Vec<f64>, b: Vec<f64>, eps: f64) -> Option<Vec<(usize, usize)>> {
    close(&a, &b, eps)
}

#[pyfunction]
fn subset_epsilon_close(a: Vec<f64>, b: Vec<f64>, eps: f64) -> bool {
    subset_close(&a, &b, eps)
}

#[pyfunction]
fn sinh_rescale(values: Vec<f64>, k: f64) -> PyResult<Vec<f64>> {
    if !(k > 0.0) {
        return Err(PyValueError::new_err("K must be positive"));
    }
    Ok(values.iter().map(|v| (v / k.sqrt()).asinh()).collect())
}

/// Runs a TOML experiment config; returns `[(assertion, passed)]`.
#[pyfunction]
#[pyo3(signature = (config, out, seed=None))]
fn run_config(config: PathBuf, out: PathBuf, seed: Option<u64>) -> PyResult<Vec<(String, bool)>> {
    let cfg = ExperimentConfig::load(&config).map_err(py_err)?;
    let summary = run(&cfg, &out, seed).map_err(py_err)?;
    Ok(summary.assertions.into_iter().map(|a| (a.name, a.passed)).collect())
}

#[pymodule]
#[pyo3(name = "dirac_collapse")]
fn dirac_collapse_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCliffordModule>()?;
    m.add_class::<PyFlatTorus>()?;
    m.add_class::<PyMappingTorus>()?;
    m.add_function(wrap_pyfunction!(epsilon_close, m)?)?;
    m.add_function(wrap_pyfunction!(subset_epsilon_close, m)?)?;
    m.add_function(wrap_pyfunction!(sinh_rescale, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
