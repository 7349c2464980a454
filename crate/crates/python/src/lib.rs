//! Python bindings for the slab adjoint sensitivity library.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use slab_adjoint::bvp::{Grid, SolveLedger};
use slab_adjoint::model::analytic_response;
use slab_adjoint::sensitivities::{first_order_closed_form, second_order_closed_form, to_relative};
use slab_adjoint::uncertainty::{response_moments, UncertaintyCase};
use slab_adjoint::verification::{analyze_detector, DetectorResults};
use slab_adjoint::{Error, ModelParameters};

fn py_err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Slab data and detector position; immutable.
#[pyclass(frozen, skip_from_py_object, name = "Parameters", module = "slab_adjoint_py")]
#[derive(Clone, Copy)]
struct PyParameters(ModelParameters);

#[pymethods]
impl PyParameters {
    #[new]
    #[pyo3(signature = (sigma_a, diff_coeff, source_q, sigma_d, half_thickness, detector_b))]
    fn new(sigma_a: f64, diff_coeff: f64, source_q: f64, sigma_d: f64, half_thickness: f64, detector_b: f64) -> PyResult<Self> {
        ModelParameters::new(sigma_a, diff_coeff, source_q, sigma_d, half_thickness, detector_b).map(Self).map_err(py_err)
    }

    /// Nominal slab data with the detector at `detector_b` cm.
    #[staticmethod]
    fn nominal(detector_b: f64) -> PyResult<Self> {
        ModelParameters::nominal(detector_b).map(Self).map_err(py_err)
    }

    fn with_detector(&self, detector_b: f64) -> PyResult<Self> {
        self.0.with_detector(detector_b).map(Self).map_err(py_err)
    }

    #[getter]
    fn sigma_a(&self) -> f64 {
        self.0.sigma_a()
    }
    #[getter]
    fn diff_coeff(&self) -> f64 {
        self.0.diff_coeff()
    }
    #[getter]
    fn source_q(&self) -> f64 {
        self.0.source_q()
    }
    #[getter]
    fn sigma_d(&self) -> f64 {
        self.0.sigma_d()
    }
    #[getter]
    fn half_thickness(&self) -> f64 {
        self.0.half_thickness_a()
    }
    #[getter]
    fn detector_b(&self) -> f64 {
        self.0.detector_b()
    }
    #[getter]
    fn k(&self) -> f64 {
        self.0.k()
    }

    /// `[Σa, D, Q, Σd]`.
    fn values(&self) -> [f64; 4] {
        self.0.values()
    }

    fn __repr__(&self) -> String {
        let p = &self.0;
        format!(
            "Parameters(sigma_a={}, diff_coeff={}, source_q={}, sigma_d={}, half_thickness={}, detector_b={})",
            p.sigma_a(),
            p.diff_coeff(),
            p.source_q(),
            p.sigma_d(),
            p.half_thickness_a(),
            p.detector_b()
        )
    }
}

fn analyze(p: &ModelParameters, n_nodes: usize) -> PyResult<DetectorResults> {
    let grid = Grid::for_model(n_nodes, p).map_err(py_err)?;
    analyze_detector(p, &grid, &SolveLedger::new()).map_err(py_err)
}

/// Closed-form detector response.
#[pyfunction]
fn response(params: &PyParameters) -> f64 {
    analytic_response(&params.0)
}

/// First-order sensitivities `[dR/dΣa, dR/dD, dR/dQ, dR/dΣd]`.
///
/// `method` is "quadrature" (adjoint fields on `n_nodes` nodes) or "closed-form".
#[pyfunction]
#[pyo3(signature = (params, method = "quadrature", n_nodes = 4001, relative = false))]
fn first_order(params: &PyParameters, method: &str, n_nodes: usize, relative: bool) -> PyResult<[f64; 4]> {
    let p = &params.0;
    let (s, r) = match method {
        "quadrature" => {
            let res = analyze(p, n_nodes)?;
            (res.first_quadrature, res.response_numeric)
        }
        "closed-form" => (first_order_closed_form(p), analytic_response(p)),
        other => return Err(PyValueError::new_err(format!("unknown method '{other}'"))),
    };
    Ok(if relative { to_relative(&s, p, r).map_err(py_err)?.values } else { s.values })
}

/// Symmetric 4x4 matrix of second-order sensitivities.
#[pyfunction]
#[pyo3(signature = (params, method = "quadrature", n_nodes = 4001, relative = false))]
fn second_order(params: &PyParameters, method: &str, n_nodes: usize, relative: bool) -> PyResult<[[f64; 4]; 4]> {
    let p = &params.0;
    let (m, r) = match method {
        "quadrature" => {
            let res = analyze(p, n_nodes)?;
            (res.second_quadrature, res.response_numeric)
        }
        "closed-form" => (second_order_closed_form(p), analytic_response(p)),
        other => return Err(PyValueError::new_err(format!("unknown method '{other}'"))),
    };
    Ok(if relative { to_relative(&m, p, r).map_err(py_err)?.to_array() } else { m.to_array() })
}

/// One detector's full analysis as a dict.
#[pyfunction]
#[pyo3(signature = (params, n_nodes = 4001))]
fn analyze_response<'py>(py: Python<'py>, params: &PyParameters, n_nodes: usize) -> PyResult<Bound<'py, PyDict>> {
    let r = analyze(&params.0, n_nodes)?;
    let d = PyDict::new(py);
    d.set_item("response_numeric", r.response_numeric)?;
    d.set_item("response_closed_form", r.response_closed_form)?;
    d.set_item("first_quadrature", r.first_quadrature.values)?;
    d.set_item("first_closed_form", r.first_closed_form.values)?;
    d.set_item("second_quadrature", r.second_quadrature.to_array())?;
    d.set_item("second_closed_form", r.second_closed_form.to_array())?;
    d.set_item("max_symmetry_discrepancy", r.symmetry_quadrature.max_discrepancy())?;
    d.set_item("adjoint_solves", r.adjoint_solves)?;
    Ok(d)
}

/// `(name, [rel std of Σa, D, Q, Σd])` for the five standard cases.
#[pyfunction]
fn standard_cases() -> Vec<(String, [f64; 4])> {
    UncertaintyCase::standard_cases().into_iter().map(|c| (c.name, c.rel_std)).collect()
}

/// Expected value, variance, third central moment and skewness of the response
/// for independent normal parameters with relative standard deviations `rel_std`.
#[pyfunction]
#[pyo3(signature = (params, rel_std, n_nodes = 4001))]
fn moments<'py>(py: Python<'py>, params: &PyParameters, rel_std: [f64; 4], n_nodes: usize) -> PyResult<Bound<'py, PyDict>> {
    let case = UncertaintyCase::new("custom", rel_std).map_err(py_err)?;
    let r = analyze(&params.0, n_nodes)?;
    let m = response_moments(r.response_numeric, &r.first_quadrature, &r.second_quadrature, &case, &params.0);
    let d = PyDict::new(py);
    d.set_item("nominal", m.nominal)?;
    d.set_item("expected_value", m.expected_value)?;
    d.set_item("variance", m.variance)?;
    d.set_item("std_dev", m.std_dev())?;
    d.set_item("relative_std_dev", m.relative_std_dev())?;
    d.set_item("third_central_moment", m.third_central_moment)?;
    d.set_item("skewness", m.skewness)?;
    Ok(d)
}

#[pymodule]
fn slab_adjoint_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParameters>()?;
    m.add_function(wrap_pyfunction!(response, m)?)?;
    m.add_function(wrap_pyfunction!(first_order, m)?)?;
    m.add_function(wrap_pyfunction!(second_order, m)?)?;
    m.add_function(wrap_pyfunction!(analyze_response, m)?)?;
    m.add_function(wrap_pyfunction!(standard_cases, m)?)?;
    m.add_function(wrap_pyfunction!(moments, m)?)?;
    Ok(())
}
