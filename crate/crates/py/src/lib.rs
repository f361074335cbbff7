//! Python bindings for the quatsagnac toolkit.
//!
//! Reports are returned as plain dicts and lists.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyList};

use quatsagnac::analysis::{self, BoundOptions};
use quatsagnac::fitcore::{self, Detector};
use quatsagnac::hypercomplex::{self, PhaseVector};
use quatsagnac::interferometer::{self, Estimate, PhaseElement};
use quatsagnac::metaoptics::{self, SlabSpec};
use quatsagnac::photonsim::{self, Interferogram, NoiseModel, Sample, ScanConfig};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, v: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    use serde_json::Value;
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => PyBool::new(py, *b).to_owned().into_any(),
        Value::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => u.into_pyobject(py)?.into_any(),
            (None, Some(i)) => i.into_pyobject(py)?.into_any(),
            _ => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(items) => {
            let items = items.iter().map(|x| to_py(py, x)).collect::<PyResult<Vec<_>>>()?;
            PyList::new(py, items)?.into_any()
        }
        Value::Object(map) => {
            let d = PyDict::new(py);
            for (k, x) in map {
                d.set_item(k, to_py(py, x)?)?;
            }
            d.into_any()
        }
    })
}

fn report<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &serde_json::to_value(value).map_err(value_error)?)
}

#[pyclass(name = "Quaternion", frozen, eq, from_py_object)]
#[derive(Clone, Copy, PartialEq)]
struct PyQuaternion(hypercomplex::Quaternion);

#[pymethods]
impl PyQuaternion {
    #[new]
    #[pyo3(signature = (w=0.0, x=0.0, y=0.0, z=0.0))]
    fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self(hypercomplex::Quaternion::new(w, x, y, z))
    }

    #[getter]
    fn w(&self) -> f64 {
        self.0.w
    }
    #[getter]
    fn x(&self) -> f64 {
        self.0.x
    }
    #[getter]
    fn y(&self) -> f64 {
        self.0.y
    }
    #[getter]
    fn z(&self) -> f64 {
        self.0.z
    }

    fn components(&self) -> (f64, f64, f64, f64) {
        (self.0.w, self.0.x, self.0.y, self.0.z)
    }

    fn conj(&self) -> Self {
        Self(self.0.conj())
    }

    fn norm(&self) -> f64 {
        self.0.norm()
    }

    fn __mul__(&self, other: &Self) -> Self {
        Self(self.0 * other.0)
    }

    fn __add__(&self, other: &Self) -> Self {
        Self(self.0 + other.0)
    }

    fn __sub__(&self, other: &Self) -> Self {
        Self(self.0 - other.0)
    }

    fn __neg__(&self) -> Self {
        Self(-self.0)
    }

    fn __repr__(&self) -> String {
        let q = self.0;
        format!("Quaternion({}, {}, {}, {})", q.w, q.x, q.y, q.z)
    }
}

#[pyfunction]
fn qexp(phi1: f64, phi2: f64, phi3: f64) -> PyQuaternion {
    PyQuaternion(hypercomplex::qexp(PhaseVector::new(phi1, phi2, phi3)))
}

#[pyfunction]
fn commutator_norm(a: PyQuaternion, b: PyQuaternion) -> f64 {
    hypercomplex::commutator_norm(a.0, b.0)
}

#[pyfunction]
fn generalized_defect(a: PyQuaternion, b: PyQuaternion, r: PyQuaternion) -> PyResult<f64> {
    hypercomplex::generalized_defect(a.0, b.0, r.0).map_err(value_error)
}

#[pyfunction]
fn ordered_defect(factors: Vec<PyQuaternion>, r: PyQuaternion) -> f64 {
    let qs: Vec<_> = factors.iter().map(|q| q.0).collect();
    hypercomplex::ordered_defect(&qs, r.0)
}

/// Sagnac loop with phase elements given as `(label, (phi1, phi2, phi3),
/// amplitude_transmission)` in clockwise order.
#[pyclass(name = "SagnacModel", frozen, from_py_object)]
#[derive(Clone)]
struct PySagnacModel(interferometer::SagnacModel);

#[pymethods]
impl PySagnacModel {
    #[new]
    #[pyo3(signature = (visibility_v, elements, reflection=None))]
    fn new(
        visibility_v: f64,
        elements: Vec<(String, (f64, f64, f64), f64)>,
        reflection: Option<PyQuaternion>,
    ) -> PyResult<Self> {
        let elements = elements
            .into_iter()
            .map(|(label, (a, b, c), t)| PhaseElement::new(label, PhaseVector::new(a, b, c), t))
            .collect();
        let r = reflection.map_or(hypercomplex::Quaternion::I, |q| q.0);
        interferometer::SagnacModel::new(visibility_v, r, elements)
            .map(Self)
            .map_err(value_error)
    }

    #[getter]
    fn visibility_v(&self) -> f64 {
        self.0.visibility_v()
    }

    #[getter]
    fn reflection(&self) -> PyQuaternion {
        PyQuaternion(self.0.reflection())
    }

    fn labels(&self) -> Vec<String> {
        self.0.elements().iter().map(|e| e.label.clone()).collect()
    }

    fn switched_off(&self, label: &str) -> PyResult<Self> {
        self.0.switched_off(label).map(Self).map_err(value_error)
    }

    fn without(&self, label: &str) -> PyResult<Self> {
        self.0.without(label).map(Self).map_err(value_error)
    }

    fn with_phase(&self, label: &str, phase: (f64, f64, f64)) -> PyResult<Self> {
        let (a, b, c) = phase;
        self.0
            .with_phase(label, PhaseVector::new(a, b, c))
            .map(Self)
            .map_err(value_error)
    }

    fn defect(&self) -> f64 {
        self.0.defect()
    }

    fn intensity_transmission(&self) -> f64 {
        self.0.intensity_transmission()
    }

    fn analytic_visibility(&self) -> f64 {
        self.0.analytic_visibility()
    }

    /// `(p_bright, p_dark)` from the closed form.
    fn dark_port_prob(&self) -> (f64, f64) {
        let p = interferometer::dark_port_prob(&self.0);
        (p.p_bright, p.p_dark)
    }

    /// `(p_bright, p_dark)` from explicit state propagation.
    fn propagate_state(&self) -> (f64, f64) {
        let p = interferometer::propagate_state(&self.0);
        (p.p_bright, p.p_dark)
    }

    fn __repr__(&self) -> String {
        format!("SagnacModel(v={}, elements={:?})", self.0.visibility_v(), self.labels())
    }
}

/// `(ratio, sigma)` of Γ_BOTH/Γ_NIM from two visibilities with sigmas.
#[pyfunction]
fn gamma_ratio(v_both: f64, sigma_both: f64, v_nim: f64, sigma_nim: f64) -> PyResult<(f64, f64)> {
    let e = interferometer::gamma_ratio(Estimate::new(v_both, sigma_both), Estimate::new(v_nim, sigma_nim))
        .map_err(value_error)?;
    Ok((e.value, e.sigma))
}

/// `(central_deg, conservative_deg)`.
#[pyfunction]
fn theta_bound(ratio: f64, sigma: f64) -> (f64, f64) {
    let t = interferometer::theta_bound(Estimate::new(ratio, sigma));
    (t.central_deg, t.conservative_deg)
}

#[pyfunction]
fn mz_visibility_theta(v: f64, theta: f64) -> f64 {
    interferometer::mz_visibility_theta(v, theta)
}

fn scan_config(n_steps: usize, mean_counts: f64, seed: u64, poisson: bool) -> ScanConfig {
    ScanConfig {
        n_steps,
        mean_counts_per_step: mean_counts,
        rng_seed: seed,
        noise: if poisson {
            NoiseModel::Poisson
        } else {
            NoiseModel::Expected
        },
        ..ScanConfig::default()
    }
}

/// Interferogram as a list of `(phase_rad, counts_d1, counts_d2)`.
#[pyfunction]
#[pyo3(signature = (model, n_steps=photonsim::DEFAULT_STEPS, mean_counts=photonsim::DEFAULT_MEAN_COUNTS, seed=0, poisson=true))]
fn simulate(
    model: &PySagnacModel,
    n_steps: usize,
    mean_counts: f64,
    seed: u64,
    poisson: bool,
) -> PyResult<Vec<(f64, u64, u64)>> {
    let ig = photonsim::simulate_interferogram(&model.0, &scan_config(n_steps, mean_counts, seed, poisson))
        .map_err(value_error)?;
    Ok(ig
        .samples
        .iter()
        .map(|s| (s.phase_rad, s.counts_d1, s.counts_d2))
        .collect())
}

/// Fit `(phase_rad, counts_d1, counts_d2)` samples; returns the fit report.
#[pyfunction]
#[pyo3(signature = (samples, detector="d1"))]
fn fit<'py>(py: Python<'py>, samples: Vec<(f64, u64, u64)>, detector: &str) -> PyResult<Bound<'py, PyAny>> {
    let detector = match detector {
        "d1" => Detector::D1,
        "d2" => Detector::D2,
        other => return Err(value_error(format!("detector must be \"d1\" or \"d2\", got {other:?}"))),
    };
    let samples = samples
        .into_iter()
        .map(|(phase_rad, counts_d1, counts_d2)| Sample {
            phase_rad,
            counts_d1,
            counts_d2,
        })
        .collect();
    let ig = Interferogram::new(samples, 0, "python");
    let result = fitcore::fit_interferogram(&ig, detector).map_err(value_error)?;
    report(py, &result)
}

/// Run an LC-toggle campaign and return the bound report.
#[pyfunction]
#[pyo3(signature = (model_off, model_on, n_runs, master_seed=0, n_steps=photonsim::DEFAULT_STEPS, mean_counts=photonsim::DEFAULT_MEAN_COUNTS))]
fn campaign<'py>(
    py: Python<'py>,
    model_off: &PySagnacModel,
    model_on: &PySagnacModel,
    n_runs: usize,
    master_seed: u64,
    n_steps: usize,
    mean_counts: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let scan = scan_config(n_steps, mean_counts, 0, true);
    let (off, on) = (model_off.0.clone(), model_on.0.clone());
    let bound = py
        .detach(move || {
            let records = analysis::run_campaign(&off, &on, &scan, n_runs, master_seed)?;
            analysis::bound_from_campaign(&records, &BoundOptions::default())
        })
        .map_err(value_error)?;
    report(py, &bound)
}

#[pyfunction]
#[pyo3(signature = (delta_phi, lambda_nm, thickness_nm=metaoptics::DEFAULT_THICKNESS_NM))]
fn phase_to_index(delta_phi: f64, lambda_nm: f64, thickness_nm: f64) -> PyResult<f64> {
    let slab = SlabSpec::new(thickness_nm).map_err(value_error)?;
    metaoptics::phase_to_index(delta_phi, lambda_nm, &slab).map_err(value_error)
}

/// Unwrap a `(wavelength_nm, phase_rad)` spectrum and return
/// `(wavelength_nm, index, ambiguous)` rows.
#[pyfunction]
#[pyo3(signature = (spectrum, thickness_nm=metaoptics::DEFAULT_THICKNESS_NM))]
fn index_spectrum(spectrum: Vec<(f64, f64)>, thickness_nm: f64) -> PyResult<Vec<(f64, f64, bool)>> {
    let slab = SlabSpec::new(thickness_nm).map_err(value_error)?;
    let spectrum = metaoptics::PhaseSpectrum::new(spectrum).map_err(value_error)?;
    let points = metaoptics::index_spectrum(&spectrum, &slab).map_err(value_error)?;
    Ok(points.iter().map(|p| (p.wavelength_nm, p.index, p.ambiguous)).collect())
}

#[pymodule]
fn quatsagnac_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyQuaternion>()?;
    m.add_class::<PySagnacModel>()?;
    m.add_function(wrap_pyfunction!(qexp, m)?)?;
    m.add_function(wrap_pyfunction!(commutator_norm, m)?)?;
    m.add_function(wrap_pyfunction!(generalized_defect, m)?)?;
    m.add_function(wrap_pyfunction!(ordered_defect, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(theta_bound, m)?)?;
    m.add_function(wrap_pyfunction!(mz_visibility_theta, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(campaign, m)?)?;
    m.add_function(wrap_pyfunction!(phase_to_index, m)?)?;
    m.add_function(wrap_pyfunction!(index_spectrum, m)?)?;
    Ok(())
}
