//! Python bindings: transfer functions, the synthetic plant family,
//! uncertain plant models, μ bounds, bandpass synthesis and closed-loop
//! evaluation.

use std::str::FromStr;

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyList;
use serde::Serialize;

use mixmu::config::RunConfig;
use mixmu::evaluation::phase_margins as margins_of;
use mixmu::lti::{FrequencyGrid, RationalTF};
use mixmu::mu::{mu_lower_sampling, mu_upper_complex, mu_upper_mixed, Block, BlockStructure, CMatrix};
use mixmu::pipeline;
use mixmu::synthesis::{bandpass_tf, BandpassParams};
use mixmu::uncertainty::{UncertainPlant as CorePlant, Variant};

fn err(e: mixmu::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Hands a serializable value to Python as plain dicts and lists.
fn to_python<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn grid_from_hz(hz: Vec<f64>) -> PyResult<FrequencyGrid> {
    FrequencyGrid::from_hz(hz).map_err(err)
}

fn variant(label: &str) -> PyResult<Variant> {
    Variant::from_str(label).map_err(err)
}

#[pyclass(name = "TransferFunction", module = "pymixmu", frozen)]
struct PyTf {
    inner: RationalTF,
}

#[pymethods]
impl PyTf {
    /// Coefficients in ascending powers of `s`; `delay` in seconds.
    #[new]
    #[pyo3(signature = (num, den, delay = 0.0))]
    fn new(num: Vec<f64>, den: Vec<f64>, delay: f64) -> PyResult<Self> {
        Ok(Self {
            inner: RationalTF::with_delay(num, den, delay).map_err(err)?,
        })
    }

    #[getter]
    fn num(&self) -> Vec<f64> {
        self.inner.num().to_vec()
    }

    #[getter]
    fn den(&self) -> Vec<f64> {
        self.inner.den().to_vec()
    }

    #[getter]
    fn delay(&self) -> f64 {
        self.inner.delay()
    }

    /// Response at `s = jω`, ω in rad/s.
    fn __call__(&self, omega: f64) -> PyResult<Complex64> {
        self.inner.eval(omega).map_err(err)
    }

    fn freq_response_hz(&self, hz: Vec<f64>) -> PyResult<Vec<Complex64>> {
        self.inner.freq_response(&grid_from_hz(hz)?).map_err(err)
    }

    fn series(&self, other: &PyTf) -> Self {
        Self {
            inner: self.inner.series(&other.inner),
        }
    }

    /// Closed loop `self/(1 + self·controller)`.
    fn feedback(&self, controller: &PyTf) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.feedback(&controller.inner).map_err(err)?,
        })
    }

    /// Delay replaced by a Padé approximant of the given order.
    #[pyo3(signature = (order = 2))]
    fn rationalized(&self, order: usize) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.rationalized(order).map_err(err)?,
        })
    }

    fn is_stable(&self) -> PyResult<bool> {
        self.inner.is_stable().map_err(err)
    }

    fn poles(&self) -> PyResult<Vec<Complex64>> {
        Ok(self.inner.stability().map_err(err)?.poles)
    }

    fn __repr__(&self) -> String {
        format!(
            "TransferFunction(num={:?}, den={:?}, delay={})",
            self.inner.num(),
            self.inner.den(),
            self.inner.delay()
        )
    }
}

#[pyclass(name = "UncertainPlant", module = "pymixmu", frozen)]
struct PyPlant {
    inner: CorePlant,
    grid: FrequencyGrid,
}

#[pymethods]
impl PyPlant {
    #[getter]
    fn n_real(&self) -> usize {
        self.inner.n_real()
    }

    #[getter]
    fn channels(&self) -> Vec<String> {
        self.inner.channels.iter().map(|c| c.to_string()).collect()
    }

    fn nominal(&self) -> PyTf {
        PyTf {
            inner: self.inner.nominal_tf(),
        }
    }

    /// Plant with real perturbations `real` (each in [-1, 1]) and a real
    /// unstructured perturbation.
    #[pyo3(signature = (real, unstructured = 0.0))]
    fn perturbed(&self, real: Vec<f64>, unstructured: f64) -> PyResult<PyTf> {
        Ok(PyTf {
            inner: self.inner.perturbed_tf(&real, unstructured).map_err(err)?,
        })
    }

    /// Unstructured weight magnitude on the study grid.
    fn unstructured_weight(&self) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let mags = self.inner.unstructured.magnitudes(&self.grid).map_err(err)?;
        Ok((self.grid.hz().to_vec(), mags))
    }

    /// `{"freq_hz", "min_db", "max_db"}` over sampled perturbations.
    #[pyo3(signature = (n_random = 200, include_vertices = true, seed = 1))]
    fn envelope<'py>(
        &self,
        py: Python<'py>,
        n_random: usize,
        include_vertices: bool,
        seed: u64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let env = self
            .inner
            .envelope(&self.grid, n_random, include_vertices, seed)
            .map_err(err)?;
        let out = to_python(py, &env)?;
        out.set_item("mean_width_db", env.mean_width_db())?;
        Ok(out)
    }
}

#[pyclass(name = "Study", module = "pymixmu")]
struct PyStudy {
    inner: pipeline::Study,
}

#[pymethods]
impl PyStudy {
    /// Synthetic payload family; `config` is an optional JSON document in
    /// the command-line config format.
    #[new]
    #[pyo3(signature = (config = None, seed = None))]
    fn new(config: Option<&str>, seed: Option<u64>) -> PyResult<Self> {
        let mut cfg = match config {
            Some(text) => serde_json::from_str::<RunConfig>(text)
                .map_err(|e| PyValueError::new_err(format!("config: {e}")))?,
            None => RunConfig::default(),
        };
        if let Some(s) = seed {
            cfg.seed = s;
        }
        Ok(Self {
            inner: pipeline::Study::synthetic(&cfg).map_err(err)?,
        })
    }

    #[getter]
    fn payloads(&self) -> Vec<f64> {
        self.inner.samples.iter().map(|s| s.payload).collect()
    }

    #[getter]
    fn grid_hz(&self) -> Vec<f64> {
        self.inner.grid.hz().to_vec()
    }

    #[getter]
    fn config_hash(&self) -> String {
        self.inner.config.hash()
    }

    fn modal_hz(&self) -> Vec<f64> {
        self.inner.modal_hz()
    }

    /// Transfer function of the family member at index `k`.
    fn sample(&self, k: usize) -> PyResult<PyTf> {
        let s = self
            .inner
            .samples
            .get(k)
            .ok_or_else(|| PyValueError::new_err(format!("no sample {k}")))?;
        Ok(PyTf {
            inner: s.tf().map_err(err)?,
        })
    }

    fn measured(&self, k: usize) -> PyResult<Vec<Complex64>> {
        self.inner
            .measured
            .get(k)
            .cloned()
            .ok_or_else(|| PyValueError::new_err(format!("no sample {k}")))
    }

    /// Uncertain plant for `"m01"`, `"m11"` or `"m31"`.
    fn plant(&self, variant_label: &str) -> PyResult<PyPlant> {
        Ok(PyPlant {
            inner: self.inner.plant(&variant(variant_label)?).map_err(err)?,
            grid: self.inner.grid.clone(),
        })
    }

    fn weight(&self) -> PyResult<PyTf> {
        Ok(PyTf {
            inner: self.inner.weight().map_err(err)?,
        })
    }

    /// Runs the bandpass search; returns `(controller, summary)`.
    fn synthesize<'py>(&self, py: Python<'py>, plant: &PyPlant) -> PyResult<(PyTf, Bound<'py, PyAny>)> {
        let res = py
            .detach(|| self.inner.synthesize(&plant.inner))
            .map_err(err)?;
        let c = bandpass_tf(&res.params).map_err(err)?;
        Ok((PyTf { inner: c }, to_python(py, &res)?))
    }

    /// Robust-performance μ profile of a fixed controller.
    fn mu_profile<'py>(&self, py: Python<'py>, plant: &PyPlant, controller: &PyTf) -> PyResult<Bound<'py, PyAny>> {
        let p = py
            .detach(|| self.inner.mu_profile(&plant.inner, &controller.inner))
            .map_err(err)?;
        to_python(py, &p)
    }

    /// Per-payload closed-loop metrics as a list of dicts.
    fn evaluate<'py>(&self, py: Python<'py>, controller: &PyTf) -> PyResult<Bound<'py, PyAny>> {
        let m = self.inner.evaluate(&controller.inner).map_err(err)?;
        to_python(py, &m)
    }
}

/// `M·(s/(s² + 2ζω_c s + ω_c²))ⁿ·(s − ω_d)/(s + ω_d)`.
#[pyfunction]
#[pyo3(signature = (gain, zeta_c, omega_c, omega_d, order = 2))]
fn bandpass(gain: f64, zeta_c: f64, omega_c: f64, omega_d: f64, order: u32) -> PyResult<PyTf> {
    let p = BandpassParams {
        gain,
        zeta_c,
        omega_c,
        order,
        omega_d,
    };
    Ok(PyTf {
        inner: bandpass_tf(&p).map_err(err)?,
    })
}

fn structure(blocks: &[(String, usize)]) -> PyResult<BlockStructure> {
    let parsed = blocks
        .iter()
        .enumerate()
        .map(|(i, (kind, n))| match (kind.as_str(), *n) {
            ("real", 1) => Ok(Block::real(format!("r{i}"))),
            ("complex", 1) => Ok(Block::complex(format!("c{i}"))),
            ("full", n) if n >= 1 => Ok(Block::full(n, format!("f{i}"))),
            _ => Err(PyValueError::new_err(format!("bad block ({kind:?}, {n})"))),
        })
        .collect::<PyResult<Vec<_>>>()?;
    BlockStructure::new(parsed).map_err(err)
}

fn matrix(rows: &Bound<'_, PyList>) -> PyResult<CMatrix> {
    let rows: Vec<Vec<Complex64>> = rows.extract()?;
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// `(upper, lower, complex_upper)` μ bounds; `blocks` is a list of
/// `("real" | "complex" | "full", size)` pairs.
#[pyfunction]
#[pyo3(signature = (m, blocks, samples = 200, seed = 0))]
fn mu_bounds(m: &Bound<'_, PyList>, blocks: Vec<(String, usize)>, samples: usize, seed: u64) -> PyResult<(f64, f64, f64)> {
    let m = matrix(m)?;
    let s = structure(&blocks)?;
    let ub = mu_upper_mixed(&m, &s).map_err(err)?.value;
    let lb = mu_lower_sampling(&m, &s, samples, seed).map_err(err)?;
    let ubc = mu_upper_complex(&m, &s).map_err(err)?;
    Ok((ub, lb, ubc))
}

/// Gain crossovers of a loop transfer function on a Hz grid.
#[pyfunction]
fn phase_margins<'py>(py: Python<'py>, loop_tf: &PyTf, hz: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
    let report = margins_of(&loop_tf.inner, &grid_from_hz(hz)?).map_err(err)?;
    to_python(py, &report)
}

#[pymodule]
fn pymixmu(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTf>()?;
    m.add_class::<PyPlant>()?;
    m.add_class::<PyStudy>()?;
    m.add_function(wrap_pyfunction!(bandpass, m)?)?;
    m.add_function(wrap_pyfunction!(mu_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(phase_margins, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
