//! Python extension module exposing the field models, samplers, estimators
//! and experiments. Build with `cargo build -p levelset-lab-py --release`
//! and rename the produced cdylib to `levelset_lab_py.so` on the path (see
//! python/smoke_test.py).

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use levelset_lab::error::Error;
use levelset_lab::experiments;
use levelset_lab::field_models;
use levelset_lab::level_sets;
use levelset_lab::sampler;
use levelset_lab::valleys;

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// A centered Gaussian field on a finite index set.
#[pyclass(name = "FieldModel")]
struct PyFieldModel {
    inner: field_models::FieldModel,
}

#[pymethods]
impl PyFieldModel {
    /// Independent centered Gaussians with a common variance.
    #[staticmethod]
    fn iid(size: usize, variance: f64) -> PyResult<Self> {
        Ok(PyFieldModel {
            inner: field_models::FieldModel::iid(size, variance).map_err(to_py)?,
        })
    }

    /// The ±1 inner-product field on 2^n points.
    #[staticmethod]
    fn sign_field(n: usize) -> PyResult<Self> {
        Ok(PyFieldModel {
            inner: field_models::FieldModel::sign_field(n).map_err(to_py)?,
        })
    }

    /// Lattice free field on the interior of a side×side box.
    #[staticmethod]
    fn dgff(side: usize) -> PyResult<Self> {
        Ok(PyFieldModel {
            inner: field_models::FieldModel::dgff(side).map_err(to_py)?,
        })
    }

    /// Load a model from the text covariance format.
    #[staticmethod]
    fn from_covariance_file(path: String) -> PyResult<Self> {
        Ok(PyFieldModel {
            inner: field_models::FieldModel::from_covariance_file(path).map_err(to_py)?,
        })
    }

    fn size(&self) -> usize {
        self.inner.size()
    }

    fn sigma_max_sq(&self) -> f64 {
        self.inner.sigma_max_sq()
    }

    fn effective_n(&self) -> f64 {
        self.inner.effective_n()
    }

    fn lambda_base(&self) -> f64 {
        self.inner.lambda()
    }

    fn is_degenerate(&self) -> bool {
        self.inner.is_degenerate()
    }

    fn covariance_entry(&self, u: usize, v: usize) -> PyResult<f64> {
        self.inner.covariance_entry(u, v).map_err(to_py)
    }

    fn variance_profile(&self) -> Vec<f64> {
        self.inner.variance_profile()
    }

    fn normalize_to_spec(&self) -> PyResult<Self> {
        Ok(PyFieldModel {
            inner: self.inner.normalize_to_spec().map_err(to_py)?,
        })
    }

    fn factorize(&self) -> PyResult<PySamplerKernel> {
        Ok(PySamplerKernel {
            inner: sampler::factorize(&self.inner).map_err(to_py)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "FieldModel(size={}, sigma_max_sq={:.6}, effective_n={:.6})",
            self.inner.size(),
            self.inner.sigma_max_sq(),
            self.inner.effective_n()
        )
    }
}

/// Immutable factorized sampler for one model.
#[pyclass(name = "SamplerKernel")]
struct PySamplerKernel {
    inner: sampler::SamplerKernel,
}

#[pymethods]
impl PySamplerKernel {
    fn jitter_used(&self) -> f64 {
        self.inner.jitter_used()
    }

    fn size(&self) -> usize {
        self.inner.size()
    }

    /// Draw one reproducible realization on stream (base_seed, stream_index).
    fn sample(&self, base_seed: u64, stream_index: u64) -> PyFieldSample {
        PyFieldSample {
            inner: self.inner.sample(sampler::RngStream::new(base_seed, stream_index)),
        }
    }
}

/// One field realization plus the stream that produced it.
#[pyclass(name = "FieldSample", skip_from_py_object)]
#[derive(Clone)]
struct PyFieldSample {
    inner: sampler::FieldSample,
}

#[pymethods]
impl PyFieldSample {
    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed()
    }

    #[getter]
    fn stream_index(&self) -> u64 {
        self.inner.stream().stream_index
    }

    fn max(&self) -> f64 {
        self.inner.max()
    }
}

/// Monte Carlo estimate of an expected supremum.
#[pyclass(name = "GEstimate")]
struct PyGEstimate {
    #[pyo3(get)]
    mean: f64,
    #[pyo3(get)]
    stderr: f64,
    #[pyo3(get)]
    replicates: usize,
    #[pyo3(get)]
    borell_halfwidth: f64,
    #[pyo3(get)]
    subset_size: usize,
}

impl From<levelset_lab::GEstimate> for PyGEstimate {
    fn from(g: levelset_lab::GEstimate) -> Self {
        PyGEstimate {
            mean: g.mean,
            stderr: g.stderr,
            replicates: g.replicates,
            borell_halfwidth: g.borell_halfwidth,
            subset_size: g.subset_size,
        }
    }
}

/// Indices of a sample at or above a level-set threshold.
#[pyclass(name = "LevelSet")]
struct PyLevelSet {
    inner: level_sets::LevelSet,
}

#[pymethods]
impl PyLevelSet {
    fn indices(&self) -> Vec<usize> {
        self.inner.indices().to_vec()
    }

    #[getter]
    fn threshold(&self) -> f64 {
        self.inner.threshold()
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Estimate g(S) = E[sup over S] from fresh samples on consecutive streams.
#[pyfunction]
fn estimate_g(
    kernel: &PySamplerKernel,
    subset: Vec<usize>,
    replicates: usize,
    base_seed: u64,
    stream_index: u64,
) -> PyResult<PyGEstimate> {
    levelset_lab::estimators::estimate_g(
        &kernel.inner,
        &subset,
        replicates,
        sampler::RngStream::new(base_seed, stream_index),
    )
    .map(PyGEstimate::from)
    .map_err(to_py)
}

/// Closed form E max for a centered Gaussian pair.
#[pyfunction]
fn analytic_g_pair(var_u: f64, var_v: f64, cov_uv: f64) -> PyResult<f64> {
    levelset_lab::estimators::analytic_g_pair(var_u, var_v, cov_uv).map_err(to_py)
}

/// Standard normal upper tail Q(x).
#[pyfunction]
fn gaussian_upper_tail(x: f64) -> f64 {
    levelset_lab::estimators::gaussian_upper_tail(x)
}

/// E(η − a)+ for a centered Gaussian with standard deviation sd.
#[pyfunction]
fn expected_excess(sd: f64, a: f64) -> PyResult<f64> {
    if !(sd > 0.0) || a < 0.0 {
        return Err(PyValueError::new_err("requires sd > 0 and a >= 0"));
    }
    Ok(levelset_lab::estimators::expected_excess(sd, a))
}

/// Two-sided concentration bound 2·exp(−z²/(2σ²)).
#[pyfunction]
fn borell_tail_bound(z: f64, sigma_sq: f64) -> PyResult<f64> {
    levelset_lab::estimators::borell_tail_bound(z, sigma_sq).map_err(to_py)
}

/// Union bound on g(S): returns (bound_value, a_n, excess_sum).
#[pyfunction]
fn union_bound_g(model: &PyFieldModel, subset_size: usize) -> (f64, f64, f64) {
    let b = levelset_lab::estimators::union_bound_g(&model.inner, subset_size);
    (b.bound_value, b.a_n, b.excess_sum)
}

/// Mixture gain h(t, α) = α·t + √(1−α²)·√(1−t²).
#[pyfunction]
fn mixture_coefficient(t: f64, alpha: f64) -> PyResult<f64> {
    valleys::mixture_coefficient(t, alpha).map_err(to_py)
}

/// Pointwise two-copy mixture γ·bar + √(1−γ²)·tilde.
#[pyfunction]
fn decompose_sample(gamma: f64, bar: &PyFieldSample, tilde: &PyFieldSample) -> PyResult<PyFieldSample> {
    Ok(PyFieldSample {
        inner: sampler::decompose_sample(gamma, &bar.inner, &tilde.inner).map_err(to_py)?,
    })
}

/// Threshold a sample at α·g_v.
#[pyfunction]
fn extract_level_set(sample: &PyFieldSample, alpha: f64, g_v: f64) -> PyResult<PyLevelSet> {
    Ok(PyLevelSet {
        inner: level_sets::extract_level_set(&sample.inner, alpha, g_v).map_err(to_py)?,
    })
}

/// Estimate g over a level set from fresh, stream-disjoint copies.
#[pyfunction]
fn conditional_g_estimate(
    kernel: &PySamplerKernel,
    levelset: &PyLevelSet,
    replicates: usize,
    base_seed: u64,
    stream_index: u64,
) -> PyResult<PyGEstimate> {
    level_sets::conditional_g_estimate(
        &kernel.inner,
        &levelset.inner,
        replicates,
        sampler::RngStream::new(base_seed, stream_index),
    )
    .map(PyGEstimate::from)
    .map_err(to_py)
}

/// Greedy maximal ε-net over a pool, swept in ascending index order.
/// Returns (centers, growth_exponent).
#[pyfunction]
fn build_epsilon_net(
    model: &PyFieldModel,
    pool: Vec<usize>,
    epsilon: f64,
) -> PyResult<(Vec<usize>, f64)> {
    let net = valleys::build_epsilon_net(&model.inner, &pool, epsilon, valleys::SweepOrder::IndexAscending)
        .map_err(to_py)?;
    Ok((net.centers, net.growth_exponent))
}

/// Exhaustive packing/covering check of a proposed net.
#[pyfunction]
fn verify_net(model: &PyFieldModel, pool: Vec<usize>, centers: Vec<usize>, epsilon: f64) -> bool {
    let net = valleys::NetResult {
        centers,
        epsilon,
        candidate_pool: pool,
        growth_exponent: 0.0,
    };
    valleys::verify_net(&model.inner, &net)
}

/// Multiple-valley certificate on one sample. Returns a dict with the pool
/// size, centers, growth exponent and the three condition verdicts.
#[pyfunction]
fn find_multiple_valleys(
    py: Python<'_>,
    model: &PyFieldModel,
    sample: &PyFieldSample,
    g_v: f64,
    delta: f64,
    epsilon: f64,
) -> PyResult<Py<pyo3::types::PyDict>> {
    let report =
        valleys::find_multiple_valleys(&model.inner, &sample.inner, g_v, delta, epsilon).map_err(to_py)?;
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("pool_size", report.pool_size)?;
    dict.set_item("centers", report.centers)?;
    dict.set_item("growth_exponent", report.growth_exponent)?;
    dict.set_item("value_floor", report.value_floor)?;
    dict.set_item("cond_a", report.cond_a)?;
    dict.set_item("cond_b", report.cond_b)?;
    dict.set_item("cond_c", report.cond_c)?;
    Ok(dict.into())
}

/// Run an experiment config file; returns the manifest as a JSON string.
#[pyfunction]
fn run_config(path: String) -> PyResult<String> {
    let text = std::fs::read_to_string(&path).map_err(|e| PyIOError::new_err(e.to_string()))?;
    let config = experiments::parse_config(&text).map_err(to_py)?;
    let manifest = experiments::run(&config).map_err(to_py)?;
    serde_json::to_string_pretty(&manifest).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn levelset_lab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFieldModel>()?;
    m.add_class::<PySamplerKernel>()?;
    m.add_class::<PyFieldSample>()?;
    m.add_class::<PyGEstimate>()?;
    m.add_class::<PyLevelSet>()?;
    m.add_function(wrap_pyfunction!(estimate_g, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_g_pair, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_upper_tail, m)?)?;
    m.add_function(wrap_pyfunction!(expected_excess, m)?)?;
    m.add_function(wrap_pyfunction!(borell_tail_bound, m)?)?;
    m.add_function(wrap_pyfunction!(union_bound_g, m)?)?;
    m.add_function(wrap_pyfunction!(mixture_coefficient, m)?)?;
    m.add_function(wrap_pyfunction!(decompose_sample, m)?)?;
    m.add_function(wrap_pyfunction!(extract_level_set, m)?)?;
    m.add_function(wrap_pyfunction!(conditional_g_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(build_epsilon_net, m)?)?;
    m.add_function(wrap_pyfunction!(verify_net, m)?)?;
    m.add_function(wrap_pyfunction!(find_multiple_valleys, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
