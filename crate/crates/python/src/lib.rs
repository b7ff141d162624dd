//! Python bindings: distributions, datasets, classifier training, the ratio
//! estimator, the samplers and the two-sample diagnostics.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use ratio_mc::classifier::{ConstantPosterior, MlpClassifier, OraclePosterior, PosteriorFn};
use ratio_mc::samplers::{self, ImhInit, Integrand, ResamplingScheme};
use ratio_mc::{create_rng, diagnostics, Distribution, EnvelopeConstant, GaussianMixture, LabeledDataset, Points};

fn py_err(e: ratio_mc::Error) -> PyErr {
    match e {
        ratio_mc::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn to_points(rows: Vec<Vec<f64>>) -> PyResult<Points> {
    let dim = rows.first().map(Vec::len).ok_or_else(|| PyValueError::new_err("no points"))?;
    Points::from_rows(dim, &rows).map_err(py_err)
}

fn rows(points: &Points) -> Vec<Vec<f64>> {
    points.rows().map(<[f64]>::to_vec).collect()
}

fn json_to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "Distribution", module = "ratio_mc_py", frozen)]
struct PyDistribution {
    inner: Distribution,
}

#[pymethods]
impl PyDistribution {
    #[staticmethod]
    fn gaussian(mean: Vec<f64>, covariance: Vec<Vec<f64>>) -> PyResult<Self> {
        let d = mean.len();
        if covariance.len() != d || covariance.iter().any(|r| r.len() != d) {
            return Err(PyValueError::new_err("covariance must be d x d"));
        }
        let g = ratio_mc::Gaussian::new(mean, covariance.concat()).map_err(py_err)?;
        Ok(Self { inner: g.into() })
    }

    #[staticmethod]
    fn normal_1d(mean: f64, variance: f64) -> PyResult<Self> {
        Ok(Self {
            inner: Distribution::normal_1d(mean, variance).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn ring_of_modes(k: usize, radius: f64, std: f64) -> PyResult<Self> {
        let m = GaussianMixture::ring_of_modes(k, radius, std).map_err(py_err)?;
        Ok(Self { inner: m.into() })
    }

    #[staticmethod]
    fn two_moons(noise_scale: f64) -> Self {
        Self {
            inner: Distribution::two_moons(noise_scale),
        }
    }

    #[staticmethod]
    fn rings(radii: Vec<f64>, noise_scale: f64) -> Self {
        Self {
            inner: Distribution::rings(radii, noise_scale),
        }
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: Distribution = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        inner.validate().map_err(py_err)?;
        Ok(Self { inner })
    }

    /// Gaussian with the sample mean and covariance of `points`.
    #[staticmethod]
    fn moment_fit(points: Vec<Vec<f64>>) -> PyResult<Self> {
        let g = ratio_mc::fit_gaussian_moments(&to_points(points)?).map_err(py_err)?;
        Ok(Self { inner: g.into() })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("distribution serializes")
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.inner.name()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn log_pdf(&self, x: Vec<f64>) -> PyResult<f64> {
        if x.len() != self.inner.dim() {
            return Err(PyValueError::new_err("point dimension mismatch"));
        }
        self.inner.log_pdf(&x).map_err(py_err)
    }

    #[pyo3(signature = (n, seed, stream=0))]
    fn sample(&self, n: usize, seed: u64, stream: u64) -> Vec<Vec<f64>> {
        rows(&self.inner.sample(n, &mut create_rng(seed, stream)))
    }

    fn __repr__(&self) -> String {
        format!("Distribution({})", self.to_json())
    }
}

#[pyclass(name = "Dataset", module = "ratio_mc_py", frozen)]
struct PyDataset {
    inner: LabeledDataset,
}

#[pymethods]
impl PyDataset {
    /// `n1` draws of `p1` (label 1) and `n0` of `p0` (label 0), shuffled.
    #[staticmethod]
    #[pyo3(signature = (p1, p0, n1, n0, seed, stream=0))]
    fn build(p1: &PyDistribution, p0: &PyDistribution, n1: usize, n0: usize, seed: u64, stream: u64) -> PyResult<Self> {
        let inner = ratio_mc::build_dataset(&p1.inner, &p0.inner, n1, n0, &mut create_rng(seed, stream)).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[new]
    fn new(points: Vec<Vec<f64>>, labels: Vec<u8>) -> PyResult<Self> {
        let inner = LabeledDataset::new(to_points(points)?, labels).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load_csv(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: LabeledDataset::load_csv(path).map_err(py_err)?,
        })
    }

    fn save_csv(&self, path: &str) -> PyResult<()> {
        self.inner.save_csv(path).map_err(py_err)
    }

    #[getter]
    fn points(&self) -> Vec<Vec<f64>> {
        rows(self.inner.points())
    }

    #[getter]
    fn labels(&self) -> Vec<u8> {
        self.inner.labels().to_vec()
    }

    #[getter]
    fn n0(&self) -> usize {
        self.inner.n0()
    }

    #[getter]
    fn n1(&self) -> usize {
        self.inner.n1()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyclass(name = "Classifier", module = "ratio_mc_py", frozen)]
struct PyClassifier {
    inner: MlpClassifier,
}

#[pymethods]
impl PyClassifier {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: MlpClassifier::from_json(text).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: MlpClassifier::load_json(path).map_err(py_err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save_json(path).map_err(py_err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(py_err)
    }

    fn posterior(&self, x: Vec<f64>) -> PyResult<f64> {
        self.check(&x)?;
        Ok(ratio_mc::Posterior::posterior(&self.inner, &x))
    }

    fn logit(&self, x: Vec<f64>) -> PyResult<f64> {
        self.check(&x)?;
        Ok(ratio_mc::Posterior::logit(&self.inner, &x))
    }

    #[getter]
    fn layer_sizes(&self) -> Vec<usize> {
        self.inner.layer_sizes().to_vec()
    }

    fn bce_loss(&self, dataset: &PyDataset) -> f64 {
        ratio_mc::bce_loss(&self.inner, &dataset.inner)
    }
}

impl PyClassifier {
    fn check(&self, x: &[f64]) -> PyResult<()> {
        if x.len() != self.inner.input_dim() {
            return Err(PyValueError::new_err("point dimension mismatch"));
        }
        Ok(())
    }
}

/// Trains the classifier. `config` is a JSON object with any of the
/// training fields (epochs, batch_size, learning_rate, optimizer, seed,
/// early_stop_patience, hidden_layers, activation, validation_fraction).
/// Returns the model and the per-epoch loss trace as a dict.
#[pyfunction]
#[pyo3(signature = (dataset, config=None))]
fn train<'py>(py: Python<'py>, dataset: &PyDataset, config: Option<&str>) -> PyResult<(PyClassifier, Bound<'py, PyAny>)> {
    let cfg: ratio_mc::TrainConfig = match config {
        Some(text) => serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?,
        None => ratio_mc::TrainConfig::default(),
    };
    let (model, trace) = py.detach(|| ratio_mc::train(&dataset.inner, &cfg)).map_err(py_err)?;
    Ok((PyClassifier { inner: model }, json_to_py(py, &trace)?))
}

#[pyclass(name = "RatioEstimator", module = "ratio_mc_py", frozen)]
struct PyRatioEstimator {
    inner: ratio_mc::RatioEstimator<PosteriorFn>,
}

#[pymethods]
impl PyRatioEstimator {
    /// `(n0 / n1) * r / (1 - r)` with `r` from the trained classifier.
    #[staticmethod]
    fn from_classifier(model: &PyClassifier, n0: usize, n1: usize) -> PyResult<Self> {
        Self::wrap(model.inner.clone().into(), n0, n1)
    }

    /// Exact posterior from closed-form densities.
    #[staticmethod]
    fn oracle(p1: &PyDistribution, p0: &PyDistribution, n1: usize, n0: usize) -> PyResult<Self> {
        let post = OraclePosterior::new(p1.inner.clone(), p0.inner.clone(), n1, n0).map_err(py_err)?;
        Self::wrap(post.into(), n0, n1)
    }

    #[staticmethod]
    fn constant(r: f64, n0: usize, n1: usize) -> PyResult<Self> {
        Self::wrap(ConstantPosterior::new(r).map_err(py_err)?.into(), n0, n1)
    }

    fn ratio_hat(&self, x: Vec<f64>) -> f64 {
        self.inner.ratio_hat(&x)
    }

    fn log_ratio_hat(&self, x: Vec<f64>) -> f64 {
        self.inner.log_ratio_hat(&x)
    }

    /// Largest estimated ratio over the dataset.
    fn estimate_c(&self, dataset: &PyDataset) -> PyResult<f64> {
        Ok(self.inner.estimate_c(&dataset.inner).map_err(py_err)?.value())
    }

    /// Acceptance-rejection with the envelope estimated from `dataset`
    /// (or fixed to `c`), updated online.
    #[pyo3(signature = (proposal, n_target, seed, stream=0, dataset=None, c=None, max_proposals=None))]
    #[allow(clippy::too_many_arguments)]
    fn ar_sample<'py>(
        &self,
        py: Python<'py>,
        proposal: &PyDistribution,
        n_target: usize,
        seed: u64,
        stream: u64,
        dataset: Option<&PyDataset>,
        c: Option<f64>,
        max_proposals: Option<usize>,
    ) -> PyResult<(Vec<Vec<f64>>, Bound<'py, PyAny>)> {
        let env = match (dataset, c) {
            (Some(ds), None) => self.inner.estimate_c(&ds.inner).map_err(py_err)?,
            (None, Some(c)) => EnvelopeConstant::fixed(c, proposal.inner.dim()).map_err(py_err)?,
            _ => return Err(PyValueError::new_err("pass exactly one of dataset, c")),
        };
        let out = py
            .detach(|| {
                samplers::ar_sample(&self.inner, &env, &proposal.inner, n_target, max_proposals, &mut create_rng(seed, stream))
            })
            .map_err(py_err)?;
        Ok((rows(&out.points), json_to_py(py, &out.meta)?))
    }

    #[pyo3(signature = (proposal, n_steps, seed, stream=0, burn_in=None))]
    fn imh_chain<'py>(
        &self,
        py: Python<'py>,
        proposal: &PyDistribution,
        n_steps: usize,
        seed: u64,
        stream: u64,
        burn_in: Option<usize>,
    ) -> PyResult<(Vec<Vec<f64>>, Bound<'py, PyAny>)> {
        let out = py
            .detach(|| {
                samplers::imh_chain(&self.inner, &proposal.inner, n_steps, burn_in, ImhInit::FromProposal, &mut create_rng(seed, stream))
            })
            .map_err(py_err)?;
        Ok((rows(&out.states), json_to_py(py, &out.meta)?))
    }

    /// Returns `(resampled, proposals, weights, meta)`.
    #[pyo3(signature = (proposal, n_proposals, m_resampled, seed, stream=0, scheme="multinomial"))]
    #[allow(clippy::too_many_arguments, clippy::type_complexity)]
    fn sir_sample<'py>(
        &self,
        py: Python<'py>,
        proposal: &PyDistribution,
        n_proposals: usize,
        m_resampled: usize,
        seed: u64,
        stream: u64,
        scheme: &str,
    ) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>, Bound<'py, PyAny>)> {
        let scheme = match scheme {
            "multinomial" => ResamplingScheme::Multinomial,
            "systematic" => ResamplingScheme::Systematic,
            other => return Err(PyValueError::new_err(format!("unknown scheme {other:?}"))),
        };
        let out = py
            .detach(|| {
                samplers::sir_sample(&self.inner, &proposal.inner, n_proposals, m_resampled, scheme, &mut create_rng(seed, stream))
            })
            .map_err(py_err)?;
        Ok((
            rows(&out.resampled.points),
            rows(&out.weighted.points),
            out.weighted.weights.clone().unwrap_or_default(),
            json_to_py(py, &out.resampled.meta)?,
        ))
    }

    /// Self-normalized importance sampling of `E_target[f]`; `integrand`
    /// is `1`, `xJ` or `xJ^P`.
    #[pyo3(signature = (proposal, integrand, n, seed, stream=0))]
    fn is_estimate<'py>(
        &self,
        py: Python<'py>,
        proposal: &PyDistribution,
        integrand: &str,
        n: usize,
        seed: u64,
        stream: u64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let f = Integrand::parse(integrand).map_err(py_err)?;
        let est = samplers::is_estimate(&self.inner, &proposal.inner, &f, n, &mut create_rng(seed, stream)).map_err(py_err)?;
        json_to_py(py, &est)
    }
}

impl PyRatioEstimator {
    fn wrap(post: PosteriorFn, n0: usize, n1: usize) -> PyResult<Self> {
        Ok(Self {
            inner: ratio_mc::RatioEstimator::new(post, n0, n1).map_err(py_err)?,
        })
    }
}

/// Two-sample Kolmogorov-Smirnov test, returns `(statistic, p_value)`.
#[pyfunction]
fn ks_two_sample(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64)> {
    let r = diagnostics::ks_two_sample(&a, &b).map_err(py_err)?;
    Ok((r.statistic, r.p_value))
}

#[pyfunction]
fn ess(weights: Vec<f64>) -> PyResult<f64> {
    diagnostics::ess(&weights).map_err(py_err)
}

/// Per-coordinate and random-projection KS tests with moment deltas.
#[pyfunction]
#[pyo3(signature = (a, b, n_projections=10, seed=0, stream=0))]
fn two_sample_report<'py>(
    py: Python<'py>,
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    n_projections: usize,
    seed: u64,
    stream: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let r = diagnostics::two_sample_report(&to_points(a)?, &to_points(b)?, n_projections, &mut create_rng(seed, stream))
        .map_err(py_err)?;
    json_to_py(py, &r)
}

#[pymodule]
pub fn ratio_mc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", ratio_mc::VERSION)?;
    m.add_class::<PyDistribution>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyClassifier>()?;
    m.add_class::<PyRatioEstimator>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(ks_two_sample, m)?)?;
    m.add_function(wrap_pyfunction!(ess, m)?)?;
    m.add_function(wrap_pyfunction!(two_sample_report, m)?)?;
    Ok(())
}
