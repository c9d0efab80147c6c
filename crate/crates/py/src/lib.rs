//! Python bindings.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hammix::baseline;
use hammix::data::{self, CategoricalDataset, LoadOptions};
use hammix::gibbs::{run_chain, RunSettings};
use hammix::hamming::{self, HammingParams};
use hammix::hig::{self, HIGParams};
use hammix::mixture::{self, KStatistic, PartitionSizes};
use hammix::simharness;
use hammix::summary::{self, Partition};

fn to_py(e: hammix::Error) -> PyErr {
    if e.is_usage() || matches!(e, hammix::Error::Domain(_)) {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

/// Integer-coded categorical data matrix.
#[pyclass(name = "Dataset", module = "pyhammix", skip_from_py_object)]
#[derive(Clone)]
pub struct PyDataset {
    inner: CategoricalDataset,
}

#[pymethods]
impl PyDataset {
    /// Loads a delimited text file; every column is a categorical variable.
    #[staticmethod]
    #[pyo3(signature = (path, delimiter = ',', header = true))]
    fn load(path: &str, delimiter: char, header: bool) -> PyResult<Self> {
        if !delimiter.is_ascii() {
            return Err(PyValueError::new_err("delimiter must be ASCII"));
        }
        let opts = LoadOptions {
            delimiter: delimiter as u8,
            has_header: header,
        };
        let inner = data::load_path(std::path::Path::new(path), &opts).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Builds a dataset from rows of codes 0..m_j - 1. Modality counts default
    /// to one more than the largest code of each column.
    #[staticmethod]
    #[pyo3(signature = (rows, modality_counts = None))]
    fn from_codes(rows: Vec<Vec<u32>>, modality_counts: Option<Vec<usize>>) -> PyResult<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != p) {
            return Err(PyValueError::new_err("rows differ in length"));
        }
        let m = modality_counts.unwrap_or_else(|| {
            (0..p)
                .map(|j| rows.iter().map(|r| r[j] as usize + 1).max().unwrap_or(1))
                .collect()
        });
        let codes = rows.into_iter().flatten().collect();
        let inner = CategoricalDataset::from_numeric_codes(n, &m, codes).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn p(&self) -> usize {
        self.inner.p()
    }

    #[getter]
    fn modality_counts(&self) -> Vec<usize> {
        self.inner.modality_counts()
    }

    #[getter]
    fn variable_names(&self) -> Vec<String> {
        self.inner.variable_names().to_vec()
    }

    fn row(&self, i: usize) -> PyResult<Vec<u32>> {
        if i >= self.inner.n() {
            return Err(PyValueError::new_err("row index out of range"));
        }
        Ok(self.inner.row(i).to_vec())
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(n={}, p={})", self.inner.n(), self.inner.p())
    }
}

/// Mixture hyperparameters.
#[pyclass(name = "ModelConfig", module = "pyhammix", skip_from_py_object)]
#[derive(Clone)]
pub struct PyModelConfig {
    inner: mixture::ModelConfig,
}

#[pymethods]
impl PyModelConfig {
    #[new]
    #[pyo3(signature = (gamma, lambda_, modality_counts, shared_sigma = false))]
    fn new(gamma: f64, lambda_: f64, modality_counts: Vec<usize>, shared_sigma: bool) -> Self {
        let mut inner = mixture::ModelConfig::with_defaults(gamma, lambda_, &modality_counts);
        inner.shared_sigma = shared_sigma;
        Self { inner }
    }

    /// Sets the HIG hyperparameters of variable `j`.
    fn set_hig(&mut self, j: usize, v: f64, w: f64) -> PyResult<()> {
        let m = self
            .inner
            .hig_priors
            .get(j)
            .ok_or_else(|| PyValueError::new_err("variable index out of range"))?
            .m;
        self.inner.hig_priors[j] = HIGParams::new(v, w, m).map_err(to_py)?;
        Ok(())
    }

    #[getter]
    fn hig(&self) -> Vec<(f64, f64, usize)> {
        self.inner.hig_priors.iter().map(|h| (h.v, h.w, h.m)).collect()
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }

    #[getter]
    fn lambda_(&self) -> f64 {
        self.inner.lambda
    }
}

/// Output of [`fit`].
#[pyclass(name = "Chain", module = "pyhammix")]
pub struct PyChain {
    #[pyo3(get)]
    allocations: Vec<Vec<u32>>,
    #[pyo3(get)]
    k_trace: Vec<usize>,
    #[pyo3(get)]
    seconds: f64,
    #[pyo3(get)]
    acceptance_rate: Option<f64>,
}

/// Runs one Gibbs chain and returns the recorded allocations.
#[pyfunction]
#[pyo3(signature = (dataset, config, iters, burnin, thin = 1, seed = 1, chain = 0))]
fn fit(
    py: Python<'_>,
    dataset: &PyDataset,
    config: &PyModelConfig,
    iters: usize,
    burnin: usize,
    thin: usize,
    seed: u64,
    chain: u64,
) -> PyResult<PyChain> {
    let mut settings = RunSettings::new(iters, burnin, thin, seed);
    settings.chain = chain;
    settings.record_clusters = false;
    let data = dataset.inner.clone();
    let cfg = config.inner.clone();
    let trace = py.detach(move || run_chain(&data, &cfg, settings)).map_err(to_py)?;
    Ok(PyChain {
        k_trace: trace.records.iter().map(|r| r.k).collect(),
        allocations: trace.allocations,
        seconds: trace.meta.seconds,
        acceptance_rate: trace.meta.acceptance.rate(),
    })
}

/// VI point estimate among the draws: (labels, expected loss).
#[pyfunction]
fn point_estimate_vi(allocations: Vec<Vec<u32>>) -> PyResult<(Vec<u32>, f64)> {
    let est = summary::point_estimate_vi(&allocations).map_err(to_py)?;
    Ok((est.partition.labels().to_vec(), est.expected_loss))
}

#[pyfunction]
fn adjusted_rand_index(a: Vec<i64>, b: Vec<i64>) -> PyResult<f64> {
    summary::adjusted_rand_index(&Partition::from_labels(&a), &Partition::from_labels(&b)).map_err(to_py)
}

#[pyfunction]
fn vi_distance(a: Vec<i64>, b: Vec<i64>) -> PyResult<f64> {
    summary::vi_distance(&Partition::from_labels(&a), &Partition::from_labels(&b)).map_err(to_py)
}

/// Overall mean silhouette width under the Hamming distance.
#[pyfunction]
fn silhouette(dataset: &PyDataset, labels: Vec<i64>) -> PyResult<f64> {
    let s = summary::silhouette_hamming(&dataset.inner, &Partition::from_labels(&labels)).map_err(to_py)?;
    Ok(s.overall)
}

#[pyfunction]
fn hamming_log_pmf(x: Vec<u32>, center: Vec<u32>, scale: Vec<f64>, modality_counts: Vec<usize>) -> PyResult<f64> {
    let params = HammingParams::new(center, scale).map_err(to_py)?;
    hamming::log_pmf(&x, &params, &modality_counts).map_err(to_py)
}

#[pyfunction]
fn hig_log_density_sigma(sigma: f64, v: f64, w: f64, m: usize) -> PyResult<f64> {
    let h = HIGParams::new(v, w, m).map_err(to_py)?;
    hig::log_density_sigma(sigma, &h).map_err(to_py)
}

#[pyfunction]
fn hig_omega_cdf(omega: f64, v: f64, w: f64, m: usize) -> PyResult<f64> {
    let h = HIGParams::new(v, w, m).map_err(to_py)?;
    hig::omega_cdf(omega, &h).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (v, w, m, size, seed = 1))]
fn hig_sample_sigma(v: f64, w: f64, m: usize, size: usize, seed: u64) -> PyResult<Vec<f64>> {
    let h = HIGParams::new(v, w, m).map_err(to_py)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..size).map(|_| hig::sample_sigma(&h, &mut rng).map_err(to_py)).collect()
}

/// P(K = 1), P(K = 2), ... under the prior.
#[pyfunction]
fn prior_k(n: usize, gamma: f64, lambda_: f64) -> PyResult<Vec<f64>> {
    Ok(mixture::prior_k_pmf(n, gamma, lambda_).map_err(to_py)?.pmf)
}

#[pyfunction]
#[pyo3(signature = (n, lambda_, k, statistic = "mean", tol = 0.05))]
fn elicit_gamma(n: usize, lambda_: f64, k: usize, statistic: &str, tol: f64) -> PyResult<f64> {
    let stat: KStatistic = statistic.parse().map_err(to_py)?;
    mixture::elicit_gamma(n, lambda_, k, stat, tol).map_err(to_py)
}

#[pyfunction]
fn eppf_log(sizes: Vec<usize>, gamma: f64, lambda_: f64) -> PyResult<f64> {
    let s = PartitionSizes::new(sizes).map_err(to_py)?;
    mixture::eppf_log(&s, gamma, lambda_).map_err(to_py)
}

/// Best K-modes restart: (labels, cost).
#[pyfunction]
#[pyo3(signature = (dataset, k, restarts = 10, max_iter = 100, seed = 1))]
fn kmodes(dataset: &PyDataset, k: usize, restarts: usize, max_iter: usize, seed: u64) -> PyResult<(Vec<u32>, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = baseline::kmodes(&dataset.inner, k, restarts, max_iter, &mut rng).map_err(to_py)?;
    Ok((r.partition.labels().to_vec(), r.cost))
}

/// Synthetic dataset of a simulation scenario: (dataset, true labels).
#[pyfunction]
#[pyo3(signature = (scenario, seed = 1))]
fn generate_scenario(scenario: usize, seed: u64) -> PyResult<(PyDataset, Vec<u32>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (inner, truth) = simharness::generate_scenario(scenario, &mut rng).map_err(to_py)?;
    Ok((PyDataset { inner }, truth.labels().to_vec()))
}

#[pymodule]
fn pyhammix(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModelConfig>()?;
    m.add_class::<PyChain>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(point_estimate_vi, m)?)?;
    m.add_function(wrap_pyfunction!(adjusted_rand_index, m)?)?;
    m.add_function(wrap_pyfunction!(vi_distance, m)?)?;
    m.add_function(wrap_pyfunction!(silhouette, m)?)?;
    m.add_function(wrap_pyfunction!(hamming_log_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(hig_log_density_sigma, m)?)?;
    m.add_function(wrap_pyfunction!(hig_omega_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(hig_sample_sigma, m)?)?;
    m.add_function(wrap_pyfunction!(prior_k, m)?)?;
    m.add_function(wrap_pyfunction!(elicit_gamma, m)?)?;
    m.add_function(wrap_pyfunction!(eppf_log, m)?)?;
    m.add_function(wrap_pyfunction!(kmodes, m)?)?;
    m.add_function(wrap_pyfunction!(generate_scenario, m)?)?;
    Ok(())
}
