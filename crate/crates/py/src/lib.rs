//! Python bindings: price data, target construction, both models, and the
//! scoring utilities, exposed as a small functional surface.
//!
//! Build with `cargo build -p bornbench-py --release` and import the cdylib
//! as `bornbench_py` (see python/smoke_test.py).

#![allow(clippy::needless_range_loop)]

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use bornbench_core::error::Error;
use bornbench_core::frontier::{self, TargetDistribution};
use bornbench_core::harness::{self, BenchConfig, KappaRule, ReturnLevels};
use bornbench_core::market_data::{self, PriceMatrix as CorePrices};
use bornbench_core::metrics;
use bornbench_core::qcbm;
use bornbench_core::rbm;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Size(_) | Error::Range(_) | Error::Index(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Daily closing prices (dates x assets).
#[pyclass(name = "PriceMatrix")]
struct PyPriceMatrix {
    inner: CorePrices,
}

#[pymethods]
impl PyPriceMatrix {
    /// Load a wide CSV (header: date,<T1>,<T2>,...).
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let inner = market_data::load_prices(std::path::Path::new(path)).map_err(py_err)?;
        Ok(Self { inner })
    }

    /// Seeded geometric random-walk prices.
    #[staticmethod]
    #[pyo3(signature = (assets, days, seed, drift=(-0.002, 0.005), vol=(0.005, 0.03)))]
    fn synthetic(
        assets: usize,
        days: usize,
        seed: u64,
        drift: (f64, f64),
        vol: (f64, f64),
    ) -> PyResult<Self> {
        let inner = market_data::synth_prices(assets, days, seed, drift, vol).map_err(py_err)?;
        Ok(Self { inner })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner
            .save(std::path::Path::new(path))
            .map_err(py_err)
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.inner.n_days(), self.inner.n_assets())
    }

    #[getter]
    fn tickers(&self) -> Vec<String> {
        self.inner.tickers().to_vec()
    }

    /// Uniform random subset of asset indices, ascending, seeded.
    fn select_subset(&self, n: usize, seed: u64) -> PyResult<Vec<usize>> {
        market_data::select_subset(&self.inner, n, seed).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "PriceMatrix({} days x {} assets)",
            self.inner.n_days(),
            self.inner.n_assets()
        )
    }
}

/// Boltzmann target over all 2^n bitstrings with cardinality-kappa support.
#[pyclass(name = "Target")]
struct PyTarget {
    inner: TargetDistribution,
}

#[pymethods]
impl PyTarget {
    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn kappa(&self) -> usize {
        self.inner.kappa
    }

    #[getter]
    fn rho(&self) -> f64 {
        self.inner.rho
    }

    #[getter]
    fn temperature(&self) -> f64 {
        self.inner.temperature
    }

    #[getter]
    fn probs(&self) -> Vec<f64> {
        self.inner.probs.clone()
    }

    /// KL from this target to the uniform distribution (no-training score).
    fn uniform_baseline(&self) -> f64 {
        metrics::uniform_baseline(&self.inner)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(std::path::Path::new(path)).map_err(py_err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let inner = TargetDistribution::load(std::path::Path::new(path)).map_err(py_err)?;
        Ok(Self { inner })
    }

    fn __repr__(&self) -> String {
        format!(
            "Target(n={}, kappa={}, rho={}, support={})",
            self.inner.n,
            self.inner.kappa,
            self.inner.rho,
            self.inner.support_size()
        )
    }
}

/// Build a target distribution from a price subset at one return level.
#[pyfunction]
#[pyo3(signature = (prices, subset, kappa, rho, bounds=(0.0, 1.0)))]
fn build_target(
    prices: &PyPriceMatrix,
    subset: Vec<usize>,
    kappa: usize,
    rho: f64,
    bounds: (f64, f64),
) -> PyResult<PyTarget> {
    let returns = market_data::compute_returns(&prices.inner);
    let stats = market_data::compute_stats(&returns).map_err(py_err)?;
    let sub = stats.select(&subset).map_err(py_err)?;
    let inner = frontier::build_target(&sub, kappa, rho, bounds).map_err(py_err)?;
    Ok(PyTarget { inner })
}

/// Circuit parameter count n(n+3)/2.
#[pyfunction]
fn param_count(n: usize) -> usize {
    qcbm::param_count(n)
}

/// Born probabilities of the two-layer ansatz for a flat parameter vector.
#[pyfunction]
fn born_probs(n: usize, params: Vec<f64>) -> PyResult<Vec<f64>> {
    qcbm::born_probs_flat(n, &params).map_err(py_err)
}

/// Clipped KL divergence.
#[pyfunction]
#[pyo3(signature = (p, q, eps=1e-8))]
fn kl_divergence(p: Vec<f64>, q: Vec<f64>, eps: f64) -> PyResult<f64> {
    metrics::kl_divergence(&p, &q, eps).map_err(py_err)
}

/// Bootstrap the median: returns (median, p5, p95).
#[pyfunction]
#[pyo3(signature = (values, resamples=10_000, seed=0))]
fn bootstrap_median(values: Vec<f64>, resamples: usize, seed: u64) -> PyResult<(f64, f64, f64)> {
    let s = metrics::bootstrap_median(&values, resamples, seed).map_err(py_err)?;
    Ok((s.median, s.p5, s.p95))
}

/// Train a QCBM against a target with CMA-ES. Returns a dict with
/// final_kl, params, evaluations, and the (generation, best, median) trace.
#[pyfunction]
#[pyo3(signature = (target, seed=0, budget=None, init_step=0.3, eps=1e-8))]
fn train_qcbm<'py>(
    py: Python<'py>,
    target: &PyTarget,
    seed: u64,
    budget: Option<usize>,
    init_step: f64,
    eps: f64,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let r = harness::train_qcbm(&target.inner, budget, init_step, eps, seed).map_err(py_err)?;
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("final_kl", r.best_loss)?;
    dict.set_item("params", r.best_params)?;
    dict.set_item("evaluations", r.evaluations)?;
    let history: Vec<(usize, f64, f64)> = r
        .history
        .iter()
        .map(|g| (g.generation, g.best, g.median))
        .collect();
    dict.set_item("history", history)?;
    Ok(dict)
}

/// Train an RBM against a target with PCD-k and score it exactly. Returns a
/// dict with final_kl, params (flat), and the per-epoch divergence trace.
#[pyfunction]
#[pyo3(signature = (target, seed=0, k_gibbs=1, epochs=200, learning_rate=0.05,
                    batch_size=64, n_chains=64, train_samples=10_000,
                    exact_expectations=false, eps=1e-8))]
#[allow(clippy::too_many_arguments)]
fn train_rbm<'py>(
    py: Python<'py>,
    target: &PyTarget,
    seed: u64,
    k_gibbs: usize,
    epochs: usize,
    learning_rate: f64,
    batch_size: usize,
    n_chains: usize,
    train_samples: usize,
    exact_expectations: bool,
    eps: f64,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let cfg = BenchConfig {
        kappa: KappaRule::Named("half".into()),
        return_levels: ReturnLevels::Explicit(vec![target.inner.rho]),
        eps,
        rbm: harness::config::RbmConfig {
            learning_rate,
            batch_size,
            epochs,
            n_chains,
            train_samples,
            exact_expectations,
        },
        ..BenchConfig::default()
    };
    let (params, trace, final_kl) =
        harness::train_rbm(&target.inner, &cfg, k_gibbs, seed).map_err(py_err)?;
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("final_kl", final_kl)?;
    dict.set_item("params", params.to_flat())?;
    dict.set_item("history", trace)?;
    Ok(dict)
}

/// Exact RBM visible marginal for flat parameters (vbias, hbias, weights
/// row-major), used for scoring.
#[pyfunction]
fn rbm_visible_probs(n_v: usize, n_h: usize, params: Vec<f64>) -> PyResult<Vec<f64>> {
    if params.len() != n_v + n_h + n_v * n_h {
        return Err(PyValueError::new_err(format!(
            "expected {} parameters, got {}",
            n_v + n_h + n_v * n_h,
            params.len()
        )));
    }
    let mut p = rbm::RbmParams::zeros(n_v, n_h);
    for i in 0..n_v {
        p.vbias[i] = params[i];
    }
    for j in 0..n_h {
        p.hbias[j] = params[n_v + j];
    }
    for i in 0..n_v {
        for j in 0..n_h {
            p.weights[(i, j)] = params[n_v + n_h + i * n_h + j];
        }
    }
    rbm::exact_visible_probs(&p).map_err(py_err)
}

#[pymodule]
fn bornbench_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyPriceMatrix>()?;
    m.add_class::<PyTarget>()?;
    m.add_function(wrap_pyfunction!(build_target, m)?)?;
    m.add_function(wrap_pyfunction!(param_count, m)?)?;
    m.add_function(wrap_pyfunction!(born_probs, m)?)?;
    m.add_function(wrap_pyfunction!(kl_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(bootstrap_median, m)?)?;
    m.add_function(wrap_pyfunction!(train_qcbm, m)?)?;
    m.add_function(wrap_pyfunction!(train_rbm, m)?)?;
    m.add_function(wrap_pyfunction!(rbm_visible_probs, m)?)?;
    Ok(())
}
