//! Python bindings: the density model (train, evaluate, sample,
//! checkpoint) plus the anomaly-detection metrics, exposed with plain
//! lists so the module has no array-library dependency.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use red_core::data::{add_noise, fit_standardize, Dataset, Scaler};
use red_core::evaluation;
use red_core::model::{ModelConfig, RedModel as CoreModel};
use red_core::numerics::{Matrix, Rng};
use red_core::training::{self, TrainConfig};
use red_core::RedError;
use std::path::PathBuf;

fn to_py_err(err: RedError) -> PyErr {
    match err {
        RedError::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn matrix_from_rows(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    if rows.is_empty() {
        return Err(PyValueError::new_err("expected at least one row"));
    }
    let d = rows[0].len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(PyValueError::new_err("rows have inconsistent lengths"));
    }
    let mut m = Matrix::zeros((rows.len(), d));
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            m[[i, j]] = v;
        }
    }
    Ok(m)
}

fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// Exact, normalized density model over real-valued vectors.
#[pyclass(name = "DensityModel")]
struct PyDensityModel {
    inner: CoreModel,
}

#[pymethods]
impl PyDensityModel {
    #[new]
    #[pyo3(signature = (d, num_units=32, transform_hidden=4, num_components=5, num_fcs=1, alpha=0.1, candidate_activation="sigmoid", seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        d: usize,
        num_units: usize,
        transform_hidden: usize,
        num_components: usize,
        num_fcs: usize,
        alpha: f64,
        candidate_activation: &str,
        seed: u64,
    ) -> PyResult<Self> {
        let candidate = match candidate_activation {
            "sigmoid" => red_core::conditional::CandidateActivation::Sigmoid,
            "tanh" => red_core::conditional::CandidateActivation::Tanh,
            other => {
                return Err(PyValueError::new_err(format!(
                    "candidate_activation must be 'sigmoid' or 'tanh', got '{other}'"
                )))
            }
        };
        let config = ModelConfig {
            d,
            num_units,
            transform_hidden,
            num_components,
            num_fcs,
            alpha,
            candidate_activation: candidate,
            seed,
        };
        Ok(PyDensityModel {
            inner: CoreModel::from_config(&config).map_err(to_py_err)?,
        })
    }

    /// log p(x) for one vector.
    fn log_prob(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner
            .log_prob(&ndarray::Array1::from_vec(x))
            .map_err(to_py_err)
    }

    /// log p per row.
    fn log_probs(&self, rows: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        let m = matrix_from_rows(rows)?;
        let nlls = self.inner.nll_per_row(&m).map_err(to_py_err)?;
        Ok(nlls.iter().map(|v| -v).collect())
    }

    /// Mean negative log-likelihood over rows, in nats.
    fn nll(&self, rows: Vec<Vec<f64>>) -> PyResult<f64> {
        let m = matrix_from_rows(rows)?;
        self.inner.nll(&m).map_err(to_py_err)
    }

    /// Draw n rows (in the model's own space).
    fn sample(&self, n: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        let mut rng = Rng::seed_from_u64(seed);
        let rows = self.inner.sample(&mut rng, n).map_err(to_py_err)?;
        Ok(matrix_to_rows(&rows))
    }

    /// Train on `train_rows`, early-stopping on `val_rows`; returns the
    /// per-epoch history as a list of dicts and leaves the model at the
    /// best-validation snapshot.
    #[pyo3(signature = (train_rows, val_rows, init_lr=0.01, decay_factor=0.97, min_lr=1e-5, batch_size=128, max_epochs=200, patience=10, seed=0, noise_std=0.01, grad_clip_norm=5.0))]
    #[allow(clippy::too_many_arguments)]
    fn fit<'py>(
        &mut self,
        py: Python<'py>,
        train_rows: Vec<Vec<f64>>,
        val_rows: Vec<Vec<f64>>,
        init_lr: f64,
        decay_factor: f64,
        min_lr: f64,
        batch_size: usize,
        max_epochs: usize,
        patience: usize,
        seed: u64,
        noise_std: f64,
        grad_clip_norm: f64,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let train_x = matrix_from_rows(train_rows)?;
        let val_x = matrix_from_rows(val_rows)?;
        let cfg = TrainConfig {
            init_lr,
            decay_factor,
            min_lr,
            batch_size,
            max_epochs,
            patience,
            seed,
            noise_std,
            noise_per_epoch: false,
            grad_clip_norm,
        };
        let (trained, history) =
            training::train(&self.inner, &train_x, &val_x, &cfg).map_err(to_py_err)?;
        self.inner = trained;
        history
            .epochs
            .iter()
            .map(|e| {
                let d = PyDict::new(py);
                d.set_item("epoch", e.epoch)?;
                d.set_item("train_nll", e.train_nll)?;
                d.set_item("val_nll", e.val_nll)?;
                d.set_item("lr", e.lr)?;
                d.set_item("seconds", e.seconds)?;
                Ok(d)
            })
            .collect()
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        red_core::checkpoint::save_checkpoint(&self.inner, &path).map_err(to_py_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyDensityModel {
            inner: red_core::checkpoint::load_checkpoint(&path).map_err(to_py_err)?,
        })
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.inner.param_count()
    }

    fn __repr__(&self) -> String {
        let c = &self.inner.config;
        format!(
            "DensityModel(d={}, num_units={}, num_components={}, params={})",
            c.d,
            c.num_units,
            c.num_components,
            self.inner.param_count()
        )
    }
}

/// Per-column standardizer (population std, fitted on training rows).
#[pyclass(name = "Standardizer")]
struct PyStandardizer {
    inner: Scaler,
}

#[pymethods]
impl PyStandardizer {
    #[staticmethod]
    fn fit(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        let ds = Dataset::from_matrix(matrix_from_rows(rows)?);
        Ok(PyStandardizer {
            inner: fit_standardize(&ds).map_err(to_py_err)?,
        })
    }

    fn transform(&self, rows: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let m = matrix_from_rows(rows)?;
        Ok(matrix_to_rows(
            &self.inner.transform_matrix(&m).map_err(to_py_err)?,
        ))
    }

    fn inverse(&self, rows: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let m = matrix_from_rows(rows)?;
        Ok(matrix_to_rows(
            &self.inner.inverse_matrix(&m).map_err(to_py_err)?,
        ))
    }

    #[getter]
    fn means(&self) -> Vec<f64> {
        self.inner.means.clone()
    }

    #[getter]
    fn stds(&self) -> Vec<f64> {
        self.inner.stds.clone()
    }
}

/// Average precision of an anomaly ranking: scores ascending (lowest
/// log-likelihood first), labels true for anomalies.
#[pyfunction]
fn average_precision(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<f64> {
    let rs = evaluation::RankedScores::new(scores, Some(labels)).map_err(to_py_err)?;
    evaluation::average_precision(&rs).map_err(to_py_err)
}

/// Binary-gain nDCG of an anomaly ranking (no cutoff).
#[pyfunction]
fn ndcg(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<f64> {
    let rs = evaluation::RankedScores::new(scores, Some(labels)).map_err(to_py_err)?;
    evaluation::ndcg(&rs).map_err(to_py_err)
}

/// Precision/recall arrays over the bottom-r score sets.
#[pyfunction]
fn precision_recall_curve(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let rs = evaluation::RankedScores::new(scores, Some(labels)).map_err(to_py_err)?;
    let curve = evaluation::pr_curve(&rs).map_err(to_py_err)?;
    Ok((curve.precision, curve.recall))
}

/// Paired two-sided t-test; returns (t, p_two_sided).
#[pyfunction]
fn paired_t_test(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64)> {
    let r = evaluation::paired_t_test(&a, &b).map_err(to_py_err)?;
    Ok((r.t, r.p_two_sided))
}

/// Add seeded Gaussian noise to rows (training-split preprocessing).
#[pyfunction]
fn add_gaussian_noise(rows: Vec<Vec<f64>>, std: f64, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    let m = matrix_from_rows(rows)?;
    let mut rng = Rng::seed_from_u64(seed);
    Ok(matrix_to_rows(
        &add_noise(&m, std, &mut rng).map_err(to_py_err)?,
    ))
}

#[pymodule]
fn red_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDensityModel>()?;
    m.add_class::<PyStandardizer>()?;
    m.add_function(wrap_pyfunction!(average_precision, m)?)?;
    m.add_function(wrap_pyfunction!(ndcg, m)?)?;
    m.add_function(wrap_pyfunction!(precision_recall_curve, m)?)?;
    m.add_function(wrap_pyfunction!(paired_t_test, m)?)?;
    m.add_function(wrap_pyfunction!(add_gaussian_noise, m)?)?;
    Ok(())
}
