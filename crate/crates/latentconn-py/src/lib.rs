//! Python bindings: the connectivity utilities, the group statistics, and a
//! loaded-model handle for encoding, decoding, and generative deltas. Heavy
//! lifting stays in the `latentconn` crate; values cross the boundary as
//! plain lists.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use latentconn::cli::{cmd_analyze, cmd_synth, cmd_train, AnalyzeConfig, SynthConfig, TrainCmdConfig};
use latentconn::connectome::{self, ConnectivityMatrix, EdgeVector, RoiTimeSeries};
use latentconn::error::Error;
use latentconn::generator;
use latentconn::synth::SyntheticSpec;
use latentconn::vae::{self, TrainConfig};

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Numeric(_) => PyRuntimeError::new_err(e.to_string()),
        Error::Io(_) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn matrix_to_rows(m: &ConnectivityMatrix) -> Vec<Vec<f64>> {
    let n = m.n_regions();
    (0..n).map(|i| (0..n).map(|j| m.get(i, j)).collect()).collect()
}

fn rows_to_matrix(rows: Vec<Vec<f64>>) -> PyResult<ConnectivityMatrix> {
    let n = rows.len();
    let mut weights = Vec::with_capacity(n * n);
    for row in &rows {
        if row.len() != n {
            return Err(PyValueError::new_err(format!(
                "matrix must be square, row has {} of {} entries",
                row.len(),
                n
            )));
        }
        weights.extend_from_slice(row);
    }
    ConnectivityMatrix::from_weights(weights, n).map_err(to_py_err)
}

/// Sample Pearson correlation of two equal-length series.
#[pyfunction]
fn pearson_corr(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    connectome::pearson_corr(&x, &y).map_err(to_py_err)
}

/// Absolute-Pearson connectivity matrix from row-major time series samples.
#[pyfunction]
fn build_connectivity(samples: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    let rows = samples.len();
    let cols = samples.first().map(|r| r.len()).unwrap_or(0);
    let mut flat = Vec::with_capacity(rows * cols);
    for row in &samples {
        if row.len() != cols {
            return Err(PyValueError::new_err("ragged time series rows"));
        }
        flat.extend_from_slice(row);
    }
    let ts = RoiTimeSeries::new(flat, rows, cols).map_err(to_py_err)?;
    let m = connectome::build_connectivity(&ts).map_err(to_py_err)?;
    Ok(matrix_to_rows(&m))
}

/// Upper-triangle edge vector of a symmetric matrix, canonical order.
#[pyfunction]
fn vectorize_upper(matrix: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    let m = rows_to_matrix(matrix)?;
    Ok(connectome::vectorize_upper(&m).values().to_vec())
}

/// Symmetric zero-diagonal matrix rebuilt from an edge vector.
#[pyfunction]
fn devectorize(edges: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
    let v = EdgeVector::new(edges).map_err(to_py_err)?;
    Ok(matrix_to_rows(&connectome::devectorize(&v)))
}

/// Node strengths (sum of incident edge weights).
#[pyfunction]
fn fcs(matrix: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    let m = rows_to_matrix(matrix)?;
    Ok(connectome::fcs(&m))
}

/// Model input vector: edges followed by age/100.
#[pyfunction]
fn assemble_input(edges: Vec<f64>, age_years: f64) -> PyResult<Vec<f64>> {
    let v = EdgeVector::new(edges).map_err(to_py_err)?;
    connectome::assemble_input(&v, age_years).map_err(to_py_err)
}

/// The 90 region labels in canonical order.
#[pyfunction]
fn aal90_labels() -> Vec<String> {
    connectome::RegionAtlas::aal90().names().to_vec()
}

/// Student's two-sample t-test with pooled variance: (t, df, p).
#[pyfunction]
fn ttest_ind(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64, f64)> {
    let r = latentconn::analysis::ttest_ind(&a, &b).map_err(to_py_err)?;
    Ok((r.t, r.df, r.p))
}

/// Signed Pearson correlation with a two-sided p: (r, p, n_used).
#[pyfunction]
fn pearson_with_p(x: Vec<f64>, y: Vec<f64>) -> PyResult<(f64, f64, usize)> {
    let r = latentconn::analysis::pearson_with_p(&x, &y).map_err(to_py_err)?;
    Ok((r.r, r.p, r.n_used))
}

/// Rank-based AUC with positives marked true.
#[pyfunction]
fn roc_auc(scores: Vec<f64>, positive: Vec<bool>) -> PyResult<f64> {
    latentconn::analysis::roc_auc(&scores, &positive).map_err(to_py_err)
}

/// Write a synthetic cohort (manifest, edge and matrix CSVs, ground truth)
/// into `out_dir`. `spec_json` may be "{}" for the defaults.
#[pyfunction]
fn synth_cohort(spec_json: &str, out_dir: &str) -> PyResult<()> {
    let spec: SyntheticSpec =
        serde_json::from_str(spec_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    cmd_synth(&SynthConfig { out: PathBuf::from(out_dir), spec }).map_err(to_py_err)
}

/// Train on a cohort; returns the checkpoint path. `config_json` may be "{}".
#[pyfunction]
fn train_model(manifest: &str, edges_dir: &str, out_dir: &str, config_json: &str) -> PyResult<String> {
    let train: TrainConfig =
        serde_json::from_str(config_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    cmd_train(&TrainCmdConfig {
        manifest: PathBuf::from(manifest),
        edges: PathBuf::from(edges_dir),
        out: PathBuf::from(out_dir),
        train,
    })
    .map_err(to_py_err)?;
    Ok(PathBuf::from(out_dir).join("checkpoint.json").display().to_string())
}

/// Run the group statistics; returns the report as a JSON string.
#[pyfunction]
fn analyze(checkpoint: &str, manifest: &str, edges_dir: &str, out_dir: &str) -> PyResult<String> {
    let report = cmd_analyze(&AnalyzeConfig {
        checkpoint: PathBuf::from(checkpoint),
        manifest: PathBuf::from(manifest),
        edges: PathBuf::from(edges_dir),
        out: PathBuf::from(out_dir),
        welch: false,
    })
    .map_err(to_py_err)?;
    serde_json::to_string(&report).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// A trained model loaded from a checkpoint.
#[pyclass]
struct VaeModel {
    inner: vae::VaeModel,
}

#[pymethods]
impl VaeModel {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let inner = vae::load_checkpoint(std::path::Path::new(path)).map_err(to_py_err)?;
        Ok(VaeModel { inner })
    }

    #[getter]
    fn n_edges(&self) -> usize {
        self.inner.n_edges()
    }

    #[getter]
    fn latent_dim(&self) -> usize {
        self.inner.latent_dim()
    }

    /// Noise-free encoding of a subject: (latent mean, log variance).
    fn encode(&self, edges: Vec<f64>, age_years: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let v = EdgeVector::new(edges).map_err(to_py_err)?;
        let input = connectome::assemble_input(&v, age_years).map_err(to_py_err)?;
        let code = self.inner.encode(&input).map_err(to_py_err)?;
        Ok((code.mean, code.log_variance))
    }

    /// Decode a latent coordinate into the 4005 edge weights.
    fn decode(&self, z: Vec<f64>, age_years: f64) -> PyResult<Vec<f64>> {
        self.inner.decode(&z, age_years).map_err(to_py_err)
    }

    /// Decode into a full symmetric connectivity matrix.
    fn generate_matrix(&self, z: Vec<f64>, age_years: f64) -> PyResult<Vec<Vec<f64>>> {
        let m = generator::generate_matrix(&self.inner, &z, age_years).map_err(to_py_err)?;
        Ok(matrix_to_rows(&m))
    }

    /// Signed delta matrix for a +-SD shift of one feature.
    #[pyo3(signature = (feature, direction, age_years=None))]
    fn feature_delta(
        &self,
        feature: usize,
        direction: f64,
        age_years: Option<f64>,
    ) -> PyResult<Vec<Vec<f64>>> {
        let d = generator::feature_delta(&self.inner, feature, direction, age_years)
            .map_err(to_py_err)?;
        let n = d.n_regions();
        Ok((0..n).map(|i| (0..n).map(|j| d.get(i, j)).collect()).collect())
    }

    /// Cohort latent statistics: (means, SDs, mean age).
    fn latent_stats(&self) -> PyResult<(Vec<f64>, Vec<f64>, f64)> {
        let c = self.inner.cohort().map_err(to_py_err)?;
        Ok((c.latent_mean.clone(), c.latent_sd.clone(), c.mean_age_years))
    }
}

#[pymodule]
fn latentconn_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(pearson_corr, m)?)?;
    m.add_function(wrap_pyfunction!(build_connectivity, m)?)?;
    m.add_function(wrap_pyfunction!(vectorize_upper, m)?)?;
    m.add_function(wrap_pyfunction!(devectorize, m)?)?;
    m.add_function(wrap_pyfunction!(fcs, m)?)?;
    m.add_function(wrap_pyfunction!(assemble_input, m)?)?;
    m.add_function(wrap_pyfunction!(aal90_labels, m)?)?;
    m.add_function(wrap_pyfunction!(ttest_ind, m)?)?;
    m.add_function(wrap_pyfunction!(pearson_with_p, m)?)?;
    m.add_function(wrap_pyfunction!(roc_auc, m)?)?;
    m.add_function(wrap_pyfunction!(synth_cohort, m)?)?;
    m.add_function(wrap_pyfunction!(train_model, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_class::<VaeModel>()?;
    Ok(())
}
