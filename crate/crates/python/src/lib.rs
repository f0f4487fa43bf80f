//! Python bindings: surrogate synthesis, audit runs and reports, the
//! envelope autocorrelation map, and the statistics helpers.

use ndarray::Array2;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use templeak::design::TemplateKind;
use templeak::experiments::{self as exp, TaskKind};
use templeak::lrtc::{lrtc_map, LrtcConfig, LrtcInput};
use templeak::signal::{synth as synth_series, SurrogateKind, SurrogateSpec};
use templeak::{Error, MultichannelSeries};

fn py_err(e: Error) -> PyErr {
    match e.exit_code() {
        3 => PyIOError::new_err(e.to_string()),
        4 => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.outer_iter().map(|r| r.to_vec()).collect()
}

fn series(data: Vec<Vec<f64>>, fs: f64) -> PyResult<MultichannelSeries> {
    let channels = data.len();
    let len = data.first().map_or(0, Vec::len);
    if data.iter().any(|r| r.len() != len) {
        return Err(PyValueError::new_err("all channels must have the same length"));
    }
    let flat: Vec<f64> = data.into_iter().flatten().collect();
    let arr = Array2::from_shape_vec((channels, len), flat).map_err(|e| PyValueError::new_err(e.to_string()))?;
    MultichannelSeries::new(arr, fs, "python").map_err(py_err)
}

/// Surrogate recording as a list of channels.
#[pyfunction]
#[pyo3(signature = (kind, duration_s, fs, channels, seed = 0, beta = 1.0, phi = 0.9))]
#[allow(clippy::too_many_arguments)]
fn synth(kind: &str, duration_s: f64, fs: f64, channels: usize, seed: u64, beta: f64, phi: f64) -> PyResult<Vec<Vec<f64>>> {
    let kind = match kind {
        "white" => SurrogateKind::White,
        "ar1" => SurrogateKind::Ar1 { phi },
        "powerlaw" => SurrogateKind::PowerLaw { beta },
        other => return Err(PyValueError::new_err(format!("unknown surrogate kind {other:?}"))),
    };
    let spec = SurrogateSpec::white(duration_s, fs, channels, seed).with_kind(kind);
    Ok(rows(synth_series(&spec).map_err(py_err)?.data()))
}

/// Run configuration; build from a preset or JSON and refine with overlays.
#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct RunConfig(exp::RunConfig);

#[pymethods]
impl RunConfig {
    #[new]
    #[pyo3(signature = (json = None))]
    fn new(json: Option<&str>) -> PyResult<Self> {
        Ok(Self(match json {
            Some(text) => exp::RunConfig::from_json(text).map_err(py_err)?,
            None => exp::RunConfig::default(),
        }))
    }

    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        exp::RunConfig::preset(name).map(Self).map_err(py_err)
    }

    /// Copy with the fields of a JSON object replaced.
    fn overlay(&self, patch: &str) -> PyResult<Self> {
        let v: serde_json::Value = serde_json::from_str(patch).map_err(|e| PyValueError::new_err(e.to_string()))?;
        self.0.overlay(v).map(Self).map_err(py_err)
    }

    fn validate(&self) -> PyResult<()> {
        self.0.validate().map_err(py_err)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    fn hash(&self) -> String {
        self.0.hash()
    }
}

#[pyclass(frozen)]
struct AuditReport(exp::AuditReport);

#[pymethods]
impl AuditReport {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        exp::AuditReport::from_json(text).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        exp::AuditReport::load(&path).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn merge(reports: Vec<Bound<'_, AuditReport>>) -> PyResult<Self> {
        let inner: Vec<exp::AuditReport> = reports.iter().map(|r| r.get().0.clone()).collect();
        exp::AuditReport::merge(&inner).map(Self).map_err(py_err)
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.0.warnings.clone()
    }

    /// Summary accuracy and its standard error, or `None` when absent.
    #[pyo3(signature = (task, template, split, metric = "accuracy", band = "full", variant = None))]
    fn summary(
        &self,
        task: &str,
        template: &str,
        split: &str,
        metric: &str,
        band: &str,
        variant: Option<&str>,
    ) -> PyResult<Option<(Option<f64>, Option<f64>, Option<f64>)>> {
        let task: TaskKind = task.parse().map_err(py_err)?;
        let template: TemplateKind = template.parse().map_err(py_err)?;
        let band = band.parse().map_err(py_err)?;
        let metric = exp::Metric::ALL
            .iter()
            .copied()
            .find(|m| m.name() == metric)
            .ok_or_else(|| PyValueError::new_err(format!("unknown metric {metric:?}")))?;
        Ok(self
            .0
            .summary(task, template, split, band, metric, variant)
            .map(|c| (c.accuracy_pct, c.sem_pct, c.chance_pct)))
    }

    fn render(&self) -> String {
        self.0.render()
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    /// Writes `report.json` and the table CSVs; returns the file names.
    fn write(&self, dir: std::path::PathBuf) -> PyResult<Vec<String>> {
        self.0.write(&dir).map_err(py_err)
    }
}

/// Runs the configured decoding grid and assembles the report.
#[pyfunction]
fn run_audit(py: Python<'_>, config: &RunConfig) -> PyResult<AuditReport> {
    let cfg = config.0.clone();
    py.detach(move || exp::run_band_audit(&cfg, &cfg.bands))
        .map(AuditReport)
        .map_err(py_err)
}

/// `(gamma, mean_pct, sem_pct, chance_pct)` for each signature strength.
#[pyfunction]
#[pyo3(signature = (config, template, gammas, task = "tlc_eeg"))]
fn sweep_domain_strength(
    py: Python<'_>,
    config: &RunConfig,
    template: &str,
    gammas: Vec<f64>,
    task: &str,
) -> PyResult<Vec<(f64, f64, f64, f64)>> {
    let cfg = config.0.clone();
    let template: TemplateKind = template.parse().map_err(py_err)?;
    let task: TaskKind = task.parse().map_err(py_err)?;
    let points = py
        .detach(move || exp::sweep_domain_strength(&cfg, template, &gammas, task))
        .map_err(py_err)?;
    Ok(points.into_iter().map(|p| (p.gamma, p.mean_pct, p.sem_pct, p.chance_pct)).collect())
}

/// Envelope autocorrelation map over continuous recordings (each a list of
/// channels at `fs`). Returns a dict of `values`, `p_values`, `reject`,
/// `freqs`, `lags_s` and `n_units`.
#[pyfunction]
#[pyo3(signature = (recordings, fs, config_json = None))]
fn lrtc<'py>(
    py: Python<'py>,
    recordings: Vec<Vec<Vec<f64>>>,
    fs: f64,
    config_json: Option<&str>,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let cfg: LrtcConfig = match config_json {
        Some(t) => serde_json::from_str(t).map_err(|e| PyValueError::new_err(e.to_string()))?,
        None => LrtcConfig::default(),
    };
    let inputs = recordings
        .into_iter()
        .map(|r| series(r, fs).map(LrtcInput::Continuous))
        .collect::<PyResult<Vec<_>>>()?;
    let m = py.detach(move || lrtc_map(&inputs, &cfg)).map_err(py_err)?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("values", rows(&m.values))?;
    d.set_item("p_values", rows(&m.p_values))?;
    d.set_item("reject", m.reject.outer_iter().map(|r| r.to_vec()).collect::<Vec<_>>())?;
    d.set_item("freqs", m.freqs)?;
    d.set_item("lags_s", m.lags_s)?;
    d.set_item("n_units", m.n_units)?;
    Ok(d)
}

/// Benjamini-Hochberg adjusted p-values and the rejection mask at `q`.
#[pyfunction]
fn bh_fdr(p: Vec<f64>, q: f64) -> PyResult<(Vec<f64>, Vec<bool>)> {
    templeak::stats::bh_fdr(&p, q).map_err(py_err)
}

#[pyfunction]
fn bonferroni(p: Vec<f64>) -> PyResult<Vec<f64>> {
    templeak::stats::bonferroni(&p).map_err(py_err)
}

/// Percentage of rows whose target column ranks within the top `k` scores.
#[pyfunction]
fn top_k_pct(scores: Vec<Vec<f64>>, targets: Vec<usize>, k: usize) -> PyResult<f64> {
    let s = score_matrix(scores)?;
    exp::metrics::top_k_pct(s.view(), &targets, k).map_err(py_err)
}

/// Mean normalized rank of the target: 100 always first, 50 chance.
#[pyfunction]
fn rank_accuracy_pct(scores: Vec<Vec<f64>>, targets: Vec<usize>) -> PyResult<f64> {
    let s = score_matrix(scores)?;
    exp::metrics::rank_accuracy_pct(s.view(), &targets).map_err(py_err)
}

fn score_matrix(scores: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    let n = scores.len();
    let m = scores.first().map_or(0, Vec::len);
    if scores.iter().any(|r| r.len() != m) {
        return Err(PyValueError::new_err("score rows must have equal length"));
    }
    Array2::from_shape_vec((n, m), scores.into_iter().flatten().collect()).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule(name = "templeak")]
fn templeak_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<RunConfig>()?;
    m.add_class::<AuditReport>()?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(run_audit, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_domain_strength, m)?)?;
    m.add_function(wrap_pyfunction!(lrtc, m)?)?;
    m.add_function(wrap_pyfunction!(bh_fdr, m)?)?;
    m.add_function(wrap_pyfunction!(bonferroni, m)?)?;
    m.add_function(wrap_pyfunction!(top_k_pct, m)?)?;
    m.add_function(wrap_pyfunction!(rank_accuracy_pct, m)?)?;
    Ok(())
}
