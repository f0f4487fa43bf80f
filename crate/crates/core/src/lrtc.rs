//! Long-range temporal correlation map: autocorrelation of wavelet amplitude
//! envelopes over a frequency x lag grid, with per-cell significance.

use std::fs;
use std::path::Path;

use log::info;
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::{acf_envelope, acf_lags_samples, resample, MorletBank, WaveletSpec};
use crate::error::{Error, Result};
use crate::signal::MultichannelSeries;
use crate::stats::{bh_fdr, one_sample_ttest, Alternative};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LrtcConfig {
    pub wavelet: WaveletSpec,
    /// Equal-length segments a continuous recording is cut into.
    pub n_segments: usize,
    /// FDR level and mask threshold.
    pub alpha: f64,
    /// Surrogate length when synthesizing inputs; defaults to the shortest
    /// length that satisfies the segment rule with a small margin.
    pub duration_s: Option<f64>,
}

impl Default for LrtcConfig {
    fn default() -> Self {
        Self {
            wavelet: WaveletSpec::default(),
            n_segments: 5,
            alpha: 0.01,
            duration_s: None,
        }
    }
}

impl LrtcConfig {
    pub fn surrogate_duration(&self) -> f64 {
        self.duration_s
            .unwrap_or_else(|| (self.n_segments as f64 * (2.0 * self.wavelet.max_lag_s() + 10.0)).ceil())
    }
}

/// One subject's data: a continuous recording or pre-cut trials.
#[derive(Debug, Clone)]
pub enum LrtcInput {
    Continuous(MultichannelSeries),
    Trials(Vec<MultichannelSeries>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcfMatrix {
    /// `freqs x lags`, mean over units.
    pub values: Array2<f64>,
    pub freqs: Vec<f64>,
    /// Lags as realized at the analysis rate, deduplicated.
    pub lags_s: Vec<f64>,
    pub n_units: usize,
    /// BH-adjusted one-sided p-values.
    pub p_values: Array2<f64>,
    pub reject: Array2<bool>,
    /// Cells whose unit values had zero variance (p set to 1).
    pub degenerate: Array2<bool>,
}

/// Realized lags after nearest-sample rounding at `fs`, duplicates dropped.
pub fn realized_lags(lags_s: &[f64], fs: f64) -> Vec<f64> {
    let mut samples = acf_lags_samples(lags_s, fs);
    let before = samples.len();
    samples.dedup();
    if samples.len() < before {
        info!(
            "{} lag(s) collapsed onto the same sample at {fs} Hz and were dropped",
            before - samples.len()
        );
    }
    samples.into_iter().map(|s| s as f64 / fs).collect()
}

fn segments(input: &LrtcInput, spec: &WaveletSpec, n_segments: usize) -> Result<Vec<MultichannelSeries>> {
    let fs = spec.analysis_fs;
    let parts: Vec<MultichannelSeries> = match input {
        LrtcInput::Continuous(series) => {
            if n_segments == 0 {
                return Err(Error::invalid("n_segments must be at least 1"));
            }
            let s = resample(series, fs)?;
            let len = s.timepoints() / n_segments;
            (0..n_segments)
                .map(|i| s.slice_time(i * len, (i + 1) * len))
                .collect::<Result<_>>()?
        }
        LrtcInput::Trials(trials) => trials.iter().map(|t| resample(t, fs)).collect::<Result<_>>()?,
    };
    let max_lag = spec.max_lag_s();
    for p in &parts {
        let seg = p.timepoints() as f64 / fs;
        if seg < 2.0 * max_lag {
            return Err(Error::SegmentTooShort {
                segment_s: seg,
                usable_max_lag_s: seg / 2.0,
            });
        }
    }
    Ok(parts)
}

/// Segment-averaged `freqs x lags` ACF of one channel.
fn unit_matrix(segs: &[MultichannelSeries], channel: usize, spec: &WaveletSpec, lags_s: &[f64]) -> Result<Array2<f64>> {
    let fs = spec.analysis_fs;
    let min_f = spec.freqs.iter().copied().fold(f64::INFINITY, f64::min);
    let mut acc = Array2::<f64>::zeros((spec.freqs.len(), lags_s.len()));
    for seg in segs {
        let x = seg.channel(channel).to_vec();
        let bank = MorletBank::new(&x, fs, spec.n_cycles, min_f)?;
        for (i, &f) in spec.freqs.iter().enumerate() {
            let env = bank.envelope(f)?;
            let acf = acf_envelope(env.interior(), fs, lags_s)?;
            for (slot, v) in acc.row_mut(i).iter_mut().zip(acf) {
                *slot += v;
            }
        }
    }
    Ok(acc / segs.len() as f64)
}

/// Per-unit ACF matrices, one per (subject, channel), in subject-major order.
pub fn unit_matrices(inputs: &[LrtcInput], cfg: &LrtcConfig) -> Result<(Vec<Array2<f64>>, Vec<f64>)> {
    let spec = &cfg.wavelet;
    spec.validate()?;
    let lags = realized_lags(&spec.lags_s, spec.analysis_fs);
    let segs: Vec<Vec<MultichannelSeries>> = inputs
        .iter()
        .map(|i| segments(i, spec, cfg.n_segments))
        .collect::<Result<_>>()?;
    let mut jobs = Vec::new();
    for (s, parts) in segs.iter().enumerate() {
        let channels = parts.first().map_or(0, |p| p.channels());
        if parts.iter().any(|p| p.channels() != channels) {
            return Err(Error::Shape(format!("subject {s} has trials with differing channel counts")));
        }
        jobs.extend((0..channels).map(|c| (s, c)));
    }
    let units = jobs
        .par_iter()
        .map(|&(s, c)| unit_matrix(&segs[s], c, spec, &lags))
        .collect::<Result<Vec<_>>>()?;
    Ok((units, lags))
}

/// Unweighted mean of unit matrices, accumulated in unit order.
pub fn grand_mean(units: &[Array2<f64>]) -> Result<Array2<f64>> {
    let first = units.first().ok_or_else(|| Error::invalid("no units to average"))?;
    let mut acc = Array2::<f64>::zeros(first.raw_dim());
    for u in units {
        if u.raw_dim() != first.raw_dim() {
            return Err(Error::Shape("unit matrices differ in shape".into()));
        }
        acc += u;
    }
    Ok(acc / units.len() as f64)
}

/// One-sided t-test of each cell's unit values against zero, then BH-FDR
/// across all cells. Returns adjusted p-values, the rejection mask at
/// `alpha`, and the cells whose variance was degenerate.
pub fn lrtc_significance(units: &[Array2<f64>], alpha: f64) -> Result<(Array2<f64>, Array2<bool>, Array2<bool>)> {
    if units.len() < 2 {
        return Err(Error::invalid(format!("significance needs at least 2 units, got {}", units.len())));
    }
    let dim = units[0].raw_dim();
    let mut raw = Array2::<f64>::ones(dim);
    let mut degenerate = Array2::from_elem(dim, false);
    let mut cell = vec![0.0; units.len()];
    for ((i, j), p) in raw.indexed_iter_mut() {
        for (v, u) in cell.iter_mut().zip(units) {
            *v = u[[i, j]];
        }
        match one_sample_ttest(&cell, 0.0, Alternative::Greater) {
            Ok(t) => *p = t.p,
            Err(Error::ZeroVariance(_)) => degenerate[[i, j]] = true,
            Err(e) => return Err(e),
        }
    }
    let flat: Vec<f64> = raw.iter().copied().collect();
    let (adj, rej) = bh_fdr(&flat, alpha)?;
    Ok((
        Array2::from_shape_vec(dim, adj).expect("same shape"),
        Array2::from_shape_vec(dim, rej).expect("same shape"),
        degenerate,
    ))
}

/// Full analysis: per-unit matrices, their grand mean and its significance.
pub fn lrtc_map(inputs: &[LrtcInput], cfg: &LrtcConfig) -> Result<AcfMatrix> {
    let (units, lags_s) = unit_matrices(inputs, cfg)?;
    let values = grand_mean(&units)?;
    let (p_values, reject, degenerate) = lrtc_significance(&units, cfg.alpha)?;
    Ok(AcfMatrix {
        values,
        freqs: cfg.wavelet.freqs.clone(),
        lags_s,
        n_units: units.len(),
        p_values,
        reject,
        degenerate,
    })
}

#[derive(Serialize)]
struct Sidecar<'a> {
    freqs: &'a [f64],
    lags_s: &'a [f64],
    n_units: usize,
    alpha: f64,
    n_significant: usize,
    n_degenerate: usize,
    values: &'a str,
    p_values: &'a str,
}

fn write_matrix(path: &Path, m: &Array2<f64>, lags_s: &[f64], freqs: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["freq_hz".to_string()];
    header.extend(lags_s.iter().map(|l| l.to_string()));
    w.write_record(&header)?;
    for (f, row) in freqs.iter().zip(m.outer_iter()) {
        let mut rec = vec![f.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `acf_values.csv`, `acf_pvalues.csv` (rows = frequencies, columns =
/// lags) and `acf.json` into `dir`.
pub fn write_acf(dir: &Path, m: &AcfMatrix, alpha: f64) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_matrix(&dir.join("acf_values.csv"), &m.values, &m.lags_s, &m.freqs)?;
    write_matrix(&dir.join("acf_pvalues.csv"), &m.p_values, &m.lags_s, &m.freqs)?;
    let side = Sidecar {
        freqs: &m.freqs,
        lags_s: &m.lags_s,
        n_units: m.n_units,
        alpha,
        n_significant: m.reject.iter().filter(|r| **r).count(),
        n_degenerate: m.degenerate.iter().filter(|r| **r).count(),
        values: "acf_values.csv",
        p_values: "acf_pvalues.csv",
    };
    let path = dir.join("acf.json");
    fs::write(&path, serde_json::to_vec_pretty(&side)?).map_err(|e| Error::io(&path, e))
}

/// Reads a matrix CSV written by [`write_acf`]: `(freqs, lags_s, values)`.
pub fn read_matrix(path: &Path) -> Result<(Vec<f64>, Vec<f64>, Array2<f64>)> {
    let mut r = csv::Reader::from_path(path)?;
    let parse = |s: &str| s.parse::<f64>().map_err(|e| Error::invalid(format!("{}: {e}", path.display())));
    let lags = r.headers()?.iter().skip(1).map(parse).collect::<Result<Vec<_>>>()?;
    let mut freqs = Vec::new();
    let mut vals = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let mut it = rec.iter();
        freqs.push(parse(it.next().unwrap_or(""))?);
        for v in it {
            vals.push(parse(v)?);
        }
    }
    let m = Array2::from_shape_vec((freqs.len(), lags.len()), vals).map_err(|e| Error::Shape(e.to_string()))?;
    Ok((freqs, lags, m))
}
