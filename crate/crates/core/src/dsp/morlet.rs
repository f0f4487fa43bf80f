use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gaussian window truncation, in standard deviations.
const TRUNCATION_SD: f64 = 4.0;

/// Analysis grid for envelope autocorrelation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WaveletSpec {
    pub freqs: Vec<f64>,
    pub n_cycles: f64,
    pub lags_s: Vec<f64>,
    pub analysis_fs: f64,
}

impl Default for WaveletSpec {
    fn default() -> Self {
        Self {
            freqs: linspace(1.0, 95.0, 95),
            n_cycles: 7.0,
            lags_s: logspace(0.5, 500.0, 200),
            analysis_fs: 200.0,
        }
    }
}

pub(crate) fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

pub(crate) fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    linspace(lo.ln(), hi.ln(), n).into_iter().map(f64::exp).collect()
}

impl WaveletSpec {
    pub fn new(freqs: Vec<f64>, n_cycles: f64, lags_s: Vec<f64>, analysis_fs: f64) -> Result<Self> {
        let spec = Self {
            freqs,
            n_cycles,
            lags_s,
            analysis_fs,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_linear_freqs(mut self, lo: f64, hi: f64, n: usize) -> Self {
        self.freqs = linspace(lo, hi, n);
        self
    }

    pub fn with_log_lags(mut self, lo: f64, hi: f64, n: usize) -> Self {
        self.lags_s = logspace(lo, hi, n);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.analysis_fs > 0.0) {
            return Err(Error::invalid("analysis_fs must be positive"));
        }
        if self.freqs.is_empty() || self.lags_s.is_empty() {
            return Err(Error::invalid("wavelet spec needs at least one frequency and one lag"));
        }
        if let Some(f) = self.freqs.iter().find(|&&f| !(f > 0.0 && f < self.analysis_fs / 2.0)) {
            return Err(Error::AboveNyquist {
                what: format!("analysis frequency {f} Hz"),
                fs: self.analysis_fs,
            });
        }
        if !(self.n_cycles >= 3.0) {
            return Err(Error::invalid(format!("n_cycles must be >= 3, got {}", self.n_cycles)));
        }
        if self.lags_s.iter().any(|l| !(*l >= 0.0)) || self.lags_s.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("lags must be non-negative and sorted ascending"));
        }
        Ok(())
    }

    pub fn max_lag_s(&self) -> f64 {
        self.lags_s.last().copied().unwrap_or(0.0)
    }
}

/// Amplitude envelope; `edge` samples at each end are contaminated by the
/// convolution boundary and excluded from downstream statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub values: Vec<f64>,
    pub edge: usize,
}

impl Envelope {
    pub fn interior(&self) -> &[f64] {
        &self.values[self.edge..self.values.len() - self.edge]
    }
}

/// Half-length in samples of the truncated wavelet at `f`.
pub fn half_length(f: f64, n_cycles: f64, fs: f64) -> usize {
    let sigma_t = n_cycles / (2.0 * PI * f);
    (TRUNCATION_SD * sigma_t * fs).ceil() as usize
}

fn kernel(f: f64, n_cycles: f64, fs: f64) -> Vec<Complex64> {
    let sigma_t = n_cycles / (2.0 * PI * f);
    let h = half_length(f, n_cycles, fs) as isize;
    let gauss: Vec<f64> = (-h..=h)
        .map(|j| {
            let t = j as f64 / fs;
            (-t * t / (2.0 * sigma_t * sigma_t)).exp()
        })
        .collect();
    // Scaled so that a unit-amplitude sinusoid at f has envelope 1.
    let norm = 2.0 / gauss.iter().sum::<f64>();
    (-h..=h)
        .zip(gauss)
        .map(|(j, g)| Complex64::from_polar(g * norm, 2.0 * PI * f * j as f64 / fs))
        .collect()
}

/// Reusable transform of one signal at many frequencies.
pub struct MorletBank {
    fs: f64,
    n_cycles: f64,
    len: usize,
    fft_len: usize,
    spectrum: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl MorletBank {
    /// Prepare `x` for envelopes at frequencies no lower than `min_freq`.
    pub fn new(x: &[f64], fs: f64, n_cycles: f64, min_freq: f64) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::invalid("empty signal"));
        }
        if !(n_cycles > 0.0) || !(min_freq > 0.0) {
            return Err(Error::invalid("n_cycles and frequencies must be positive"));
        }
        let h = half_length(min_freq, n_cycles, fs);
        let fft_len = (x.len() + 2 * h + 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(fft_len);
        let inverse = planner.plan_fft_inverse(fft_len);
        let mut spectrum: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        spectrum.resize(fft_len, Complex64::new(0.0, 0.0));
        forward.process(&mut spectrum);
        Ok(Self {
            fs,
            n_cycles,
            len: x.len(),
            fft_len,
            spectrum,
            forward,
            inverse,
        })
    }

    pub fn envelope(&self, f: f64) -> Result<Envelope> {
        if !(f > 0.0 && f < self.fs / 2.0) {
            return Err(Error::AboveNyquist {
                what: format!("wavelet frequency {f} Hz"),
                fs: self.fs,
            });
        }
        let k = kernel(f, self.n_cycles, self.fs);
        let h = (k.len() - 1) / 2;
        if self.len + 2 * h + 1 > self.fft_len {
            return Err(Error::invalid(format!(
                "frequency {f} Hz is below the bank's minimum frequency"
            )));
        }
        if 2 * h >= self.len {
            return Err(Error::invalid(format!(
                "signal of {} samples is too short for a {f} Hz wavelet ({} samples)",
                self.len,
                k.len()
            )));
        }
        let mut buf = k;
        buf.resize(self.fft_len, Complex64::new(0.0, 0.0));
        self.forward.process(&mut buf);
        for (b, s) in buf.iter_mut().zip(&self.spectrum) {
            *b *= s;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.fft_len as f64;
        let values = buf[h..h + self.len].iter().map(|z| z.norm() * scale).collect();
        Ok(Envelope { values, edge: h })
    }
}

/// Magnitude of the convolution of `x` with a complex Morlet wavelet at `f`
/// (Gaussian width `n_cycles / (2 pi f)` seconds).
pub fn morlet_envelope(x: &[f64], fs: f64, f: f64, n_cycles: f64) -> Result<Envelope> {
    if !(f > 0.0 && f < fs / 2.0) {
        return Err(Error::AboveNyquist {
            what: format!("wavelet frequency {f} Hz"),
            fs,
        });
    }
    MorletBank::new(x, fs, n_cycles, f)?.envelope(f)
}
