use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Relative variance below which a series is treated as constant.
const DEGENERATE_REL: f64 = 1e-20;

/// Round lags in seconds to the nearest sample at `fs`.
pub fn acf_lags_samples(lags_s: &[f64], fs: f64) -> Vec<usize> {
    lags_s.iter().map(|l| (l * fs).round() as usize).collect()
}

/// Pearson correlation of two equal-length slices.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Shape(format!("pearson needs equal lengths >= 2, got {} and {}", x.len(), y.len())));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::UndefinedCorrelation("constant input".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// `corr(W(t), W(t + tau))` for each lag, over the overlapping region.
/// All lags are evaluated from a single FFT autocorrelation plus prefix sums.
pub fn acf_envelope(envelope: &[f64], fs: f64, lags_s: &[f64]) -> Result<Vec<f64>> {
    let lags = acf_lags_samples(lags_s, fs);
    let n = envelope.len();
    let max_lag = lags.iter().copied().max().unwrap_or(0);
    if n <= max_lag + 2 {
        return Err(Error::invalid(format!(
            "envelope of {n} samples is too short for a lag of {max_lag} samples"
        )));
    }
    let mean = envelope.iter().sum::<f64>() / n as f64;
    let y: Vec<f64> = envelope.iter().map(|v| v - mean).collect();
    let total_ss: f64 = y.iter().map(|v| v * v).sum();
    let scale_ss = envelope.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    if total_ss <= DEGENERATE_REL * scale_ss || total_ss == 0.0 {
        return Err(Error::UndefinedCorrelation("envelope is constant".into()));
    }

    let mut s1 = vec![0.0; n + 1];
    let mut s2 = vec![0.0; n + 1];
    for (i, v) in y.iter().enumerate() {
        s1[i + 1] = s1[i] + v;
        s2[i + 1] = s2[i] + v * v;
    }

    let fft_len = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::new();
    let mut buf: Vec<Complex64> = y.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(fft_len, Complex64::new(0.0, 0.0));
    planner.plan_fft_forward(fft_len).process(&mut buf);
    for z in &mut buf {
        *z = Complex64::new(z.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(fft_len).process(&mut buf);
    let inv = 1.0 / fft_len as f64;

    lags.iter()
        .map(|&k| {
            if k == 0 {
                return Ok(1.0);
            }
            let m = n - k;
            let mf = m as f64;
            let sx = s1[m];
            let sy = s1[n] - s1[k];
            let sxx = s2[m] - sx * sx / mf;
            let syy = (s2[n] - s2[k]) - sy * sy / mf;
            let sxy = buf[k].re * inv - sx * sy / mf;
            if sxx <= DEGENERATE_REL * scale_ss || syy <= DEGENERATE_REL * scale_ss {
                return Err(Error::UndefinedCorrelation(format!("constant overlap at lag {k}")));
            }
            Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
        })
        .collect()
}
