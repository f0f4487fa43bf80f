use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::MultichannelSeries;
use crate::error::{Error, Result};

/// Frequency of the slow sinusoidal modulation applied to the line-noise amplitude.
const LINE_DRIFT_HZ: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SurrogateKind {
    White,
    Ar1 { phi: f64 },
    #[serde(rename = "powerlaw")]
    PowerLaw { beta: f64 },
    /// Weighted sum of a white and a power-law component (each unit variance).
    Composite { white: f64, powerlaw: f64, beta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineNoise {
    pub f0: f64,
    pub amplitude: f64,
    /// Relative depth of the 0.01 Hz amplitude modulation.
    pub amplitude_drift_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSpec {
    pub kind: SurrogateKind,
    pub duration_s: f64,
    pub fs: f64,
    pub channels: usize,
    #[serde(default)]
    pub channel_mixing: f64,
    #[serde(default)]
    pub line_noise: Option<LineNoise>,
    #[serde(default)]
    pub seed: u64,
}

impl SurrogateSpec {
    pub fn white(duration_s: f64, fs: f64, channels: usize, seed: u64) -> Self {
        Self {
            kind: SurrogateKind::White,
            duration_s,
            fs,
            channels,
            channel_mixing: 0.0,
            line_noise: None,
            seed,
        }
    }

    pub fn with_kind(mut self, kind: SurrogateKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_mixing(mut self, m: f64) -> Self {
        self.channel_mixing = m;
        self
    }

    pub fn with_line_noise(mut self, line: LineNoise) -> Self {
        self.line_noise = Some(line);
        self
    }

    /// Number of timepoints, or an error if `duration_s * fs` is not an integer >= 2.
    pub fn timepoints(&self) -> Result<usize> {
        let n = self.duration_s * self.fs;
        if !n.is_finite() || (n - n.round()).abs() > 1e-6 || n.round() < 2.0 {
            return Err(Error::invalid(format!(
                "duration_s * fs must be an integer >= 2 (got {} * {} = {n})",
                self.duration_s, self.fs
            )));
        }
        Ok(n.round() as usize)
    }

    pub fn validate(&self) -> Result<usize> {
        if !(self.fs.is_finite() && self.fs > 0.0) {
            return Err(Error::invalid(format!("fs must be positive, got {}", self.fs)));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(Error::invalid(format!(
                "duration_s must be positive, got {}",
                self.duration_s
            )));
        }
        if self.channels == 0 {
            return Err(Error::invalid("channels must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.channel_mixing) {
            return Err(Error::invalid(format!(
                "channel_mixing must lie in [0, 1], got {}",
                self.channel_mixing
            )));
        }
        match self.kind {
            SurrogateKind::White => {}
            SurrogateKind::Ar1 { phi } => {
                if !(phi.abs() < 1.0) {
                    return Err(Error::invalid(format!("AR(1) coefficient needs |phi| < 1, got {phi}")));
                }
            }
            SurrogateKind::PowerLaw { beta } => check_beta(beta)?,
            SurrogateKind::Composite { white, powerlaw, beta } => {
                check_beta(beta)?;
                if !(white >= 0.0 && powerlaw >= 0.0 && white.is_finite() && powerlaw.is_finite()) {
                    return Err(Error::invalid("composite weights must be finite and >= 0"));
                }
            }
        }
        if let Some(line) = &self.line_noise {
            if !(line.f0 > 0.0 && line.f0 < self.fs / 2.0) {
                return Err(Error::AboveNyquist {
                    what: format!("line noise at {} Hz", line.f0),
                    fs: self.fs,
                });
            }
            if !(line.amplitude.is_finite() && line.amplitude_drift_scale.is_finite()) {
                return Err(Error::invalid("line noise parameters must be finite"));
            }
        }
        self.timepoints()
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::invalid(format!("power-law exponent needs beta >= 0, got {beta}")));
    }
    Ok(())
}

/// Synthesize a phantom recording. Output values are rounded to `f32`
/// precision so that recordings round-trip through the float32 raw format.
pub fn synth(spec: &SurrogateSpec) -> Result<MultichannelSeries> {
    let n = spec.validate()?;
    let m = spec.channel_mixing;
    let (w_ind, w_shared) = ((1.0 - m).sqrt(), m.sqrt());

    // Stream 0 is the shared component, stream c + 1 is channel c, the last
    // stream drives line-noise phases.
    let stream_rng = |stream: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(stream);
        rng
    };

    let mut planner = FftPlanner::<f64>::new();
    let mut component = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        match spec.kind {
            SurrogateKind::White => white(rng, n),
            SurrogateKind::Ar1 { phi } => ar1(rng, n, phi),
            SurrogateKind::PowerLaw { beta } => powerlaw(rng, n, spec.fs, beta, &mut planner),
            SurrogateKind::Composite { white: ww, powerlaw: wp, beta } => {
                let w = white(rng, n);
                let p = powerlaw(rng, n, spec.fs, beta, &mut planner);
                w.iter().zip(&p).map(|(a, b)| ww * a + wp * b).collect()
            }
        }
    };

    let shared = if w_shared > 0.0 {
        Some(component(&mut stream_rng(0)))
    } else {
        None
    };

    let mut data = Array2::<f64>::zeros((spec.channels, n));
    for c in 0..spec.channels {
        let own = component(&mut stream_rng(c as u64 + 1));
        let mut row = data.row_mut(c);
        match &shared {
            Some(sh) => {
                for ((dst, a), b) in row.iter_mut().zip(&own).zip(sh) {
                    *dst = w_ind * a + w_shared * b;
                }
            }
            None => {
                for (dst, a) in row.iter_mut().zip(&own) {
                    *dst = *a;
                }
            }
        }
    }

    if let Some(line) = &spec.line_noise {
        let mut rng = stream_rng(spec.channels as u64 + 1);
        let carrier_phase = rng.random::<f64>() * 2.0 * PI;
        let drift_phase = rng.random::<f64>() * 2.0 * PI;
        for t in 0..n {
            let time = t as f64 / spec.fs;
            let amp = line.amplitude
                * (1.0 + line.amplitude_drift_scale * (2.0 * PI * LINE_DRIFT_HZ * time + drift_phase).sin());
            let v = amp * (2.0 * PI * line.f0 * time + carrier_phase).sin();
            for c in 0..spec.channels {
                data[[c, t]] += v;
            }
        }
    }

    data.mapv_inplace(|v| v as f32 as f64);
    MultichannelSeries::new(data, spec.fs, describe(spec))
}

fn describe(spec: &SurrogateSpec) -> String {
    let kind = match spec.kind {
        SurrogateKind::White => "white".to_string(),
        SurrogateKind::Ar1 { phi } => format!("ar1(phi={phi})"),
        SurrogateKind::PowerLaw { beta } => format!("powerlaw(beta={beta})"),
        SurrogateKind::Composite { white, powerlaw, beta } => {
            format!("composite(white={white},powerlaw={powerlaw},beta={beta})")
        }
    };
    format!("synth:{kind}:seed={}", spec.seed)
}

fn white(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Stationary unit-variance AR(1): innovations have variance 1 - phi^2.
fn ar1(rng: &mut ChaCha8Rng, n: usize, phi: f64) -> Vec<f64> {
    let innov_sd = (1.0 - phi * phi).sqrt();
    let mut out = Vec::with_capacity(n);
    let mut x: f64 = rng.sample(StandardNormal);
    out.push(x);
    for _ in 1..n {
        let e: f64 = rng.sample(StandardNormal);
        x = phi * x + innov_sd * e;
        out.push(x);
    }
    out
}

/// Spectral synthesis: amplitude f^(-beta/2), uniform random phases, DC zeroed,
/// normalized to unit variance.
fn powerlaw(rng: &mut ChaCha8Rng, n: usize, fs: f64, beta: f64, planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let mut spectrum = vec![Complex64::new(0.0, 0.0); n];
    let half = n / 2;
    for k in 1..=half {
        let f = k as f64 * fs / n as f64;
        let amp = f.powf(-beta / 2.0);
        let phase = rng.random::<f64>() * 2.0 * PI;
        if n % 2 == 0 && k == half {
            // Nyquist bin must be real.
            spectrum[k] = Complex64::new(amp * phase.cos(), 0.0);
        } else {
            let z = Complex64::from_polar(amp, phase);
            spectrum[k] = z;
            spectrum[n - k] = z.conj();
        }
    }
    planner.plan_fft_inverse(n).process(&mut spectrum);
    let mut out: Vec<f64> = spectrum.iter().map(|z| z.re).collect();
    let mean = out.iter().sum::<f64>() / n as f64;
    let var = out.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
    for v in &mut out {
        *v = (*v - mean) / sd;
    }
    out
}
