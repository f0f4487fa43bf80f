use std::f64::consts::PI;
use std::ops::Range;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::MultichannelSeries;
use crate::error::{Error, Result};

/// Half-open sample range `[start, end)` inside a series.
pub type TimeWindow = Range<usize>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Narrowband {
    pub freq: f64,
    pub amplitude: f64,
    pub phase: f64,
}

/// The latent per-domain factor, made explicit: a gain profile, a slow offset
/// profile and a narrowband oscillation, all scaled by `strength`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSignature {
    pub domain_id: usize,
    pub gain: Vec<f64>,
    pub offset: Vec<f64>,
    pub narrowband: Narrowband,
    pub strength: f64,
}

/// Distribution from which random domain signatures are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SignatureProfile {
    pub gain_sd: f64,
    pub offset_sd: f64,
    pub narrowband_amplitude: f64,
    pub freq_lo: f64,
    pub freq_hi: f64,
}

impl Default for SignatureProfile {
    fn default() -> Self {
        Self {
            gain_sd: 0.3,
            offset_sd: 0.5,
            narrowband_amplitude: 0.5,
            freq_lo: 4.0,
            freq_hi: 40.0,
        }
    }
}

impl DomainSignature {
    pub fn identity(domain_id: usize, channels: usize) -> Self {
        Self {
            domain_id,
            gain: vec![0.0; channels],
            offset: vec![0.0; channels],
            narrowband: Narrowband {
                freq: 10.0,
                amplitude: 0.0,
                phase: 0.0,
            },
            strength: 0.0,
        }
    }

    pub fn draw<R: Rng + ?Sized>(
        domain_id: usize,
        channels: usize,
        profile: &SignatureProfile,
        strength: f64,
        rng: &mut R,
    ) -> Self {
        let gain = (0..channels)
            .map(|_| profile.gain_sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let offset = (0..channels)
            .map(|_| profile.offset_sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let freq = profile.freq_lo + (profile.freq_hi - profile.freq_lo) * rng.random::<f64>();
        let phase = 2.0 * PI * rng.random::<f64>();
        Self {
            domain_id,
            gain,
            offset,
            narrowband: Narrowband {
                freq,
                amplitude: profile.narrowband_amplitude,
                phase,
            },
            strength,
        }
    }

    pub fn with_strength(mut self, strength: f64) -> Self {
        self.strength = strength;
        self
    }
}

/// Within window `d`: `x * (1 + s*gain) + s*offset + s*narrowband(t)`; samples
/// outside every window are copied untouched.
pub fn inject_domain_signatures(
    series: &MultichannelSeries,
    windows: &[TimeWindow],
    signatures: &[DomainSignature],
) -> Result<MultichannelSeries> {
    if windows.len() != signatures.len() {
        return Err(Error::invalid(format!(
            "{} windows but {} signatures",
            windows.len(),
            signatures.len()
        )));
    }
    let channels = series.channels();
    let n = series.timepoints();
    let mut order: Vec<usize> = (0..windows.len()).collect();
    order.sort_by_key(|&i| windows[i].start);
    for pair in order.windows(2) {
        let (a, b) = (&windows[pair[0]], &windows[pair[1]]);
        if a.end > b.start {
            return Err(Error::invalid(format!("windows {a:?} and {b:?} overlap")));
        }
    }
    for (w, sig) in windows.iter().zip(signatures) {
        if w.start >= w.end || w.end > n {
            return Err(Error::invalid(format!("window {w:?} outside series of {n} timepoints")));
        }
        if sig.gain.len() != channels || sig.offset.len() != channels {
            return Err(Error::Shape(format!(
                "signature for domain {} has {} gains / {} offsets for {channels} channels",
                sig.domain_id,
                sig.gain.len(),
                sig.offset.len()
            )));
        }
        if !(0.0..=1.0).contains(&sig.strength) {
            return Err(Error::invalid(format!("strength must lie in [0, 1], got {}", sig.strength)));
        }
    }

    let fs = series.fs();
    let mut data = series.data().clone();
    for (w, sig) in windows.iter().zip(signatures) {
        let s = sig.strength;
        if s == 0.0 {
            continue;
        }
        let nb = sig.narrowband;
        let tone: Vec<f64> = (w.start..w.end)
            .map(|t| s * nb.amplitude * (2.0 * PI * nb.freq * t as f64 / fs + nb.phase).sin())
            .collect();
        for c in 0..channels {
            let scale = 1.0 + s * sig.gain[c];
            let shift = s * sig.offset[c];
            let mut row = data.row_mut(c);
            for (t, v) in (w.start..w.end).zip(&tone) {
                row[t] = row[t] * scale + shift + v;
            }
        }
    }
    series.with_data(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{synth, SurrogateSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn goertzel_power(x: &[f64], f: f64, fs: f64) -> f64 {
        let w = 2.0 * PI * f / fs;
        let (mut re, mut im) = (0.0, 0.0);
        for (t, v) in x.iter().enumerate() {
            re += v * (w * t as f64).cos();
            im -= v * (w * t as f64).sin();
        }
        (re * re + im * im) / (x.len() as f64).powi(2)
    }

    fn base() -> MultichannelSeries {
        synth(&SurrogateSpec::white(20.0, 200.0, 3, 1)).unwrap()
    }

    #[test]
    fn zero_strength_is_bit_identical() {
        let s = base();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let sigs: Vec<_> = (0..2)
            .map(|d| DomainSignature::draw(d, 3, &SignatureProfile::default(), 0.0, &mut rng))
            .collect();
        let out = inject_domain_signatures(&s, &[0..1000, 1500..3000], &sigs).unwrap();
        assert_eq!(out.data(), s.data());
    }

    #[test]
    fn narrowband_raises_in_window_power() {
        let s = base();
        let mut sig = DomainSignature::identity(0, 3).with_strength(1.0);
        sig.narrowband = Narrowband {
            freq: 23.0,
            amplitude: 1.0,
            phase: 0.3,
        };
        let out = inject_domain_signatures(&s, &[1000..2000], &[sig]).unwrap();
        let x = out.channel(0).to_vec();
        let inside = goertzel_power(&x[1000..2000], 23.0, 200.0);
        let outside = goertzel_power(&x[2500..3500], 23.0, 200.0);
        assert!(inside > 3.0 * outside, "inside {inside} outside {outside}");
    }

    #[test]
    fn distinct_gains_give_distinct_rms_profiles() {
        let s = base();
        let mut a = DomainSignature::identity(0, 3).with_strength(1.0);
        a.gain = vec![2.0, 0.0, -0.5];
        let mut b = DomainSignature::identity(1, 3).with_strength(1.0);
        b.gain = vec![-0.5, 0.0, 2.0];
        let out = inject_domain_signatures(&s, &[0..1000, 2000..3000], &[a, b]).unwrap();
        let rms = |w: Range<usize>| -> Vec<f64> {
            (0..3)
                .map(|c| {
                    let row = out.channel(c);
                    (w.clone().map(|t| row[t] * row[t]).sum::<f64>() / w.len() as f64).sqrt()
                })
                .collect()
        };
        let (p, q) = (rms(0..1000), rms(2000..3000));
        let dot: f64 = p.iter().zip(&q).map(|(x, y)| x * y).sum();
        let cos = dot / (p.iter().map(|v| v * v).sum::<f64>().sqrt() * q.iter().map(|v| v * v).sum::<f64>().sqrt());
        assert!(cos < 0.99, "cosine {cos}");
    }

    #[test]
    fn samples_outside_windows_unchanged() {
        let s = base();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sigs: Vec<_> = (0..2)
            .map(|d| DomainSignature::draw(d, 3, &SignatureProfile::default(), 1.0, &mut rng))
            .collect();
        let out = inject_domain_signatures(&s, &[100..900, 1200..2000], &sigs).unwrap();
        for c in 0..3 {
            for t in (0..100).chain(900..1200).chain(2000..4000) {
                assert_eq!(out.data()[[c, t]].to_bits(), s.data()[[c, t]].to_bits());
            }
        }
    }

    #[test]
    fn overlapping_or_mismatched_windows_fail() {
        let s = base();
        let sig = DomainSignature::identity(0, 3);
        assert!(inject_domain_signatures(&s, &[0..100, 50..200], &[sig.clone(), sig.clone()]).is_err());
        assert!(inject_domain_signatures(&s, &[0..100], &[sig.clone(), sig]).is_err());
    }
}
