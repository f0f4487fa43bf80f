//! Butterworth IIR design (bilinear transform of the analog prototype) and
//! zero-phase second-order-section filtering.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// One biquad: `[b0, b1, b2, a1, a2]` with `a0 = 1`.
pub type Biquad = [f64; 5];

#[derive(Debug, Clone, PartialEq)]
pub struct Sos {
    sections: Vec<Biquad>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterShape {
    Lowpass(f64),
    Highpass(f64),
    Bandpass(f64, f64),
}

impl Sos {
    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    /// Butterworth filter of prototype order `order` (must be even).
    /// Band-pass designs therefore have `2 * order` poles.
    pub fn butterworth(order: usize, shape: FilterShape, fs: f64) -> Result<Self> {
        if order == 0 || order % 2 != 0 {
            return Err(Error::invalid(format!("Butterworth order must be even and > 0, got {order}")));
        }
        let nyq = fs / 2.0;
        let check = |f: f64| -> Result<()> {
            if !(f > 0.0 && f < nyq) {
                return Err(Error::AboveNyquist {
                    what: format!("filter edge {f} Hz"),
                    fs,
                });
            }
            Ok(())
        };
        let warp = |f: f64| 2.0 * fs * (PI * f / fs).tan();
        let proto: Vec<Complex64> = (0..order)
            .map(|k| Complex64::from_polar(1.0, PI * (2 * k + order + 1) as f64 / (2 * order) as f64))
            .collect();

        // Analog poles, digital zeros per section, and the reference point where
        // the gain is normalized to one.
        let (poles, zeros, reference): (Vec<Complex64>, [f64; 2], Complex64) = match shape {
            FilterShape::Lowpass(fc) => {
                check(fc)?;
                let w = warp(fc);
                (proto.iter().map(|p| p * w).collect(), [-1.0, -1.0], Complex64::new(1.0, 0.0))
            }
            FilterShape::Highpass(fc) => {
                check(fc)?;
                let w = warp(fc);
                (proto.iter().map(|p| w / p).collect(), [1.0, 1.0], Complex64::new(-1.0, 0.0))
            }
            FilterShape::Bandpass(lo, hi) => {
                check(lo)?;
                check(hi)?;
                if lo >= hi {
                    return Err(Error::invalid(format!("band-pass edges must satisfy lo < hi, got {lo}..{hi}")));
                }
                let (w1, w2) = (warp(lo), warp(hi));
                let w0 = (w1 * w2).sqrt();
                let bw = w2 - w1;
                let mut poles = Vec::with_capacity(2 * order);
                for p in &proto {
                    let a = p * bw / 2.0;
                    let disc = (a * a - w0 * w0).sqrt();
                    poles.push(a + disc);
                    poles.push(a - disc);
                }
                let omega0 = 2.0 * (w0 / (2.0 * fs)).atan();
                (poles, [1.0, -1.0], Complex64::from_polar(1.0, omega0))
            }
        };

        let k2 = 2.0 * fs;
        let mut digital: Vec<Complex64> = poles.iter().map(|s| (k2 + s) / (k2 - s)).collect();
        // One section per conjugate pair; keep the upper-half-plane member.
        digital.retain(|z| z.im > 0.0);
        digital.sort_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap());
        if digital.len() * 2 != poles.len() {
            return Err(Error::Numerical("Butterworth poles did not pair into conjugates".into()));
        }

        let mut sections: Vec<Biquad> = digital
            .iter()
            .map(|z| {
                let b = [1.0, -(zeros[0] + zeros[1]), zeros[0] * zeros[1]];
                [b[0], b[1], b[2], -2.0 * z.re, z.norm_sqr()]
            })
            .collect();
        let mut sos = Sos {
            sections: sections.clone(),
        };
        let g = sos.response(reference).norm();
        if !(g.is_finite() && g > 0.0) {
            return Err(Error::Numerical("degenerate filter gain".into()));
        }
        for v in &mut sections[0][..3] {
            *v /= g;
        }
        sos.sections = sections;
        Ok(sos)
    }

    /// Complex response at `z` on the unit circle.
    pub fn response(&self, z: Complex64) -> Complex64 {
        let zi = z.inv();
        self.sections.iter().fold(Complex64::new(1.0, 0.0), |acc, s| {
            let num = s[0] + s[1] * zi + s[2] * zi * zi;
            let den = 1.0 + s[3] * zi + s[4] * zi * zi;
            acc * num / den
        })
    }

    /// Magnitude response at `f` Hz.
    pub fn gain_at(&self, f: f64, fs: f64) -> f64 {
        self.response(Complex64::from_polar(1.0, 2.0 * PI * f / fs)).norm()
    }

    /// Steady-state initial conditions for a unit step, per section.
    fn step_zi(&self) -> Vec<[f64; 2]> {
        let mut u = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let g = (s[0] + s[1] + s[2]) / (1.0 + s[3] + s[4]);
                let y = g * u;
                let z2 = s[2] * u - s[4] * y;
                let z1 = s[1] * u - s[3] * y + z2;
                u = y;
                [z1, z2]
            })
            .collect()
    }

    fn run(&self, x: &mut [f64], zi: &[[f64; 2]], scale: f64) {
        for (s, z0) in self.sections.iter().zip(zi) {
            let (mut z1, mut z2) = (z0[0] * scale, z0[1] * scale);
            for v in x.iter_mut() {
                let input = *v;
                let y = s[0] * input + z1;
                z1 = s[1] * input - s[3] * y + z2;
                z2 = s[2] * input - s[4] * y;
                *v = y;
            }
        }
    }

    /// Forward-backward filtering with odd-extension padding (zero phase).
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = (3 * (2 * self.sections.len() + 1)).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        for i in (1..=pad).rev() {
            ext.push(2.0 * x[0] - x[i]);
        }
        ext.extend_from_slice(x);
        for i in 1..=pad {
            ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
        }
        let zi = self.step_zi();
        let first = ext[0];
        self.run(&mut ext, &zi, first);
        ext.reverse();
        let first = ext[0];
        self.run(&mut ext, &zi, first);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}
