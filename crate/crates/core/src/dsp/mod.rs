//! Filtering, resampling, Morlet amplitude envelopes and envelope
//! autocorrelation.

mod acf;
mod filter;
mod morlet;

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::MultichannelSeries;

pub use acf::{acf_envelope, acf_lags_samples, pearson};
pub use filter::{Biquad, FilterShape, Sos};
pub use morlet::{half_length, morlet_envelope, Envelope, MorletBank, WaveletSpec};

/// Butterworth prototype order used for all band and anti-alias filters.
pub const FILTER_ORDER: usize = 4;

/// Anti-alias low-pass order and corner as a fraction of the new rate.
/// Content below `0.4 * new_fs` keeps at least 98% of its amplitude through
/// the forward-backward pass while Nyquist is attenuated about 15-fold.
pub const ANTI_ALIAS_ORDER: usize = 16;
pub const ANTI_ALIAS_CORNER: f64 = 0.46;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    Full,
    Delta,
    Theta,
    Alpha,
    Beta,
    LowGamma,
    HighGamma,
}

impl Band {
    pub const ALL: [Band; 7] = [
        Band::Full,
        Band::Delta,
        Band::Theta,
        Band::Alpha,
        Band::Beta,
        Band::LowGamma,
        Band::HighGamma,
    ];

    /// `(lo, hi)` in Hz; `None` for the unfiltered full band.
    pub fn edges(self) -> Option<(f64, f64)> {
        match self {
            Band::Full => None,
            Band::Delta => Some((0.0, 4.0)),
            Band::Theta => Some((4.0, 8.0)),
            Band::Alpha => Some((8.0, 12.0)),
            Band::Beta => Some((12.0, 32.0)),
            Band::LowGamma => Some((32.0, 45.0)),
            Band::HighGamma => Some((55.0, 95.0)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Band::Full => "full",
            Band::Delta => "delta",
            Band::Theta => "theta",
            Band::Alpha => "alpha",
            Band::Beta => "beta",
            Band::LowGamma => "low_gamma",
            Band::HighGamma => "high_gamma",
        }
    }

    /// Table row label ("Low gamma").
    pub fn label(self) -> &'static str {
        match self {
            Band::Full => "Full",
            Band::Delta => "Delta",
            Band::Theta => "Theta",
            Band::Alpha => "Alpha",
            Band::Beta => "Beta",
            Band::LowGamma => "Low gamma",
            Band::HighGamma => "High gamma",
        }
    }

    /// Whether the band can be analysed at sampling rate `fs`.
    pub fn available_at(self, fs: f64) -> bool {
        self.edges().map_or(true, |(_, hi)| hi < fs / 2.0)
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Band {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
        Band::ALL
            .into_iter()
            .find(|b| b.name() == norm)
            .ok_or_else(|| Error::Config(format!("unknown band {s:?}")))
    }
}

fn map_channels(series: &MultichannelSeries, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Array2<f64>> {
    let rows: Vec<Vec<f64>> = series
        .data()
        .rows()
        .into_iter()
        .map(|r| f(r.as_slice().expect("standard layout")))
        .collect();
    let width = rows[0].len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((series.channels(), width), flat).map_err(|e| Error::Shape(e.to_string()))
}

/// Zero-phase Butterworth band filter. `Full` is the identity; a band with a
/// 0 Hz lower edge is a low-pass.
pub fn bandpass(series: &MultichannelSeries, band: Band) -> Result<MultichannelSeries> {
    let Some((lo, hi)) = band.edges() else {
        return Ok(series.clone());
    };
    let fs = series.fs();
    if hi >= fs / 2.0 {
        return Err(Error::AboveNyquist {
            what: format!("band {band} ({lo}-{hi} Hz)"),
            fs,
        });
    }
    let shape = if lo == 0.0 {
        FilterShape::Lowpass(hi)
    } else {
        FilterShape::Bandpass(lo, hi)
    };
    let sos = Sos::butterworth(FILTER_ORDER, shape, fs)?;
    let data = map_channels(series, |x| sos.filtfilt(x))?;
    series.with_data(data)
}

/// Anti-aliased downsampling: zero-phase low-pass flat up to `0.4 * new_fs`, then
/// linear interpolation onto the new grid of `round(T * new_fs / fs)` points.
pub fn resample(series: &MultichannelSeries, new_fs: f64) -> Result<MultichannelSeries> {
    let fs = series.fs();
    if !(new_fs.is_finite() && new_fs > 0.0) {
        return Err(Error::invalid(format!("target rate must be positive, got {new_fs}")));
    }
    if new_fs > fs {
        return Err(Error::invalid(format!("upsampling from {fs} Hz to {new_fs} Hz is not supported")));
    }
    if new_fs == fs {
        return Ok(series.clone());
    }
    let n = series.timepoints();
    let new_len = ((n as f64) * new_fs / fs).round() as usize;
    if new_len == 0 {
        return Err(Error::invalid("resampled series would be empty"));
    }
    let sos = Sos::butterworth(ANTI_ALIAS_ORDER, FilterShape::Lowpass(ANTI_ALIAS_CORNER * new_fs), fs)?;
    let step = fs / new_fs;
    let data = map_channels(series, |x| {
        let y = sos.filtfilt(x);
        (0..new_len)
            .map(|i| {
                let pos = i as f64 * step;
                let j = pos.floor() as usize;
                if j + 1 >= n {
                    y[n - 1]
                } else {
                    let frac = pos - j as f64;
                    y[j] * (1.0 - frac) + y[j + 1] * frac
                }
            })
            .collect()
    })?;
    MultichannelSeries::new(data, new_fs, series.origin().to_string())
}
