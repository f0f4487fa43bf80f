//! Multichannel recordings: the in-memory series type, phantom synthesis,
//! domain-signature injection and the raw on-disk format.

mod inject;
mod io;
mod synth;

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

pub use inject::{inject_domain_signatures, DomainSignature, Narrowband, SignatureProfile, TimeWindow};
pub use io::{load_recording, read_recording, save_recording, write_recording, Dtype, RawHeader};
pub use synth::{synth, LineNoise, SurrogateKind, SurrogateSpec};

/// A sampled multichannel time series, `channels x timepoints`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelSeries {
    data: Array2<f64>,
    fs: f64,
    origin: String,
}

impl MultichannelSeries {
    pub fn new(data: Array2<f64>, fs: f64, origin: impl Into<String>) -> Result<Self> {
        let (channels, timepoints) = data.dim();
        if channels == 0 || timepoints == 0 {
            return Err(Error::Shape(format!(
                "series needs at least one channel and one timepoint, got {channels}x{timepoints}"
            )));
        }
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::invalid(format!("sampling rate must be positive, got {fs}")));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let data = if data.is_standard_layout() {
            data
        } else {
            data.as_standard_layout().to_owned()
        };
        Ok(Self {
            data,
            fs,
            origin: origin.into(),
        })
    }

    pub fn channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn timepoints(&self) -> usize {
        self.data.ncols()
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn duration_s(&self) -> f64 {
        self.timepoints() as f64 / self.fs
    }

    pub fn origin(&self) -> &str {
        &self.origin
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn channel(&self, c: usize) -> ArrayView1<'_, f64> {
        self.data.row(c)
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    /// Replace the data, keeping fs and origin. Validates like [`new`](Self::new).
    pub fn with_data(&self, data: Array2<f64>) -> Result<Self> {
        Self::new(data, self.fs, self.origin.clone())
    }

    pub fn with_origin(mut self, origin: impl Into<String>) -> Self {
        self.origin = origin.into();
        self
    }

    /// Copy of the time range `[start, end)` in samples.
    pub fn slice_time(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.timepoints() {
            return Err(Error::invalid(format!(
                "time slice {start}..{end} outside series of {} timepoints",
                self.timepoints()
            )));
        }
        let data = self.data.slice(ndarray::s![.., start..end]).to_owned();
        Self::new(data, self.fs, self.origin.clone())
    }
}
