//! Raw recording format.
//!
//! ```text
//! format_version=1
//! channels=<int>
//! fs=<float>
//! timepoints=<int>
//! dtype=float32le | float64le
//! origin=<free text>
//! ---
//! <row-major little-endian payload, channels * timepoints values>
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use super::MultichannelSeries;
use crate::error::{Error, Result};

const TERMINATOR: &[u8] = b"---\n";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Dtype {
    #[default]
    F32,
    F64,
}

impl Dtype {
    fn as_str(self) -> &'static str {
        match self {
            Dtype::F32 => "float32le",
            Dtype::F64 => "float64le",
        }
    }

    fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "float32le" => Ok(Dtype::F32),
            "float64le" => Ok(Dtype::F64),
            other => Err(Error::MalformedHeader(format!("unsupported dtype {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawHeader {
    pub channels: usize,
    pub fs: f64,
    pub timepoints: usize,
    pub dtype: Dtype,
    pub origin: String,
    /// Additional keys, written after the standard ones in order.
    pub extra: Vec<(String, String)>,
}

impl RawHeader {
    fn render(&self) -> String {
        let mut s = format!(
            "format_version=1\nchannels={}\nfs={}\ntimepoints={}\ndtype={}\norigin={}\n",
            self.channels,
            self.fs,
            self.timepoints,
            self.dtype.as_str(),
            self.origin.replace('\n', " ")
        );
        for (k, v) in &self.extra {
            s.push_str(&format!("{k}={}\n", v.replace('\n', " ")));
        }
        s
    }

    fn parse(text: &str) -> Result<Self> {
        let mut version = None;
        let mut channels = None;
        let mut fs = None;
        let mut timepoints = None;
        let mut dtype = None;
        let mut origin = None;
        let mut extra = Vec::new();
        for line in text.lines() {
            if line.trim().is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::MalformedHeader(format!("line without '=': {line:?}")))?;
            let bad = |what: &str| Error::MalformedHeader(format!("bad {what}: {value:?}"));
            match key.trim() {
                "format_version" => version = Some(value.trim().parse::<u32>().map_err(|_| bad("format_version"))?),
                "channels" => channels = Some(value.trim().parse::<usize>().map_err(|_| bad("channels"))?),
                "fs" => fs = Some(value.trim().parse::<f64>().map_err(|_| bad("fs"))?),
                "timepoints" => timepoints = Some(value.trim().parse::<usize>().map_err(|_| bad("timepoints"))?),
                "dtype" => dtype = Some(Dtype::parse(value.trim())?),
                "origin" => origin = Some(value.to_string()),
                other => extra.push((other.to_string(), value.to_string())),
            }
        }
        let missing = |k: &str| Error::MalformedHeader(format!("missing key {k}"));
        match version.ok_or_else(|| missing("format_version"))? {
            1 => {}
            v => return Err(Error::MalformedHeader(format!("unsupported format_version {v}"))),
        }
        let fs = fs.ok_or_else(|| missing("fs"))?;
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::MalformedHeader(format!("fs must be positive, got {fs}")));
        }
        Ok(Self {
            channels: channels.ok_or_else(|| missing("channels"))?,
            fs,
            timepoints: timepoints.ok_or_else(|| missing("timepoints"))?,
            dtype: dtype.ok_or_else(|| missing("dtype"))?,
            origin: origin.unwrap_or_default(),
            extra,
        })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.extra.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

/// Serialize `values` (row-major) under `header` into `out`.
pub fn write_recording<W: Write>(out: &mut W, header: &RawHeader, values: &[f64]) -> Result<()> {
    let expected = header.channels * header.timepoints;
    if values.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            found: values.len(),
        });
    }
    let mut buf = Vec::with_capacity(values.len() * header.dtype.width() + 256);
    buf.extend_from_slice(header.render().as_bytes());
    buf.extend_from_slice(TERMINATOR);
    match header.dtype {
        Dtype::F32 => values.iter().for_each(|v| buf.extend_from_slice(&(*v as f32).to_le_bytes())),
        Dtype::F64 => values.iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes())),
    }
    out.write_all(&buf).map_err(|e| Error::io("<stream>", e))
}

/// Parse a raw-format byte buffer into its header and row-major values.
pub fn read_recording(bytes: &[u8]) -> Result<(RawHeader, Vec<f64>)> {
    let split = find_terminator(bytes)
        .ok_or_else(|| Error::MalformedHeader("missing '---' header terminator".into()))?;
    let text = std::str::from_utf8(&bytes[..split])
        .map_err(|_| Error::MalformedHeader("header is not UTF-8".into()))?;
    let header = RawHeader::parse(text)?;
    let payload = &bytes[split + TERMINATOR.len()..];
    let width = header.dtype.width();
    let expected = header.channels * header.timepoints;
    if payload.len() % width != 0 || payload.len() / width != expected {
        return Err(Error::LengthMismatch {
            expected,
            found: payload.len() / width,
        });
    }
    let values: Vec<f64> = match header.dtype {
        Dtype::F32 => payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect(),
        Dtype::F64 => payload
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
            .collect(),
    };
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok((header, values))
}

fn find_terminator(bytes: &[u8]) -> Option<usize> {
    if bytes.starts_with(TERMINATOR) {
        return Some(0);
    }
    bytes
        .windows(TERMINATOR.len() + 1)
        .position(|w| w[0] == b'\n' && &w[1..] == TERMINATOR)
        .map(|p| p + 1)
}

pub fn save_recording(path: impl AsRef<Path>, series: &MultichannelSeries, dtype: Dtype) -> Result<()> {
    let path = path.as_ref();
    let header = RawHeader {
        channels: series.channels(),
        fs: series.fs(),
        timepoints: series.timepoints(),
        dtype,
        origin: series.origin().to_string(),
        extra: Vec::new(),
    };
    let values = series.data().as_slice().expect("series data is standard layout");
    let mut buf = Vec::new();
    write_recording(&mut buf, &header, values)?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_recording(path: impl AsRef<Path>) -> Result<MultichannelSeries> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (header, values) = read_recording(&bytes)?;
    if header.channels == 0 || header.timepoints == 0 {
        return Err(Error::MalformedHeader("channels and timepoints must be >= 1".into()));
    }
    let data = Array2::from_shape_vec((header.channels, header.timepoints), values)
        .map_err(|e| Error::Shape(e.to_string()))?;
    MultichannelSeries::new(data, header.fs, header.origin)
}
