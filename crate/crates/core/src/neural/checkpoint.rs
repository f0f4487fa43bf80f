//! Parameter checkpoints: a raw float64 payload (one row) plus a JSON
//! manifest naming each slice.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::{ModelParams, ParamSlice};
use crate::error::{Error, Result};
use crate::signal::{read_recording, write_recording, Dtype, RawHeader};

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointManifest {
    model: serde_json::Value,
    slices: Vec<ParamSlice>,
    payload: String,
}

/// Writes `<stem>.raw` and `<stem>.json` into `dir`.
pub fn save_checkpoint(dir: &Path, stem: &str, params: &ModelParams, model: serde_json::Value) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let payload = format!("{stem}.raw");
    let header = RawHeader {
        channels: 1,
        fs: 1.0,
        timepoints: params.len(),
        dtype: Dtype::F64,
        origin: format!("checkpoint:{stem}"),
        extra: Vec::new(),
    };
    let mut buf = Vec::new();
    write_recording(&mut buf, &header, &params.values)?;
    let raw = dir.join(&payload);
    fs::write(&raw, buf).map_err(|e| Error::io(&raw, e))?;
    let manifest = CheckpointManifest {
        model,
        slices: params.layout.clone(),
        payload,
    };
    let json = dir.join(format!("{stem}.json"));
    fs::write(&json, serde_json::to_vec_pretty(&manifest)?).map_err(|e| Error::io(&json, e))
}

/// Returns the parameters and the model description stored with them.
pub fn load_checkpoint(dir: &Path, stem: &str) -> Result<(ModelParams, serde_json::Value)> {
    let json = dir.join(format!("{stem}.json"));
    let manifest: CheckpointManifest = serde_json::from_slice(&fs::read(&json).map_err(|e| Error::io(&json, e))?)?;
    let raw = dir.join(&manifest.payload);
    let (_, values) = read_recording(&fs::read(&raw).map_err(|e| Error::io(&raw, e))?)?;
    let expected: usize = manifest.slices.iter().map(ParamSlice::len).sum();
    if values.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            found: values.len(),
        });
    }
    Ok((
        ModelParams {
            values,
            layout: manifest.slices,
        },
        manifest.model,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{SimpleCnn, SimpleCnnConfig};

    #[test]
    fn round_trip_is_exact() {
        let cfg = SimpleCnnConfig::for_input(2, 30, 100.0, 4);
        let m = SimpleCnn::new(cfg.clone(), 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(dir.path(), "dlc", &m.params, serde_json::to_value(&cfg).unwrap()).unwrap();
        let (p, desc) = load_checkpoint(dir.path(), "dlc").unwrap();
        let back = SimpleCnn::from_params(serde_json::from_value(desc).unwrap(), p).unwrap();
        assert_eq!(back, m);
    }
}
