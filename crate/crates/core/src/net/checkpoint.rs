//! Parameter checkpoints.
//!
//! `<stem>.bin` holds every parameter as a little-endian `f64`, in the flat
//! order documented on [`NetworkParameters`]: per layer `W` (row-major,
//! `fan_out x fan_in`) then `b`, output layer last, followed by the trainable
//! scalars. `<stem>.json` is the sidecar describing the architecture.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Architecture, NetworkParameters};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub architecture: Architecture,
    pub scalar_names: Vec<String>,
    pub num_values: usize,
    pub layout: String,
}

fn sidecar(bin: &Path) -> PathBuf {
    bin.with_extension("json")
}

/// Writes `path` (binary) and its `.json` sidecar.
pub fn save_checkpoint(params: &NetworkParameters, path: &Path) -> Result<()> {
    let bytes: Vec<u8> = params.as_slice().iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(path, bytes)?;
    let meta = CheckpointMeta {
        architecture: params.architecture().clone(),
        scalar_names: params.scalar_names().to_vec(),
        num_values: params.as_slice().len(),
        layout: "per layer: W row-major (fan_out x fan_in), then b; output layer last; then scalars".into(),
    };
    let json = serde_json::to_string_pretty(&meta).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(sidecar(path), json + "\n")?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<NetworkParameters> {
    let meta_path = sidecar(path);
    let meta: CheckpointMeta = serde_json::from_str(&fs::read_to_string(&meta_path)?).map_err(|e| Error::Parse {
        path: meta_path.clone(),
        line: e.line(),
        msg: e.to_string(),
    })?;
    let bytes = fs::read(path)?;
    if bytes.len() != meta.num_values * 8 {
        return Err(Error::invalid(format!(
            "checkpoint {} holds {} bytes, sidecar expects {} values",
            path.display(),
            bytes.len(),
            meta.num_values
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    meta.architecture.validate()?;
    NetworkParameters::from_flat(&meta.architecture, values, meta.scalar_names)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{init_xavier, Activation};

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.bin");
        let arch = Architecture::uniform(2, 4, 2, Activation::Tanh).unwrap();
        let p = init_xavier(&arch, 7).with_scalar("k", 0.1);
        save_checkpoint(&p, &path).unwrap();
        assert!(path.with_extension("json").exists());
        assert_eq!(load_checkpoint(&path).unwrap(), p);
    }
}
