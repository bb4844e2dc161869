use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ModelParams;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "wocd-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Self-describing JSON model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub features: usize,
    pub hidden: usize,
    pub communities: usize,
    pub params: ModelParams,
}

impl Checkpoint {
    pub fn new(params: ModelParams, seed: u64) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            seed,
            features: params.features(),
            hidden: params.hidden(),
            communities: params.communities(),
            params,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string(self)?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_str(&text)?;
        if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::parse(
                path,
                1,
                format!("unsupported checkpoint {} v{}", ckpt.format, ckpt.version),
            ));
        }
        let p = &ckpt.params;
        if (p.features(), p.hidden(), p.communities()) != (ckpt.features, ckpt.hidden, ckpt.communities) {
            return Err(Error::ShapeMismatch("checkpoint header disagrees with tensors".into()));
        }
        Ok(ckpt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let ckpt = Checkpoint::new(ModelParams::init(5, 6, 3, 11), 11);
        let f = tempfile::NamedTempFile::new().unwrap();
        ckpt.save(f.path()).unwrap();
        assert_eq!(Checkpoint::load(f.path()).unwrap(), ckpt);
    }

    #[test]
    fn rejects_other_versions() {
        let mut ckpt = Checkpoint::new(ModelParams::init(2, 2, 2, 0), 0);
        ckpt.version = 99;
        let f = tempfile::NamedTempFile::new().unwrap();
        ckpt.save(f.path()).unwrap();
        assert!(Checkpoint::load(f.path()).is_err());
    }
}
