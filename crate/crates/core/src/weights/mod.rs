//! The `ACNW` weight container, parameter manifests and the seeded initializer.

mod init;
mod io;

pub use init::{init_from_manifest, Init, ParamSpec};
pub use io::{manifest_json, WeightStore, WEIGHT_MAGIC, WEIGHT_VERSION};

use crate::error::Result;
use crate::model::{param_manifest, ModelConfig};

/// Seeded random weights for `cfg`; identical seeds give identical files.
pub fn init_random(cfg: &ModelConfig, seed: u64) -> Result<WeightStore> {
    Ok(init_from_manifest(&param_manifest(cfg)?, seed))
}
