//! Versioned JSON model checkpoints. Shapes are explicit in every matrix;
//! JSON float round-tripping is lossless for f64.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::canon::CanonParams;
use crate::error::{Error, Result};
use crate::neural::gcn::GcnModel;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub model: GcnModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub canon_params: Option<CanonParams>,
}

impl Checkpoint {
    pub fn new(model: GcnModel, canon_params: Option<CanonParams>) -> Self {
        Checkpoint { format_version: CHECKPOINT_VERSION, model, canon_params }
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    std::fs::write(path, serde_json::to_string(ckpt)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path)?;
    let ckpt: Checkpoint = serde_json::from_str(&text)?;
    if ckpt.format_version != CHECKPOINT_VERSION {
        return Err(Error::Input(format!(
            "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
            ckpt.format_version
        )));
    }
    ckpt.model.validate()?;
    if let Some(p) = &ckpt.canon_params {
        p.validate()?;
    }
    Ok(ckpt)
}
