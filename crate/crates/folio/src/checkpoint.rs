//! Versioned JSON checkpoints of trained allocators.

use std::path::Path;

use folio_core::allocators::TrainedAllocator;

use crate::error::Result;
use crate::report::{read_json, write_json};

pub fn save_checkpoint(path: &Path, model: &TrainedAllocator) -> Result<()> {
    model.check()?;
    write_json(path, model)
}

/// Loads a checkpoint and verifies its version, shapes and values.
pub fn load_checkpoint(path: &Path) -> Result<TrainedAllocator> {
    let model: TrainedAllocator = read_json(path)?;
    model.check()?;
    Ok(model)
}
