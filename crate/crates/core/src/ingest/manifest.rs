use std::fs;
use std::path::Path;

use crate::datamodel::DatasetManifest;
use crate::error::{Error, Result};

/// Reads and validates a manifest JSON file.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    let manifest: DatasetManifest = serde_json::from_slice(&raw).map_err(|e| Error::json(path, e))?;
    manifest.ensure_valid()?;
    Ok(manifest)
}

pub fn write_manifest(manifest: &DatasetManifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut json = serde_json::to_vec_pretty(manifest).map_err(|e| Error::json(path, e))?;
    json.push(b'\n');
    fs::write(path, json).map_err(|e| Error::io(path, e))
}
