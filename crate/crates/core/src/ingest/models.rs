//! Persistence of fitted encoders and SVM models.
//!
//! A model is a JSON descriptor `<stem>.json` plus one `.fmat` block per
//! parameter matrix next to it. Each block is referenced by file name with
//! its SHA-256, which is checked on load. Blocks store `f32`, so a reloaded
//! model is the persisted one rounded to single precision; callers that need
//! reproducible output should always predict from the reloaded model.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::fmat::{read_matrix, write_matrix};
use crate::classify::{SvmConfig, SvmModel};
use crate::datamodel::Matrix;
use crate::encode::{Codebook, EncoderSpec, FittedEncoder, PcaModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockRef {
    pub file: String,
    pub sha256: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Serialize, Deserialize)]
struct PcaDescriptor {
    mean: BlockRef,
    components: BlockRef,
    explained_variance: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct EncoderDescriptor {
    spec: EncoderSpec,
    pca: Option<PcaDescriptor>,
    codebook: Option<BlockRef>,
}

#[derive(Serialize, Deserialize)]
struct SvmDescriptor {
    class_names: Vec<String>,
    config: SvmConfig,
    training_objective: Vec<f64>,
    epochs: Vec<usize>,
    converged: Vec<bool>,
    weights: BlockRef,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// `dir/stem.json` for a stem path `dir/stem`.
pub fn descriptor_path(stem: &Path) -> PathBuf {
    sibling(stem, ".json")
}

fn sibling(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn write_block(stem: &Path, suffix: &str, m: &Matrix) -> Result<BlockRef> {
    let path = sibling(stem, suffix);
    let bytes = write_matrix(m, &path)?;
    Ok(BlockRef {
        file: file_name(&path),
        sha256: sha256_hex(&bytes),
        rows: m.rows(),
        cols: m.cols(),
    })
}

fn read_block(dir: &Path, block: &BlockRef) -> Result<Matrix> {
    let path = dir.join(&block.file);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    if sha256_hex(&bytes) != block.sha256 {
        return Err(Error::ChecksumMismatch { path });
    }
    let m = read_matrix(&bytes)?;
    if (m.rows(), m.cols()) != (block.rows, block.cols) {
        return Err(Error::invalid(format!(
            "{}: expected {}x{} block, found {}x{}",
            path.display(),
            block.rows,
            block.cols,
            m.rows(),
            m.cols()
        )));
    }
    Ok(m)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut json = serde_json::to_vec_pretty(value).map_err(|e| Error::json(path, e))?;
    json.push(b'\n');
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&raw).map_err(|e| Error::json(path, e))
}

fn parent_dir(path: &Path) -> &Path {
    path.parent().unwrap_or_else(|| Path::new("."))
}

/// Writes `<stem>.json` and its parameter blocks; returns the descriptor path.
pub fn save_encoder(encoder: &FittedEncoder, stem: impl AsRef<Path>) -> Result<PathBuf> {
    let stem = stem.as_ref();
    let pca = match &encoder.pca {
        Some(p) => Some(PcaDescriptor {
            mean: write_block(stem, ".pca.mean.fmat", &Matrix::new(1, p.mean.len(), p.mean.clone())?)?,
            components: write_block(stem, ".pca.components.fmat", &p.components)?,
            explained_variance: p.explained_variance.clone(),
        }),
        None => None,
    };
    let codebook = match &encoder.codebook {
        Some(cb) => Some(write_block(stem, ".codebook.fmat", &cb.centers)?),
        None => None,
    };
    let desc = EncoderDescriptor {
        spec: encoder.spec.clone(),
        pca,
        codebook,
    };
    let path = descriptor_path(stem);
    write_json(&path, &desc)?;
    Ok(path)
}

/// Loads an encoder from its descriptor JSON.
pub fn load_encoder(descriptor: impl AsRef<Path>) -> Result<FittedEncoder> {
    let path = descriptor.as_ref();
    let desc: EncoderDescriptor = read_json(path)?;
    let dir = parent_dir(path);
    let pca = match desc.pca {
        Some(p) => Some(PcaModel {
            mean: read_block(dir, &p.mean)?.into_vec(),
            components: read_block(dir, &p.components)?,
            explained_variance: p.explained_variance,
        }),
        None => None,
    };
    let codebook = match desc.codebook {
        Some(b) => Some(Codebook::new(read_block(dir, &b)?)?),
        None => None,
    };
    Ok(FittedEncoder {
        spec: desc.spec,
        pca,
        codebook,
    })
}

pub fn save_svm(model: &SvmModel, stem: impl AsRef<Path>) -> Result<PathBuf> {
    let stem = stem.as_ref();
    let desc = SvmDescriptor {
        class_names: model.class_names.clone(),
        config: model.config.clone(),
        training_objective: model.training_objective.clone(),
        epochs: model.epochs.clone(),
        converged: model.converged.clone(),
        weights: write_block(stem, ".weights.fmat", &model.weights)?,
    };
    let path = descriptor_path(stem);
    write_json(&path, &desc)?;
    Ok(path)
}

pub fn load_svm(descriptor: impl AsRef<Path>) -> Result<SvmModel> {
    let path = descriptor.as_ref();
    let desc: SvmDescriptor = read_json(path)?;
    let weights = read_block(parent_dir(path), &desc.weights)?;
    if weights.rows() != desc.class_names.len() {
        return Err(Error::ClassCountMismatch {
            expected: desc.class_names.len(),
            found: weights.rows(),
        });
    }
    Ok(SvmModel {
        class_names: desc.class_names,
        weights,
        config: desc.config,
        training_objective: desc.training_objective,
        epochs: desc.epochs,
        converged: desc.converged,
    })
}
