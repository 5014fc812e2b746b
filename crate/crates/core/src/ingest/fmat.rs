//! `.fmat` feature matrices.
//!
//! Layout (all little-endian):
//!
//! | offset | size | field                           |
//! |--------|------|---------------------------------|
//! | 0      | 4    | magic `FMAT`                    |
//! | 4      | 4    | version, `u32` = 1              |
//! | 8      | 4    | dim, `u32` ≥ 1                  |
//! | 12     | 8    | unit_count, `u64`               |
//! | 20     | 1    | unit_kind, `u8` (0 frame, 1 clip, 2 video) |
//! | 21     | …    | `unit_count × dim` `f32`, row-major |
//!
//! The video index map lives in a sidecar `<path>.index.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datamodel::{FeatureSet, Matrix, UnitKind, VideoSpan};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"FMAT";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureFileHeader {
    pub dim: u32,
    pub unit_count: u64,
    pub unit_kind: UnitKind,
}

impl FeatureFileHeader {
    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[0..4].copy_from_slice(&MAGIC);
        out[4..8].copy_from_slice(&VERSION.to_le_bytes());
        out[8..12].copy_from_slice(&self.dim.to_le_bytes());
        out[12..20].copy_from_slice(&self.unit_count.to_le_bytes());
        out[20] = self.unit_kind.code();
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(Error::Truncated {
                expected: HEADER_LEN as u64,
                actual: bytes.len() as u64,
            });
        }
        let magic: [u8; 4] = bytes[0..4].try_into().expect("4 bytes");
        if magic != MAGIC {
            return Err(Error::BadMagic { found: magic });
        }
        if bytes.len() < HEADER_LEN {
            return Err(Error::Truncated {
                expected: HEADER_LEN as u64,
                actual: bytes.len() as u64,
            });
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(Error::VersionMismatch { found: version });
        }
        let dim = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if dim == 0 {
            return Err(Error::invalid("feature file declares dim 0"));
        }
        let unit_count = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes"));
        let unit_kind = UnitKind::from_code(bytes[20])?;
        Ok(FeatureFileHeader {
            dim,
            unit_count,
            unit_kind,
        })
    }

    fn payload_len(&self) -> u64 {
        self.unit_count
            .saturating_mul(u64::from(self.dim))
            .saturating_mul(4)
    }
}

/// Serializes a matrix payload with its header.
pub fn encode(unit_kind: UnitKind, dim: usize, data: &[f32]) -> Result<Vec<u8>> {
    let dim32 = u32::try_from(dim).map_err(|_| Error::invalid("dimension exceeds u32"))?;
    if dim == 0 {
        return Err(Error::invalid("feature dimension must be >= 1"));
    }
    let header = FeatureFileHeader {
        dim: dim32,
        unit_count: (data.len() / dim) as u64,
        unit_kind,
    };
    let mut out = Vec::with_capacity(HEADER_LEN + data.len() * 4);
    out.extend_from_slice(&header.to_bytes());
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Parses header and payload, checking exact length and finiteness.
pub fn decode(bytes: &[u8]) -> Result<(FeatureFileHeader, Vec<f32>)> {
    let header = FeatureFileHeader::parse(bytes)?;
    let expected = HEADER_LEN as u64 + header.payload_len();
    let actual = bytes.len() as u64;
    if actual < expected {
        return Err(Error::Truncated { expected, actual });
    }
    if actual > expected {
        return Err(Error::TrailingBytes { expected, actual });
    }
    let data: Vec<f32> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        let dim = header.dim as usize;
        return Err(Error::NonFinite {
            context: format!("unit {} column {}", pos / dim, pos % dim),
        });
    }
    Ok((header, data))
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    videos: Vec<VideoSpan>,
}

pub fn index_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".index.json");
    PathBuf::from(s)
}

pub fn write_features(features: &FeatureSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(features.unit_kind(), features.dim(), features.data())?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let idx = IndexFile {
        videos: features.spans().to_vec(),
    };
    let ipath = index_path(path);
    let mut json = serde_json::to_vec_pretty(&idx).map_err(|e| Error::json(&ipath, e))?;
    json.push(b'\n');
    fs::write(&ipath, json).map_err(|e| Error::io(&ipath, e))
}

pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureSet> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (header, data) = decode(&bytes)?;
    let ipath = index_path(path);
    let raw = fs::read(&ipath).map_err(|e| Error::io(&ipath, e))?;
    let idx: IndexFile = serde_json::from_slice(&raw).map_err(|e| Error::json(&ipath, e))?;
    FeatureSet::new(header.unit_kind, header.dim as usize, data, idx.videos)
}

/// Writes a bare matrix (no index sidecar); used for model parameters.
pub(crate) fn write_matrix(matrix: &Matrix, path: &Path) -> Result<Vec<u8>> {
    let data: Vec<f32> = matrix.as_slice().iter().map(|&v| v as f32).collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: format!("matrix written to {}", path.display()),
        });
    }
    let bytes = encode(UnitKind::Video, matrix.cols(), &data)?;
    fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
    Ok(bytes)
}

pub(crate) fn read_matrix(bytes: &[u8]) -> Result<Matrix> {
    let (header, data) = decode(bytes)?;
    Matrix::new(
        header.unit_count as usize,
        header.dim as usize,
        data.into_iter().map(f64::from).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FeatureSet {
        FeatureSet::new(
            UnitKind::Clip,
            3,
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            vec![VideoSpan {
                video_id: "v1".into(),
                offset: 0,
                count: 2,
            }],
        )
        .unwrap()
    }

    #[test]
    fn round_trip_two_by_three() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.fmat");
        write_features(&sample(), &p).unwrap();
        let back = read_features(&p).unwrap();
        assert_eq!(back, sample());
        assert_eq!(back.video_matrix("v1").unwrap().row(1), &[4.0, 5.0, 6.0]);
        let bytes = fs::read(&p).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + 24);
        assert_eq!(&bytes[..4], b"FMAT");
        assert_eq!(bytes[20], 1);
        assert!(index_path(&p).ends_with("x.fmat.index.json"));
    }

    #[test]
    fn empty_payload_is_header_only() {
        let fs0 = FeatureSet::new(UnitKind::Video, 5, vec![], vec![]).unwrap();
        let bytes = encode(fs0.unit_kind(), 5, fs0.data()).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN);
        let (h, data) = decode(&bytes).unwrap();
        assert_eq!((h.dim, h.unit_count), (5, 0));
        assert!(data.is_empty());
    }

    #[test]
    fn distinct_errors() {
        let good = encode(UnitKind::Frame, 3, &[1.0, 2.0, 3.0]).unwrap();

        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(matches!(decode(&bad_magic), Err(Error::BadMagic { found }) if &found == b"XMAT"));

        let mut bad_version = good.clone();
        bad_version[4] = 2;
        assert!(matches!(decode(&bad_version), Err(Error::VersionMismatch { found: 2 })));

        assert!(matches!(decode(&good[..good.len() - 1]), Err(Error::Truncated { .. })));
        assert!(matches!(decode(&good[..10]), Err(Error::Truncated { .. })));

        let mut trailing = good.clone();
        trailing.push(0);
        assert!(matches!(decode(&trailing), Err(Error::TrailingBytes { .. })));

        let mut nan = good.clone();
        nan[HEADER_LEN..HEADER_LEN + 4].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode(&nan), Err(Error::NonFinite { .. })));

        let mut kind = good;
        kind[20] = 9;
        assert!(matches!(decode(&kind), Err(Error::InvalidUnitKind(9))));
    }
}
