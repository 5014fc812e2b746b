//! Multi-stream video classification: descriptor encoding, one-vs-rest
//! linear SVMs, weighted late fusion of per-stream scores and ranking
//! metrics.
//!
//! The usual flow is
//!
//! 1. [`ingest`] reads features, scores and manifests (or generates a
//!    synthetic dataset),
//! 2. [`encode`] turns unit-level descriptors into one vector per video,
//! 3. [`classify`] trains and applies one-vs-rest SVMs,
//! 4. [`fusion`] folds several streams into one score matrix,
//! 5. [`eval`] reports top-k accuracy and mAP.

pub mod classify;
pub mod datamodel;
pub mod encode;
mod error;
pub mod eval;
pub mod fusion;
pub mod ingest;

pub use datamodel::{
    validate_manifest, DatasetManifest, FeatureSet, ManifestViolation, Matrix, ScoreMatrix, StreamMeta, Subset,
    TemporalInterval, UnitKind, VideoRecord, VideoSpan,
};
pub use error::{Error, Result};
