//! File formats and synthetic data.

pub mod fmat;
mod manifest;
mod models;
mod scores;
mod synth;

pub use fmat::{read_features, write_features, FeatureFileHeader};
pub use manifest::{read_manifest, write_manifest};
pub use models::{descriptor_path, load_encoder, load_svm, save_encoder, save_svm, sha256_hex, BlockRef};
pub use scores::{format_score, parse_scores, read_scores, scores_to_csv, stream_name_from_path, write_scores};
pub use synth::{
    generate_synthetic, realized_accuracy, separation_for_accuracy, top1_of, write_synthetic, SubsetSizes,
    SynthSpec, SynthStreamSpec, SyntheticDataset, SyntheticFiles, SyntheticStream, MAX_SEPARATION,
};
