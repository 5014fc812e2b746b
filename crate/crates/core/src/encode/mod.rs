//! Feature-space transformations and the per-stream encoding recipes built
//! from them.
//!
//! A recipe turns unit-level descriptors (frames, clips or whole videos)
//! into one vector per video:
//!
//! | recipe          | steps                                                        |
//! |-----------------|--------------------------------------------------------------|
//! | `mean_pool`     | select units → mean                                          |
//! | `mean_pool_l1`  | select units → mean → L1 normalization                       |
//! | `pca_mean_pool` | select units → PCA → mean                                    |
//! | `vlad_k`        | select frames → split into local descriptors → PCA → VLAD-k  |
//! |                 | (power + intra normalized) per frame → mean                  |
//!
//! Frame units are subsampled according to [`Sampling`]; clip and video
//! units are always pooled in full.

mod kmeans;
mod norm;
mod pca;
mod sampling;
mod vlad;

pub use kmeans::{kmeans_fit, Codebook, KMeansFit, MAX_ITERATIONS, MOVEMENT_TOLERANCE};
pub use norm::{intra_normalize, l1_normalize, mean_pool, power_normalize};
pub use pca::{pca_fit, pca_fit_with, PcaModel, PcaSolver, DENSE_SOLVER_MAX_DIM, SUBSPACE_TOLERANCE};
pub use sampling::{clip_starts, proposal_sample_indices, uniform_sample_indices, ClipSchedule};
pub use vlad::{nearest_centers, vlad_k_encode, vlad_k_residuals};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datamodel::{DatasetManifest, FeatureSet, Matrix, UnitKind, VideoRecord};
use crate::error::{Error, Result};

/// Which frames of a video are pooled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    /// Every available frame row.
    All,
    /// `sample_count` frames spread uniformly over the video.
    #[default]
    Uniform,
    /// `sample_count` frames spread over the video's action proposals;
    /// videos without proposals fall back to [`Sampling::Uniform`].
    Proposals,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub pca_out_dim: Option<usize>,
    pub vlad_centers: usize,
    pub vlad_k: usize,
    pub clip_len: usize,
    pub clip_overlap: f64,
    pub sample_count: usize,
    pub sampling: Sampling,
    /// Width of one local descriptor inside a frame row (`vlad_k` only).
    /// A frame row of width `D` holds `D / descriptor_dim` descriptors
    /// stored position-major. Defaults to the whole row.
    pub descriptor_dim: Option<usize>,
    /// Cap on descriptors used to fit PCA and the codebook.
    pub max_fit_descriptors: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            pca_out_dim: None,
            vlad_centers: 256,
            vlad_k: 5,
            clip_len: 16,
            clip_overlap: 0.5,
            sample_count: 25,
            sampling: Sampling::Uniform,
            descriptor_dim: None,
            max_fit_descriptors: 100_000,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.vlad_centers == 0 || self.vlad_k == 0 || self.vlad_k > self.vlad_centers {
            return Err(Error::invalid(format!(
                "need 1 <= vlad_k ({}) <= vlad_centers ({})",
                self.vlad_k, self.vlad_centers
            )));
        }
        if !(0.0..1.0).contains(&self.clip_overlap) {
            return Err(Error::invalid("clip_overlap must lie in [0, 1)"));
        }
        if self.clip_len == 0 || self.sample_count == 0 {
            return Err(Error::invalid("clip_len and sample_count must be >= 1"));
        }
        if self.pca_out_dim == Some(0) || self.descriptor_dim == Some(0) {
            return Err(Error::invalid("dimensions must be >= 1"));
        }
        if self.max_fit_descriptors == 0 {
            return Err(Error::invalid("max_fit_descriptors must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recipe {
    MeanPool,
    MeanPoolL1,
    PcaMeanPool,
    VladK,
}

/// Recipe plus its parameters; the JSON form is flat:
/// `{"recipe": "vlad_k", "pca_out_dim": 256, "vlad_centers": 256, ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub recipe: Recipe,
    #[serde(flatten)]
    pub config: EncoderConfig,
}

/// An encoder with its learned models, ready to encode any subset.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedEncoder {
    pub spec: EncoderSpec,
    pub pca: Option<PcaModel>,
    pub codebook: Option<Codebook>,
}

/// Rows of a video's unit block that take part in pooling.
fn select_units(
    features: &FeatureSet,
    count: usize,
    record: Option<&VideoRecord>,
    config: &EncoderConfig,
) -> Vec<usize> {
    if features.unit_kind() != UnitKind::Frame || config.sampling == Sampling::All {
        return (0..count).collect();
    }
    if config.sampling == Sampling::Proposals {
        if let Some(rec) = record {
            if let Ok(frames) = proposal_sample_indices(rec, config.sample_count) {
                // rows may be a subsample of the video's frames
                let (rows, n) = (count as u128, rec.num_frames.max(1) as u128);
                return frames
                    .into_iter()
                    .map(|f| ((f as u128 * rows / n) as usize).min(count - 1))
                    .collect();
            }
        }
    }
    uniform_sample_indices(count, config.sample_count)
}

/// Splits each frame row into `row_width / descriptor_dim` local descriptors.
fn local_descriptors(frames: &Matrix, descriptor_dim: usize) -> Result<Matrix> {
    if !frames.cols().is_multiple_of(descriptor_dim) {
        return Err(Error::DimMismatch {
            expected: descriptor_dim,
            found: frames.cols() % descriptor_dim,
        });
    }
    let per_frame = frames.cols() / descriptor_dim;
    Matrix::new(
        frames.rows() * per_frame,
        descriptor_dim,
        frames.as_slice().to_vec(),
    )
}

/// VLAD-k vector of one video: per frame, optional PCA then VLAD-k over the
/// frame's local descriptors; then the mean over frames.
pub fn encode_vlad_video(
    frames: &[Matrix],
    pca: Option<&PcaModel>,
    codebook: &Codebook,
    k: usize,
) -> Result<Vec<f64>> {
    if frames.is_empty() {
        return Err(Error::EmptyInput("no frames to encode".into()));
    }
    let mut per_frame = Vec::with_capacity(frames.len() * codebook.num_centers() * codebook.dim());
    for descriptors in frames {
        let projected;
        let local = match pca {
            Some(p) => {
                projected = p.transform(descriptors)?;
                &projected
            }
            None => descriptors,
        };
        per_frame.extend(vlad_k_encode(local, codebook, k)?);
    }
    let width = codebook.num_centers() * codebook.dim();
    mean_pool(&Matrix::new(frames.len(), width, per_frame)?)
}

impl FittedEncoder {
    /// Learns whatever models the recipe needs from `train` (one block of
    /// units per training video).
    pub fn fit(
        spec: &EncoderSpec,
        train: &FeatureSet,
        manifest: &DatasetManifest,
        seed: u64,
    ) -> Result<FittedEncoder> {
        spec.config.validate()?;
        let cfg = &spec.config;
        let mut fitted = FittedEncoder {
            spec: spec.clone(),
            pca: None,
            codebook: None,
        };
        match spec.recipe {
            Recipe::MeanPool | Recipe::MeanPoolL1 => {}
            Recipe::PcaMeanPool => {
                let r = cfg
                    .pca_out_dim
                    .ok_or_else(|| Error::invalid("pca_mean_pool requires pca_out_dim"))?;
                let rows = fit_rows(train, manifest, cfg, None)?;
                fitted.pca = Some(pca_fit(&rows, r)?);
            }
            Recipe::VladK => {
                let dd = cfg.descriptor_dim.unwrap_or(train.dim());
                let descriptors = fit_rows(train, manifest, cfg, Some(dd))?;
                let local = match cfg.pca_out_dim {
                    Some(r) => {
                        let p = pca_fit(&descriptors, r)?;
                        let projected = p.transform(&descriptors)?;
                        fitted.pca = Some(p);
                        projected
                    }
                    None => descriptors,
                };
                fitted.codebook = Some(kmeans_fit(&local, cfg.vlad_centers, seed)?.codebook);
            }
        }
        Ok(fitted)
    }

    /// Dimension of the encoded per-video vectors.
    pub fn output_dim(&self, input_dim: usize) -> usize {
        match self.spec.recipe {
            Recipe::MeanPool | Recipe::MeanPoolL1 => input_dim,
            Recipe::PcaMeanPool => self.pca.as_ref().map_or(input_dim, |p| p.output_dim()),
            Recipe::VladK => self
                .codebook
                .as_ref()
                .map_or(0, |c| c.num_centers() * c.dim()),
        }
    }

    fn encode_one(&self, features: &FeatureSet, video_id: &str, record: Option<&VideoRecord>) -> Result<Vec<f64>> {
        let block = features.video_matrix(video_id)?;
        if block.rows() == 0 {
            return Err(Error::EmptyInput(format!("video {video_id:?} has no units")));
        }
        let units = block.select_rows(&select_units(features, block.rows(), record, &self.spec.config));
        match self.spec.recipe {
            Recipe::MeanPool => mean_pool(&units),
            Recipe::MeanPoolL1 => {
                let mut v = mean_pool(&units)?;
                l1_normalize(&mut v)?;
                Ok(v)
            }
            Recipe::PcaMeanPool => {
                let pca = self.pca.as_ref().ok_or_else(|| Error::invalid("PCA model missing"))?;
                mean_pool(&pca.transform(&units)?)
            }
            Recipe::VladK => {
                let book = self
                    .codebook
                    .as_ref()
                    .ok_or_else(|| Error::invalid("codebook missing"))?;
                let dd = self.spec.config.descriptor_dim.unwrap_or(features.dim());
                let frames = (0..units.rows())
                    .map(|i| local_descriptors(&units.select_rows(&[i]), dd))
                    .collect::<Result<Vec<_>>>()?;
                encode_vlad_video(&frames, self.pca.as_ref(), book, self.spec.config.vlad_k)
            }
        }
    }

    /// Encodes every video of `features`, preserving their order.
    pub fn encode(&self, features: &FeatureSet, manifest: &DatasetManifest) -> Result<FeatureSet> {
        let ids: Vec<&str> = features.video_ids().collect();
        let vectors = ids
            .par_iter()
            .map(|id| self.encode_one(features, id, manifest.record(id)))
            .collect::<Result<Vec<_>>>()?;
        let dim = self.output_dim(features.dim());
        let data = vectors.into_iter().flatten().collect();
        FeatureSet::video_level(&ids, &Matrix::new(ids.len(), dim, data)?)
    }
}

/// Selected units of every training video stacked together, optionally
/// split into local descriptors, capped at `max_fit_descriptors` rows by
/// even strides.
fn fit_rows(
    train: &FeatureSet,
    manifest: &DatasetManifest,
    cfg: &EncoderConfig,
    descriptor_dim: Option<usize>,
) -> Result<Matrix> {
    let mut blocks = Vec::new();
    for span in train.spans() {
        if span.count == 0 {
            continue;
        }
        let block = train.video_matrix(&span.video_id)?;
        let units = block.select_rows(&select_units(
            train,
            block.rows(),
            manifest.record(&span.video_id),
            cfg,
        ));
        blocks.push(match descriptor_dim {
            Some(dd) => local_descriptors(&units, dd)?,
            None => units,
        });
    }
    let cols = blocks.first().map_or(0, Matrix::cols);
    let total: usize = blocks.iter().map(Matrix::rows).sum();
    if total == 0 {
        return Err(Error::EmptyInput("no training units to fit the encoder".into()));
    }
    let mut data = Vec::with_capacity(total * cols);
    for b in &blocks {
        data.extend_from_slice(b.as_slice());
    }
    let all = Matrix::new(total, cols, data)?;
    if total <= cfg.max_fit_descriptors {
        return Ok(all);
    }
    Ok(all.select_rows(&uniform_sample_indices(total, cfg.max_fit_descriptors)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{Subset, VideoSpan};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn manifest(ids: &[&str]) -> DatasetManifest {
        DatasetManifest {
            class_names: vec!["a".into(), "b".into()],
            entries: ids
                .iter()
                .map(|id| VideoRecord {
                    video_id: id.to_string(),
                    subset: Subset::Train,
                    label: Some(0),
                    num_frames: 3,
                    proposals: None,
                })
                .collect(),
        }
    }

    fn vlad_encoder(codebook: Codebook, pca: Option<PcaModel>, k: usize) -> FittedEncoder {
        let descriptor_dim = pca.as_ref().map_or(codebook.dim(), |p| p.input_dim());
        FittedEncoder {
            spec: EncoderSpec {
                recipe: Recipe::VladK,
                config: EncoderConfig {
                    vlad_k: k,
                    vlad_centers: codebook.num_centers(),
                    descriptor_dim: Some(descriptor_dim),
                    sampling: Sampling::All,
                    ..EncoderConfig::default()
                },
            },
            pca,
            codebook: Some(codebook),
        }
    }

    #[test]
    fn descriptor_on_center_gives_zero() {
        let book = Codebook::new(Matrix::from_rows(&[[1.0, 2.0], [5.0, 5.0]]).unwrap()).unwrap();
        let frame = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let v = encode_vlad_video(&[frame], None, &book, 1).unwrap();
        assert_eq!(v, [0.0; 4]);
    }

    #[test]
    fn identical_frames_mean_is_frame() {
        let book = Codebook::new(Matrix::from_rows(&[[0.0, 0.0], [4.0, 1.0]]).unwrap()).unwrap();
        let frame = Matrix::from_rows(&[[1.0, 2.0], [3.0, -1.0]]).unwrap();
        let single = vlad_k_encode(&frame, &book, 2).unwrap();
        let v = encode_vlad_video(&[frame.clone(), frame], None, &book, 2).unwrap();
        for (a, b) in v.iter().zip(&single) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn chain_matches_step_by_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut rnd = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-1.0..1.0)).collect() };
        // 3 frames × 4 descriptors of width 6, PCA to 3, 4 centers, k = 2
        let train = Matrix::new(40, 6, rnd(240)).unwrap();
        let pca = pca_fit(&train, 3).unwrap();
        let book = Codebook::new(Matrix::new(4, 3, rnd(12)).unwrap()).unwrap();
        let frames: Vec<Matrix> = (0..3).map(|_| Matrix::new(4, 6, rnd(24)).unwrap()).collect();

        let mut manual = vec![0.0; 12];
        for f in &frames {
            let projected = pca.transform(f).unwrap();
            let v = vlad_k_encode(&projected, &book, 2).unwrap();
            for (m, x) in manual.iter_mut().zip(v) {
                *m += x / 3.0;
            }
        }

        // same chain through the FeatureSet path: frame rows hold 4 descriptors each
        let data: Vec<f32> = frames.iter().flat_map(|f| f.as_slice().iter().map(|&x| x as f32)).collect();
        let fs = FeatureSet::new(
            UnitKind::Frame,
            24,
            data,
            vec![VideoSpan { video_id: "v".into(), offset: 0, count: 3 }],
        )
        .unwrap();
        let exact: Vec<Matrix> = frames
            .iter()
            .map(|f| Matrix::new(4, 6, f.as_slice().iter().map(|&x| f64::from(x as f32)).collect()).unwrap())
            .collect();
        let via_video = encode_vlad_video(&exact, Some(&pca), &book, 2).unwrap();
        let enc = vlad_encoder(book, Some(pca), 2);
        let out = enc.encode(&fs, &manifest(&["v"])).unwrap();
        assert_eq!(out.dim(), 12);
        for (a, b) in out.unit(0).iter().zip(&via_video) {
            assert!((f64::from(*a) - b).abs() < 1e-6);
        }
        for (a, b) in via_video.iter().zip(&manual) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn mean_pool_l1_recipe() {
        let fs = FeatureSet::new(
            UnitKind::Frame,
            2,
            vec![1.0, 3.0, 3.0, 1.0, 2.0, 2.0],
            vec![VideoSpan { video_id: "v".into(), offset: 0, count: 3 }],
        )
        .unwrap();
        let spec = EncoderSpec {
            recipe: Recipe::MeanPoolL1,
            config: EncoderConfig { sampling: Sampling::All, ..Default::default() },
        };
        let m = manifest(&["v"]);
        let enc = FittedEncoder::fit(&spec, &fs, &m, 0).unwrap();
        let out = enc.encode(&fs, &m).unwrap();
        assert_eq!(out.unit(0), &[0.5, 0.5]);
        assert_eq!(out.unit_kind(), UnitKind::Video);
    }

    #[test]
    fn vlad_fit_and_encode_dims() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ids = ["a", "b", "c", "d"];
        let data: Vec<f32> = (0..4 * 5 * 32).map(|_| rng.random_range(-1.0..1.0)).collect();
        let spans = ids
            .iter()
            .enumerate()
            .map(|(i, id)| VideoSpan { video_id: id.to_string(), offset: 5 * i, count: 5 })
            .collect();
        let fs = FeatureSet::new(UnitKind::Frame, 32, data, spans).unwrap();
        let spec = EncoderSpec {
            recipe: Recipe::VladK,
            config: EncoderConfig {
                pca_out_dim: Some(4),
                vlad_centers: 6,
                vlad_k: 2,
                descriptor_dim: Some(8),
                sample_count: 3,
                ..Default::default()
            },
        };
        let m = manifest(&ids);
        let enc = FittedEncoder::fit(&spec, &fs, &m, 7).unwrap();
        let out = enc.encode(&fs, &m).unwrap();
        assert_eq!(out.dim(), 24);
        assert_eq!(out.unit_count(), 4);
        let again = FittedEncoder::fit(&spec, &fs, &m, 7).unwrap().encode(&fs, &m).unwrap();
        assert_eq!(out, again);
    }

    #[test]
    fn config_validation() {
        let bad = EncoderConfig { vlad_k: 300, ..Default::default() };
        assert!(bad.validate().is_err());
        assert!(EncoderConfig::default().validate().is_ok());
        let spec: EncoderSpec = serde_json::from_str(r#"{"recipe":"vlad_k","pca_out_dim":256}"#).unwrap();
        assert_eq!(spec.config.vlad_centers, 256);
        assert_eq!(spec.config.vlad_k, 5);
        assert_eq!(spec.config.sample_count, 25);
    }
}
