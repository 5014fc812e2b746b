//! Synthetic multi-stream datasets.
//!
//! Each stream scores video `i` with `s_ic = z_ic + δ·[c = y_i]`, where
//! `z_ic = √ρ·g_ic + √(1-ρ)·e_ic` mixes noise shared by all streams (`g`)
//! with noise private to the stream (`e`), both standard normal. Every `z_ic`
//! is standard normal whatever `ρ` is, so top-1 accuracy depends on `δ` only:
//!
//! ```text
//! acc(δ) = ∫ φ(z) Φ(z + δ)^(K-1) dz
//! ```
//!
//! `δ` is found by bisection on that integral when there is no validation
//! subset; otherwise it is set from the validation draws themselves, so the
//! realized validation accuracy is the target rounded up to the next
//! attainable fraction. Features are a random
//! orthonormal embedding `x = Q·s` of the score vector, so a linear
//! classifier trained on them can recover the stream's scores.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::fmat::write_features;
use super::manifest::write_manifest;
use super::scores::write_scores;
use crate::datamodel::{DatasetManifest, FeatureSet, Matrix, ScoreMatrix, Subset, VideoRecord};
use crate::error::{Error, Result};

/// Upper end of the separation search; also the separation used for a
/// perfect stream unless the noise requires more.
pub const MAX_SEPARATION: f64 = 50.0;

const MIN_FRAMES: usize = 64;
const MAX_FRAMES: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetSizes {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthStreamSpec {
    pub name: String,
    pub dim: usize,
    pub target_accuracy: f64,
    pub noise_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub num_classes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_names: Option<Vec<String>>,
    pub num_videos: SubsetSizes,
    pub streams: Vec<SynthStreamSpec>,
    /// Share `ρ ∈ [0, 1]` of each stream's noise that is common to all streams.
    pub complementarity: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SyntheticStream {
    pub name: String,
    pub target_accuracy: f64,
    pub separation: f64,
    pub validation_scores: ScoreMatrix,
    pub test_scores: ScoreMatrix,
    /// Video-level features for every video of every subset.
    pub features: FeatureSet,
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub manifest: DatasetManifest,
    pub streams: Vec<SyntheticStream>,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let k = self.num_classes;
        if k < 2 {
            return Err(Error::invalid(format!("synthetic data needs at least 2 classes, got {k}")));
        }
        if let Some(names) = &self.class_names {
            if names.len() != k {
                return Err(Error::ClassCountMismatch {
                    expected: k,
                    found: names.len(),
                });
            }
        }
        if !(0.0..=1.0).contains(&self.complementarity) {
            return Err(Error::invalid(format!(
                "complementarity {} outside [0, 1]",
                self.complementarity
            )));
        }
        if self.streams.is_empty() {
            return Err(Error::EmptyInput("no streams specified".into()));
        }
        let mut names = std::collections::HashSet::new();
        for s in &self.streams {
            if !names.insert(s.name.as_str()) {
                return Err(Error::invalid(format!("duplicate stream {:?}", s.name)));
            }
            if s.dim == 0 {
                return Err(Error::invalid(format!("stream {:?} has dim 0", s.name)));
            }
            let floor = 1.0 / k as f64;
            if !(s.target_accuracy >= floor - 1e-12 && s.target_accuracy <= 1.0) {
                return Err(Error::InfeasibleTarget {
                    target: s.target_accuracy,
                    classes: k,
                });
            }
        }
        Ok(())
    }

    fn class_names(&self) -> Vec<String> {
        self.class_names
            .clone()
            .unwrap_or_else(|| (0..self.num_classes).map(|c| format!("class_{c:02}")).collect())
    }
}

/// Top-1 accuracy of a stream with separation `delta` over `k` classes
/// (Simpson's rule on `[-12, 12]`).
pub fn realized_accuracy(delta: f64, k: usize) -> f64 {
    let normal = Normal::standard();
    let f = |z: f64| normal.pdf(z) * normal.cdf(z + delta).powi(k as i32 - 1);
    let (a, b, n) = (-12.0, 12.0, 4000);
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + i as f64 * h);
    }
    (sum * h / 3.0).min(1.0)
}

/// Smallest separation whose accuracy reaches `target`, by bisection on
/// `[0, MAX_SEPARATION]`.
pub fn separation_for_accuracy(target: f64, k: usize) -> Result<f64> {
    if k < 2 || !(target >= 1.0 / k as f64 - 1e-12 && target <= 1.0) {
        return Err(Error::InfeasibleTarget { target, classes: k });
    }
    if realized_accuracy(0.0, k) >= target {
        return Ok(0.0);
    }
    if target >= 1.0 {
        return Ok(MAX_SEPARATION);
    }
    let (mut lo, mut hi) = (0.0, MAX_SEPARATION);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if realized_accuracy(mid, k) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Ok(hi)
}

/// Independent generator per purpose: the key holds a tag and both seeds.
fn keyed_rng(tag: u64, seed: u64, noise_seed: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&tag.to_le_bytes());
    key[8..16].copy_from_slice(&seed.to_le_bytes());
    key[16..24].copy_from_slice(&noise_seed.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

const TAG_META: u64 = 1;
const TAG_SHARED: u64 = 2;
const TAG_PRIVATE: u64 = 3;
const TAG_EMBED: u64 = 4;

/// Separation at which the share of `deficit` values below it first
/// reaches `target`, halfway between neighbouring order statistics. It is
/// negative only when the draws alone already beat a near-chance target.
fn empirical_separation(deficit: &[f64], target: f64) -> f64 {
    let mut sorted = deficit.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let need = ((target * n as f64) - 1e-9).ceil().max(0.0) as usize;
    let delta = match need {
        0 => sorted[0] - 1.0,
        j if j >= n => sorted[n - 1] + 1.0,
        j => 0.5 * (sorted[j - 1] + sorted[j]),
    };
    delta.clamp(-MAX_SEPARATION, MAX_SEPARATION)
}

fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    Matrix::new(rows, cols, data).expect("shape")
}

/// `dim × k` embedding with orthonormal columns when `dim ≥ k`; otherwise a
/// scaled Gaussian projection.
fn embedding(rng: &mut ChaCha8Rng, dim: usize, k: usize) -> DMatrix<f64> {
    let g = normal_matrix(rng, dim, k);
    let m = DMatrix::from_row_slice(dim, k, g.as_slice());
    if dim >= k {
        m.qr().q()
    } else {
        m / (dim as f64).sqrt()
    }
}

pub fn generate_synthetic(spec: &SynthSpec) -> Result<SyntheticDataset> {
    spec.validate()?;
    let k = spec.num_classes;
    let sizes = spec.num_videos;
    let layout = [
        (Subset::Train, "train", sizes.train),
        (Subset::Validation, "val", sizes.validation),
        (Subset::Test, "test", sizes.test),
    ];

    let mut meta_rng = keyed_rng(TAG_META, spec.seed, 0);
    let mut entries = Vec::new();
    for (subset, prefix, count) in layout {
        for i in 0..count {
            entries.push(VideoRecord {
                video_id: format!("{prefix}_{i:06}"),
                subset,
                label: Some(i % k),
                num_frames: meta_rng.random_range(MIN_FRAMES..=MAX_FRAMES),
                proposals: None,
            });
        }
    }
    let n = entries.len();
    let labels: Vec<usize> = entries.iter().map(|e| e.label.unwrap_or(0)).collect();
    let ids: Vec<String> = entries.iter().map(|e| e.video_id.clone()).collect();

    let mut shared_rng = keyed_rng(TAG_SHARED, spec.seed, 0);
    let shared = normal_matrix(&mut shared_rng, n, k);
    let rho = spec.complementarity;
    let (ws, wp) = (rho.sqrt(), (1.0 - rho).sqrt());

    let val_range = sizes.train..sizes.train + sizes.validation;
    let test_range = val_range.end..n;

    let mut streams = Vec::with_capacity(spec.streams.len());
    for s in &spec.streams {
        let mut private_rng = keyed_rng(TAG_PRIVATE, spec.seed, s.noise_seed);
        let private = normal_matrix(&mut private_rng, n, k);
        let z = Matrix::new(
            n,
            k,
            shared
                .as_slice()
                .iter()
                .zip(private.as_slice())
                .map(|(g, e)| ws * g + wp * e)
                .collect(),
        )?;

        // margin each video's true class must overcome
        let deficit: Vec<f64> = (0..n)
            .map(|i| {
                let row = z.row(i);
                let off = (0..k)
                    .filter(|&c| c != labels[i])
                    .map(|c| row[c])
                    .fold(f64::NEG_INFINITY, f64::max);
                off - row[labels[i]]
            })
            .collect();
        let separation = if s.target_accuracy >= 1.0 {
            // perfect ranking whatever the draws
            let worst = deficit.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            MAX_SEPARATION.max(worst + 1.0)
        } else if val_range.is_empty() {
            separation_for_accuracy(s.target_accuracy, k)?
        } else {
            empirical_separation(&deficit[val_range.clone()], s.target_accuracy)
        };

        let mut scores = z;
        for (i, &y) in labels.iter().enumerate() {
            let v = scores.get(i, y) + separation;
            scores.set(i, y, v);
        }

        let mut embed_rng = keyed_rng(TAG_EMBED, spec.seed, s.noise_seed);
        let q = embedding(&mut embed_rng, s.dim, k);
        let mut feats = Matrix::zeros(n, s.dim);
        for i in 0..n {
            let row = scores.row(i);
            let out = feats.row_mut(i);
            for (d, o) in out.iter_mut().enumerate() {
                *o = (0..k).map(|c| q[(d, c)] * row[c]).sum();
            }
        }

        let subset_scores = |range: std::ops::Range<usize>| -> Result<ScoreMatrix> {
            let rows: Vec<usize> = range.collect();
            let sub_ids = rows.iter().map(|&i| ids[i].clone()).collect();
            ScoreMatrix::new(s.name.clone(), sub_ids, scores.select_rows(&rows))
        };
        streams.push(SyntheticStream {
            name: s.name.clone(),
            target_accuracy: s.target_accuracy,
            separation,
            validation_scores: subset_scores(val_range.clone())?,
            test_scores: subset_scores(test_range.clone())?,
            features: FeatureSet::video_level(&ids, &feats)?,
        });
    }

    Ok(SyntheticDataset {
        manifest: DatasetManifest {
            class_names: spec.class_names(),
            entries,
        },
        streams,
    })
}

/// Fraction of rows whose highest score (ties to the lowest class) is the label.
pub fn top1_of(scores: &ScoreMatrix, labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = labels
        .iter()
        .enumerate()
        .filter(|&(i, &y)| {
            let row = scores.row(i);
            let mut best = 0;
            for c in 1..row.len() {
                if row[c] > row[best] {
                    best = c;
                }
            }
            best == y
        })
        .count();
    hits as f64 / labels.len() as f64
}

/// Files written by [`write_synthetic`].
#[derive(Debug, Clone)]
pub struct SyntheticFiles {
    pub manifest: PathBuf,
    /// `(stream, validation scores, test scores, features)`.
    pub streams: Vec<(String, PathBuf, PathBuf, PathBuf)>,
}

/// Writes `manifest.json`, `<stream>.validation.scores.csv`,
/// `<stream>.test.scores.csv` and `<stream>.fmat` (+ index) into `dir`.
pub fn write_synthetic(dataset: &SyntheticDataset, dir: impl AsRef<Path>) -> Result<SyntheticFiles> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = dir.join("manifest.json");
    write_manifest(&dataset.manifest, &manifest)?;
    let names = &dataset.manifest.class_names;
    let mut streams = Vec::new();
    for s in &dataset.streams {
        let val = dir.join(format!("{}.validation.scores.csv", s.name));
        let test = dir.join(format!("{}.test.scores.csv", s.name));
        let feats = dir.join(format!("{}.fmat", s.name));
        write_scores(&s.validation_scores, names, &val)?;
        write_scores(&s.test_scores, names, &test)?;
        write_features(&s.features, &feats)?;
        streams.push((s.name.clone(), val, test, feats));
    }
    Ok(SyntheticFiles { manifest, streams })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(k: usize, targets: &[f64], rho: f64, val: usize, seed: u64) -> SynthSpec {
        SynthSpec {
            num_classes: k,
            class_names: None,
            num_videos: SubsetSizes {
                train: 2 * k,
                validation: val,
                test: k,
            },
            streams: targets
                .iter()
                .enumerate()
                .map(|(i, &t)| SynthStreamSpec {
                    name: format!("s{i}"),
                    dim: k + 2,
                    target_accuracy: t,
                    noise_seed: 100 + i as u64,
                })
                .collect(),
            complementarity: rho,
            seed,
        }
    }

    #[test]
    fn accuracy_curve_endpoints() {
        for k in [2, 4, 20] {
            assert!((realized_accuracy(0.0, k) - 1.0 / k as f64).abs() < 1e-9);
            assert!(realized_accuracy(MAX_SEPARATION, k) > 1.0 - 1e-12);
        }
        // K=2: P(z1 + δ > z2) = Φ(δ/√2)
        let n = Normal::standard();
        assert!((realized_accuracy(1.0, 2) - n.cdf(1.0 / 2f64.sqrt())).abs() < 1e-9);
    }

    #[test]
    fn separation_hits_target() {
        for t in [0.3, 0.57, 0.72, 0.95] {
            let d = separation_for_accuracy(t, 20).unwrap();
            assert!((realized_accuracy(d, 20) - t).abs() < 1e-9);
        }
        assert!(matches!(
            separation_for_accuracy(0.1, 4),
            Err(Error::InfeasibleTarget { .. })
        ));
    }

    #[test]
    fn perfect_stream() {
        let d = generate_synthetic(&spec(7, &[1.0], 0.3, 70, 5)).unwrap();
        let labels = d.manifest.labels_for(d.streams[0].validation_scores.video_ids()).unwrap();
        assert_eq!(top1_of(&d.streams[0].validation_scores, &labels), 1.0);
    }

    #[test]
    fn full_sharing_gives_identical_errors() {
        let mut sp = spec(5, &[0.5, 0.5], 1.0, 200, 3);
        sp.streams[1].noise_seed = 999;
        let d = generate_synthetic(&sp).unwrap();
        assert_eq!(d.streams[0].validation_scores.scores(), d.streams[1].validation_scores.scores());
    }

    #[test]
    fn realized_near_target() {
        let d = generate_synthetic(&spec(20, &[0.57, 0.72], 0.5, 4000, 11)).unwrap();
        for s in &d.streams {
            let labels = d.manifest.labels_for(s.validation_scores.video_ids()).unwrap();
            let acc = top1_of(&s.validation_scores, &labels);
            assert!((acc - s.target_accuracy).abs() <= 0.03, "{acc} vs {}", s.target_accuracy);
        }
    }

    #[test]
    fn deterministic_and_well_formed() {
        let sp = spec(4, &[0.6], 0.5, 40, 9);
        let (a, b) = (generate_synthetic(&sp).unwrap(), generate_synthetic(&sp).unwrap());
        assert_eq!(a.manifest, b.manifest);
        assert_eq!(a.streams[0].features, b.streams[0].features);
        assert!(a.manifest.ensure_valid().is_ok());
        assert_eq!(a.streams[0].features.dim(), 6);
        assert_eq!(a.streams[0].features.unit_count(), 8 + 40 + 4);
        assert_eq!(a.manifest.entries[8].video_id, "val_000000");
    }

    #[test]
    fn invalid_specs() {
        assert!(generate_synthetic(&spec(1, &[1.0], 0.5, 10, 0)).is_err());
        assert!(matches!(
            generate_synthetic(&spec(4, &[0.2], 0.5, 10, 0)),
            Err(Error::InfeasibleTarget { .. })
        ));
        assert!(generate_synthetic(&spec(4, &[0.5], 1.5, 10, 0)).is_err());
        let mut zero_dim = spec(4, &[0.5], 0.5, 10, 0);
        zero_dim.streams[0].dim = 0;
        assert!(generate_synthetic(&zero_dim).is_err());
    }
}
