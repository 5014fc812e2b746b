//! End-to-end run: per-stream scoring, fusion, evaluation.
//!
//! Layout of the output directory:
//!
//! ```text
//! <out>/streams/<name>/encoder.json (+ .fmat blocks)   feature_svm with encoder
//! <out>/streams/<name>/encoded.fmat                     feature_svm with encoder
//! <out>/streams/<name>/svm.json, svm.weights.fmat       feature_svm
//! <out>/streams/<name>/{validation,test}.scores.csv     every stream
//! <out>/fusion_plan.json
//! <out>/fused.validation.scores.csv, fused.test.scores.csv
//! <out>/report.json
//! ```
//!
//! With `resume`, fitted encoders, encoded features and SVM models already on
//! disk are reused. Predictions always come from the models as stored on
//! disk, so a resumed run writes the same bytes as a fresh one.

use std::fs;
use std::path::{Path, PathBuf};

use latefuse_core::classify::{ensure_normalized, normalize_scores, svm_predict, svm_train, SvmConfig};
use latefuse_core::encode::{EncoderSpec, FittedEncoder};
use latefuse_core::eval::{evaluate, format_table, top_k_accuracy, EvalReport, TopK};
use latefuse_core::fusion::{execute_plan, plan_fusion, FusionConfig, FusionPlan, ScoredStream};
use latefuse_core::ingest::{
    load_encoder, load_svm, read_features, read_manifest, read_scores, save_encoder, save_svm, write_features,
    write_scores,
};
use latefuse_core::{DatasetManifest, FeatureSet, ScoreMatrix, StreamMeta, Subset, UnitKind};
use log::info;
use serde::Serialize;

use crate::config::{PipelineConfig, StreamConfig, StreamSource};
use crate::error::{CliError, ExitKind, StageExt};

/// Command-line overrides applied on top of a [`PipelineConfig`].
#[derive(Debug, Clone, Default)]
pub struct PipelineOptions {
    pub resume: bool,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub fusion: Option<FusionConfig>,
    /// Extra top-k column in the report.
    pub k: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct StreamResult {
    pub name: String,
    /// Accuracy used to order the fusion (override or measured).
    pub ordering_accuracy: f64,
    pub validation: ScoreMatrix,
    pub test: Option<ScoreMatrix>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub streams: Vec<StreamResult>,
    pub plan: FusionPlan,
    pub fused_validation: ScoreMatrix,
    pub fused_test: Option<ScoreMatrix>,
    /// `(name, report)` rows: every stream, then `fused`.
    pub reports: Vec<(String, EvalReport)>,
    pub output_dir: PathBuf,
}

#[derive(Serialize)]
struct StreamEntry<'a> {
    name: &'a str,
    ordering_accuracy: f64,
    #[serde(flatten)]
    report: &'a EvalReport,
}

#[derive(Serialize)]
struct Report<'a> {
    evaluated_on: Subset,
    streams: Vec<StreamEntry<'a>>,
    fused: &'a EvalReport,
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError {
        stage: "output".into(),
        kind: ExitKind::Data,
        message: format!("{}: {e}", path.display()),
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut json = serde_json::to_vec_pretty(value).map_err(|e| io_error(path, e))?;
    json.push(b'\n');
    fs::write(path, json).map_err(|e| io_error(path, e))
}

pub(crate) fn labelled_ids(manifest: &DatasetManifest, subset: Subset) -> Vec<String> {
    manifest
        .videos_in(subset)
        .filter(|r| r.label.is_some())
        .map(|r| r.video_id.clone())
        .collect()
}

fn subset_ids(manifest: &DatasetManifest, subset: Subset) -> Vec<String> {
    manifest.videos_in(subset).map(|r| r.video_id.clone()).collect()
}

/// Features with exactly one row per video, as the SVM expects.
fn ensure_video_level(features: &FeatureSet, stage: &str) -> Result<(), CliError> {
    if features.unit_kind() != UnitKind::Video || features.spans().iter().any(|s| s.count != 1) {
        return Err(CliError {
            stage: stage.into(),
            kind: ExitKind::Data,
            message: "features are not one row per video; configure an encoder".into(),
        });
    }
    Ok(())
}

/// Fits (or reloads) the encoder and encodes every video in `features`.
pub fn encode_stream(
    spec: &EncoderSpec,
    features: &FeatureSet,
    manifest: &DatasetManifest,
    seed: u64,
    dir: &Path,
    resume: bool,
    stage: &str,
) -> Result<FeatureSet, CliError> {
    let stem = dir.join("encoder");
    let descriptor = latefuse_core::ingest::descriptor_path(&stem);
    if !(resume && descriptor.exists()) {
        let train: Vec<String> = labelled_ids(manifest, Subset::Train)
            .into_iter()
            .filter(|id| features.contains(id))
            .collect();
        let train_set = features.select_videos(&train).stage(stage)?;
        let fitted = FittedEncoder::fit(spec, &train_set, manifest, seed).stage(stage)?;
        save_encoder(&fitted, &stem).stage(stage)?;
    } else {
        info!("{stage}: reusing {}", descriptor.display());
    }
    let encoder = load_encoder(&descriptor).stage(stage)?;

    let encoded_path = dir.join("encoded.fmat");
    if resume && encoded_path.exists() {
        info!("{stage}: reusing {}", encoded_path.display());
        return read_features(&encoded_path).stage(stage);
    }
    let encoded = encoder.encode(features, manifest).stage(stage)?;
    write_features(&encoded, &encoded_path).stage(stage)?;
    Ok(encoded)
}

#[allow(clippy::too_many_arguments)]
fn feature_svm_stream(
    stream: &StreamConfig,
    features_path: &Path,
    encoder: Option<&EncoderSpec>,
    c: f64,
    manifest: &DatasetManifest,
    seed: u64,
    dir: &Path,
    resume: bool,
) -> Result<(ScoreMatrix, Option<ScoreMatrix>), CliError> {
    let name = &stream.name;
    let raw = read_features(features_path).stage(format!("ingest:{name}"))?;
    let features = match encoder {
        Some(spec) => encode_stream(spec, &raw, manifest, seed, dir, resume, &format!("encode:{name}"))?,
        None => raw,
    };

    let stage = format!("train-svm:{name}");
    ensure_video_level(&features, &stage)?;
    let stem = dir.join("svm");
    let descriptor = latefuse_core::ingest::descriptor_path(&stem);
    if !(resume && descriptor.exists()) {
        let train: Vec<String> = labelled_ids(manifest, Subset::Train)
            .into_iter()
            .filter(|id| features.contains(id))
            .collect();
        let x = features.select_videos(&train).stage(&stage)?.to_matrix();
        let labels = manifest.labels_for(&train).stage(&stage)?;
        let config = SvmConfig {
            seed,
            ..SvmConfig::with_c(c)
        };
        let model = svm_train(&x, &labels, &manifest.class_names, &config).stage(&stage)?;
        if model.converged.iter().any(|c| !c) {
            log::warn!("{stage}: some classes reached the epoch limit before converging");
        }
        save_svm(&model, &stem).stage(&stage)?;
    } else {
        info!("{stage}: reusing {}", descriptor.display());
    }
    let model = load_svm(&descriptor).stage(&stage)?;

    let stage = format!("predict:{name}");
    let predict = |ids: &[String]| -> Result<ScoreMatrix, CliError> {
        let rows = features.select_videos(ids).stage(&stage)?;
        let margins = svm_predict(&model, &rows, name).stage(&stage)?;
        normalize_scores(&margins).stage(&stage)
    };
    let validation = predict(&labelled_ids(manifest, Subset::Validation))?;
    let test_ids = subset_ids(manifest, Subset::Test);
    let test = if !test_ids.is_empty() && test_ids.iter().all(|id| features.contains(id)) {
        Some(predict(&test_ids)?)
    } else {
        None
    };
    Ok((validation, test))
}

fn raw_scores_stream(
    stream: &StreamConfig,
    validation_path: &Path,
    test_path: Option<&Path>,
    manifest: &DatasetManifest,
) -> Result<(ScoreMatrix, Option<ScoreMatrix>), CliError> {
    let stage = format!("ingest:{}", stream.name);
    let load = |path: &Path, ids: &[String]| -> Result<ScoreMatrix, CliError> {
        let scores = read_scores(path, &manifest.class_names).stage(&stage)?;
        let aligned = scores.select_videos(ids).stage(&stage)?;
        Ok(ensure_normalized(&aligned).stage(&stage)?.with_name(stream.name.clone()))
    };
    let validation = load(validation_path, &labelled_ids(manifest, Subset::Validation))?;
    let test = match test_path {
        Some(p) => Some(load(p, &subset_ids(manifest, Subset::Test))?),
        None => None,
    };
    Ok((validation, test))
}

fn score_path(dir: &Path, subset: &str) -> PathBuf {
    dir.join(format!("{subset}.scores.csv"))
}

pub fn run_pipeline(config: &PipelineConfig, options: &PipelineOptions) -> Result<PipelineOutcome, CliError> {
    let seed = options.seed.unwrap_or(config.seed);
    let out = options.output_dir.clone().unwrap_or_else(|| config.output_dir.clone());
    let fusion = options.fusion.clone().unwrap_or_else(|| config.fusion.clone());
    fs::create_dir_all(&out).map_err(|e| io_error(&out, e))?;

    let manifest = read_manifest(&config.manifest).stage("ingest:manifest")?;
    let val_ids = labelled_ids(&manifest, Subset::Validation);
    if val_ids.is_empty() {
        return Err(CliError {
            stage: "ingest:manifest".into(),
            kind: ExitKind::Data,
            message: "manifest has no labelled validation videos".into(),
        });
    }
    let val_labels = manifest.labels_for(&val_ids).stage("ingest:manifest")?;

    let mut streams = Vec::with_capacity(config.streams.len());
    for (i, stream) in config.streams.iter().enumerate() {
        info!("stream {}/{}: {}", i + 1, config.streams.len(), stream.name);
        let dir = out.join("streams").join(&stream.name);
        fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
        let (validation, test) = match &stream.source {
            StreamSource::FeatureSvm {
                features,
                encoder,
                svm_c,
            } => feature_svm_stream(stream, features, encoder.as_ref(), *svm_c, &manifest, seed, &dir, options.resume)?,
            StreamSource::RawScores {
                validation_scores,
                test_scores,
            } => raw_scores_stream(stream, validation_scores, test_scores.as_deref(), &manifest)?,
        };
        let stage = format!("output:{}", stream.name);
        write_scores(&validation, &manifest.class_names, score_path(&dir, "validation")).stage(&stage)?;
        if let Some(t) = &test {
            write_scores(t, &manifest.class_names, score_path(&dir, "test")).stage(&stage)?;
        }
        let measured = top_k_accuracy(&validation, &val_labels, 1).stage(format!("eval:{}", stream.name))?;
        streams.push(StreamResult {
            name: stream.name.clone(),
            ordering_accuracy: stream.validation_accuracy.unwrap_or(measured),
            validation,
            test,
        });
    }

    let scored = |pick: &dyn Fn(&StreamResult) -> Option<ScoreMatrix>| -> Result<Option<Vec<ScoredStream>>, CliError> {
        streams
            .iter()
            .map(|s| {
                pick(s)
                    .map(|scores| {
                        Ok(ScoredStream {
                            scores,
                            meta: StreamMeta::new(s.name.clone(), s.ordering_accuracy).stage("fuse")?,
                        })
                    })
                    .transpose()
            })
            .collect::<Result<Option<Vec<_>>, CliError>>()
    };
    let validation_streams = scored(&|s| Some(s.validation.clone()))?.expect("every stream has validation scores");
    let plan = plan_fusion(&validation_streams, &fusion).stage("fuse")?;
    write_json(&out.join("fusion_plan.json"), &plan)?;
    let fused_validation = execute_plan(&plan, &validation_streams).stage("fuse")?;
    write_scores(&fused_validation, &manifest.class_names, out.join("fused.validation.scores.csv")).stage("output")?;
    let fused_test = match scored(&|s| s.test.clone())? {
        Some(test_streams) => {
            let fused = execute_plan(&plan, &test_streams).stage("fuse")?;
            write_scores(&fused, &manifest.class_names, out.join("fused.test.scores.csv")).stage("output")?;
            Some(fused)
        }
        None => None,
    };

    let report_for = |scores: &ScoreMatrix, name: &str| -> Result<EvalReport, CliError> {
        let stage = format!("eval:{name}");
        let mut r = evaluate(scores, &val_labels).stage(&stage)?;
        if let Some(k) = options.k {
            r.extra_top_k = Some(TopK {
                k,
                accuracy: top_k_accuracy(scores, &val_labels, k).stage(&stage)?,
            });
        }
        Ok(r)
    };
    let mut reports = Vec::with_capacity(streams.len() + 1);
    for s in &streams {
        reports.push((s.name.clone(), report_for(&s.validation, &s.name)?));
    }
    reports.push(("fused".to_string(), report_for(&fused_validation, "fused")?));

    let report = Report {
        evaluated_on: Subset::Validation,
        streams: streams
            .iter()
            .zip(&reports)
            .map(|(s, (_, r))| StreamEntry {
                name: &s.name,
                ordering_accuracy: s.ordering_accuracy,
                report: r,
            })
            .collect(),
        fused: &reports[reports.len() - 1].1,
    };
    write_json(&out.join("report.json"), &report)?;

    Ok(PipelineOutcome {
        streams,
        plan,
        fused_validation,
        fused_test,
        reports,
        output_dir: out,
    })
}

impl PipelineOutcome {
    pub fn table(&self) -> String {
        format_table(&self.reports)
    }

    pub fn fused_report(&self) -> &EvalReport {
        &self.reports[self.reports.len() - 1].1
    }

    /// Highest top-1 among the individual streams.
    pub fn best_single_top1(&self) -> f64 {
        self.reports[..self.reports.len() - 1]
            .iter()
            .map(|(_, r)| r.top1)
            .fold(0.0, f64::max)
    }
}
