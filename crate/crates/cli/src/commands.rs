use std::fs;
use std::path::{Path, PathBuf};

use latefuse_core::classify::{normalize_scores, svm_predict, svm_train, SvmConfig};
use latefuse_core::encode::{EncoderSpec, FittedEncoder};
use latefuse_core::eval::{evaluate, format_table, top_k_accuracy, EvalReport, TopK};
use latefuse_core::fusion::{execute_plan, plan_fusion, FusionConfig, FusionPlan, ScoredStream};
use latefuse_core::ingest::{
    generate_synthetic, load_encoder, load_svm, read_features, read_manifest, read_scores,
    save_encoder, save_svm, stream_name_from_path, top1_of, write_features, write_scores, write_synthetic, SynthSpec,
};
use latefuse_core::{DatasetManifest, ScoreMatrix, StreamMeta, Subset};
use log::info;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::cli::{EncodeArgs, EvalArgs, FuseArgs, GenSynthArgs, PipelineArgs, PredictArgs, TrainSvmArgs};
use crate::config::{PipelineConfig, StreamConfig, StreamSource};
use crate::error::{CliError, ExitKind, StageExt};
use crate::pipeline::{labelled_ids, run_pipeline, write_json, PipelineOptions};

fn data_error(stage: &str, message: impl std::fmt::Display) -> CliError {
    CliError {
        stage: stage.into(),
        kind: ExitKind::Data,
        message: message.to_string(),
    }
}

fn read_json<T: DeserializeOwned>(path: &Path, stage: &str) -> Result<T, CliError> {
    let raw = fs::read(path).map_err(|e| data_error(stage, format!("{}: {e}", path.display())))?;
    serde_json::from_slice(&raw).map_err(|e| data_error(stage, format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| data_error("output", format!("{}: {e}", dir.display())))
}

fn print(quiet: bool, text: &str) {
    if !quiet {
        print!("{text}");
    }
}

/// Pipeline configs written next to a generated dataset.
fn synthetic_configs(spec: &SynthSpec, scores: bool) -> PipelineConfig {
    let streams = spec
        .streams
        .iter()
        .map(|s| StreamConfig {
            name: s.name.clone(),
            source: if scores {
                StreamSource::RawScores {
                    validation_scores: format!("{}.validation.scores.csv", s.name).into(),
                    test_scores: (spec.num_videos.test > 0).then(|| format!("{}.test.scores.csv", s.name).into()),
                }
            } else {
                StreamSource::FeatureSvm {
                    features: format!("{}.fmat", s.name).into(),
                    encoder: None,
                    svm_c: 1.0,
                }
            },
            validation_accuracy: None,
        })
        .collect();
    PipelineConfig {
        manifest: "manifest.json".into(),
        output_dir: if scores { "run-scores" } else { "run-features" }.into(),
        seed: spec.seed,
        fusion: FusionConfig::default(),
        streams,
    }
}

/// Rows of `name | target | realized` for a generated dataset.
fn synth_table(dataset: &latefuse_core::ingest::SyntheticDataset) -> Result<String, CliError> {
    let width = dataset.streams.iter().map(|s| s.name.len()).max().unwrap_or(0).max(6);
    let mut out = format!("{:<width$} | {:>7} | {:>8}\n", "Stream", "Target", "Realized");
    for s in &dataset.streams {
        let labels = dataset
            .manifest
            .labels_for(s.validation_scores.video_ids())
            .stage("gen-synth")?;
        out.push_str(&format!(
            "{:<width$} | {:>6.2}% | {:>7.2}%\n",
            s.name,
            100.0 * s.target_accuracy,
            100.0 * top1_of(&s.validation_scores, &labels)
        ));
    }
    Ok(out)
}

pub fn gen_synth(args: &GenSynthArgs, quiet: bool) -> Result<(), CliError> {
    let mut spec: SynthSpec = read_json(&args.config, "gen-synth")?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let dataset = generate_synthetic(&spec).stage("gen-synth")?;
    let files = write_synthetic(&dataset, &args.out).stage("gen-synth")?;
    write_json(&args.out.join("pipeline.scores.json"), &synthetic_configs(&spec, true))?;
    write_json(&args.out.join("pipeline.features.json"), &synthetic_configs(&spec, false))?;
    info!("wrote {} streams and {}", files.streams.len(), files.manifest.display());
    print(quiet, &synth_table(&dataset)?);
    Ok(())
}

fn train_ids(manifest: &DatasetManifest, contains: impl Fn(&str) -> bool) -> Vec<String> {
    labelled_ids(manifest, Subset::Train)
        .into_iter()
        .filter(|id| contains(id))
        .collect()
}

pub fn encode(args: &EncodeArgs) -> Result<(), CliError> {
    let manifest = read_manifest(&args.manifest).stage("ingest")?;
    let features = read_features(&args.features).stage("ingest")?;
    create_dir(&args.out)?;
    let descriptor = match (&args.model, &args.config) {
        (Some(model), _) => model.clone(),
        (None, Some(config)) => {
            let spec: EncoderSpec = read_json(config, "encode")?;
            let train = features
                .select_videos(&train_ids(&manifest, |id| features.contains(id)))
                .stage("encode")?;
            let fitted = FittedEncoder::fit(&spec, &train, &manifest, args.seed).stage("encode")?;
            save_encoder(&fitted, args.out.join(format!("{}.encoder", args.name))).stage("encode")?
        }
        (None, None) => return Err(CliError::usage("encode needs --config or --model")),
    };
    let encoder = load_encoder(&descriptor).stage("encode")?;
    let encoded = encoder.encode(&features, &manifest).stage("encode")?;
    let path = args.out.join(format!("{}.encoded.fmat", args.name));
    write_features(&encoded, &path).stage("encode")?;
    info!("encoded {} videos to dim {} in {}", encoded.spans().len(), encoded.dim(), path.display());
    Ok(())
}

pub fn train_svm(args: &TrainSvmArgs) -> Result<(), CliError> {
    let manifest = read_manifest(&args.manifest).stage("ingest")?;
    let features = read_features(&args.features).stage("ingest")?;
    let ids = train_ids(&manifest, |id| features.contains(id));
    let x = features.select_videos(&ids).stage("train-svm")?;
    if x.spans().iter().any(|s| s.count != 1) {
        return Err(data_error("train-svm", "features are not one row per video; run `encode` first"));
    }
    let labels = manifest.labels_for(&ids).stage("train-svm")?;
    let config = SvmConfig {
        seed: args.seed,
        ..SvmConfig::with_c(args.c)
    };
    let model = svm_train(&x.to_matrix(), &labels, &manifest.class_names, &config).stage("train-svm")?;
    create_dir(&args.out)?;
    let path = save_svm(&model, args.out.join(format!("{}.svm", args.name))).stage("train-svm")?;
    let unconverged = model.converged.iter().filter(|c| !**c).count();
    info!(
        "trained {} classifiers on {} videos ({} hit the epoch limit); wrote {}",
        model.num_classes(),
        ids.len(),
        unconverged,
        path.display()
    );
    Ok(())
}

pub fn predict(args: &PredictArgs) -> Result<(), CliError> {
    let manifest = read_manifest(&args.manifest).stage("ingest")?;
    let features = read_features(&args.features).stage("ingest")?;
    let model = load_svm(&args.model).stage("ingest")?;
    let subset: Subset = args.subset.into();
    let ids: Vec<String> = manifest.videos_in(subset).map(|r| r.video_id.clone()).collect();
    let rows = features.select_videos(&ids).stage("predict")?;
    let margins = svm_predict(&model, &rows, &args.name).stage("predict")?;
    let scores = if args.raw {
        margins
    } else {
        normalize_scores(&margins).stage("predict")?
    };
    create_dir(&args.out)?;
    let path = args.out.join(format!("{}.{}.scores.csv", args.name, subset));
    write_scores(&scores, &manifest.class_names, &path).stage("predict")?;
    info!("scored {} {subset} videos into {}", ids.len(), path.display());
    Ok(())
}

fn named_path(arg: &str) -> (String, PathBuf) {
    match arg.split_once('=') {
        Some((name, path)) => (name.to_string(), PathBuf::from(path)),
        None => {
            let p = PathBuf::from(arg);
            (stream_name_from_path(&p), p)
        }
    }
}

/// Top-1 over the labelled rows of `scores`.
fn labelled_accuracy(scores: &ScoreMatrix, manifest: &DatasetManifest) -> Result<Option<f64>, CliError> {
    let ids: Vec<&String> = scores
        .video_ids()
        .iter()
        .filter(|id| manifest.record(id).is_some_and(|r| r.label.is_some()))
        .collect();
    if ids.is_empty() {
        return Ok(None);
    }
    let sub = scores.select_videos(&ids).stage("fuse")?;
    let labels = manifest.labels_for(&ids).stage("fuse")?;
    Ok(Some(top_k_accuracy(&sub, &labels, 1).stage("fuse")?))
}

pub fn fuse(args: &FuseArgs) -> Result<(), CliError> {
    if !(args.ratio > 0.0 && args.ratio.is_finite()) {
        return Err(CliError::usage("--ratio must be a positive number"));
    }
    let manifest = read_manifest(&args.manifest).stage("ingest")?;
    let mut loaded = Vec::with_capacity(args.scores.len());
    for arg in &args.scores {
        let (name, path) = named_path(arg);
        let scores = read_scores(&path, &manifest.class_names).stage(format!("ingest:{name}"))?;
        loaded.push((name, scores));
    }
    let reference: Vec<String> = loaded[0].1.video_ids().to_vec();
    let mut streams = Vec::with_capacity(loaded.len());
    for (name, scores) in loaded {
        let aligned = scores.select_videos(&reference).stage(format!("fuse:{name}"))?.with_name(name.clone());
        let normalized = latefuse_core::classify::ensure_normalized(&aligned).stage(format!("fuse:{name}"))?;
        let accuracy = match &args.plan {
            Some(_) => 0.0,
            None => match labelled_accuracy(&normalized, &manifest)? {
                Some(a) => a,
                None if matches!(args.order, latefuse_core::fusion::StreamOrder::Explicit(_)) => 0.0,
                None => {
                    return Err(data_error(
                        "fuse",
                        format!("{name}: no labelled videos to order by; pass --order or --plan"),
                    ))
                }
            },
        };
        streams.push(ScoredStream {
            scores: normalized,
            meta: StreamMeta::new(name, accuracy).stage("fuse")?,
        });
    }
    let plan: FusionPlan = match &args.plan {
        Some(p) => read_json(p, "fuse")?,
        None => plan_fusion(
            &streams,
            &FusionConfig {
                weight_ratio: args.ratio,
                order: args.order.clone(),
            },
        )
        .stage("fuse")?,
    };
    let fused = execute_plan(&plan, &streams).stage("fuse")?.with_name(args.name.clone());
    create_dir(&args.out)?;
    write_scores(&fused, &manifest.class_names, args.out.join(format!("{}.scores.csv", args.name))).stage("fuse")?;
    write_json(&args.out.join(format!("{}.plan.json", args.name)), &plan)?;
    let order: Vec<&str> = plan.streams.iter().map(|m| m.stream_name.as_str()).collect();
    info!("fused {} streams in order {}", order.len(), order.join(" > "));
    Ok(())
}

#[derive(Serialize)]
struct NamedReport<'a> {
    name: &'a str,
    #[serde(flatten)]
    report: &'a EvalReport,
}

pub fn eval(args: &EvalArgs, quiet: bool) -> Result<(), CliError> {
    let manifest = read_manifest(&args.manifest).stage("ingest")?;
    let mut rows = Vec::with_capacity(args.scores.len());
    for path in &args.scores {
        let name = stream_name_from_path(path);
        let stage = format!("eval:{name}");
        let scores = read_scores(path, &manifest.class_names).stage(&stage)?;
        let labels = manifest.labels_for(scores.video_ids()).stage(&stage)?;
        let mut report = evaluate(&scores, &labels).stage(&stage)?;
        if let Some(k) = args.k {
            report.extra_top_k = Some(TopK {
                k,
                accuracy: top_k_accuracy(&scores, &labels, k).stage(&stage)?,
            });
        }
        rows.push((name, report));
    }
    if let Some(dir) = &args.out {
        create_dir(dir)?;
        let named: Vec<NamedReport> = rows.iter().map(|(n, r)| NamedReport { name: n, report: r }).collect();
        write_json(&dir.join("eval.json"), &named)?;
    }
    print(quiet, &format_table(&rows));
    Ok(())
}

pub fn pipeline(args: &PipelineArgs, quiet: bool) -> Result<(), CliError> {
    let config = PipelineConfig::load(&args.config)?;
    let fusion = if args.order.is_some() || args.ratio.is_some() {
        let ratio = args.ratio.unwrap_or(config.fusion.weight_ratio);
        if !(ratio > 0.0 && ratio.is_finite()) {
            return Err(CliError::usage("--ratio must be a positive number"));
        }
        Some(FusionConfig {
            weight_ratio: ratio,
            order: args.order.clone().unwrap_or_else(|| config.fusion.order.clone()),
        })
    } else {
        None
    };
    let options = PipelineOptions {
        resume: args.resume,
        seed: args.seed,
        output_dir: args.out.clone(),
        fusion,
        k: args.k,
    };
    let outcome = run_pipeline(&config, &options)?;
    info!("wrote results to {}", outcome.output_dir.display());
    print(quiet, &outcome.table());
    Ok(())
}
