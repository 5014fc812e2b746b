//! Iterative pairwise weighted late fusion.
//!
//! Streams are ordered (by validation accuracy unless an explicit order is
//! given). The first two are averaged with weights `ratio : 1`; each later
//! stream is then averaged into the running result, the running result
//! always taking the larger weight.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::datamodel::{Matrix, ScoreMatrix, StreamMeta};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamOrder {
    ByValidationAccuracy,
    Explicit(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    pub weight_ratio: f64,
    pub order: StreamOrder,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            weight_ratio: 2.0,
            order: StreamOrder::ByValidationAccuracy,
        }
    }
}

/// Left operand of a fusion step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operand {
    Stream(String),
    /// Output of an earlier step, by index.
    Step(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionStep {
    pub left: Operand,
    pub right: String,
    /// Normalized weights (`left_weight + right_weight = 1`).
    pub left_weight: f64,
    pub right_weight: f64,
}

/// Audit trail of the exact fold order and weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionPlan {
    pub streams: Vec<StreamMeta>,
    pub steps: Vec<FusionStep>,
}

/// A score matrix together with its ordering metadata.
#[derive(Debug, Clone)]
pub struct ScoredStream {
    pub scores: ScoreMatrix,
    pub meta: StreamMeta,
}

fn check_alignment(streams: &[ScoredStream]) -> Result<()> {
    let first = &streams[0].scores;
    for s in &streams[1..] {
        first.ensure_aligned(&s.scores)?;
    }
    Ok(())
}

pub fn plan_fusion(streams: &[ScoredStream], config: &FusionConfig) -> Result<FusionPlan> {
    if streams.is_empty() {
        return Err(Error::EmptyInput("fusion needs at least one stream".into()));
    }
    if !(config.weight_ratio > 0.0 && config.weight_ratio.is_finite()) {
        return Err(Error::invalid("weight ratio must be positive"));
    }
    check_alignment(streams)?;
    let mut by_name: HashMap<&str, &StreamMeta> = HashMap::new();
    for s in streams {
        if by_name.insert(&s.meta.stream_name, &s.meta).is_some() {
            return Err(Error::invalid(format!("duplicate stream {:?}", s.meta.stream_name)));
        }
    }

    let ordered: Vec<StreamMeta> = match &config.order {
        StreamOrder::ByValidationAccuracy => {
            let mut metas: Vec<StreamMeta> = streams.iter().map(|s| s.meta.clone()).collect();
            metas.sort_by(|a, b| {
                b.validation_accuracy
                    .total_cmp(&a.validation_accuracy)
                    .then_with(|| a.stream_name.cmp(&b.stream_name))
            });
            metas
        }
        StreamOrder::Explicit(names) => {
            if names.len() != streams.len() {
                return Err(Error::invalid(format!(
                    "explicit order lists {} streams but {} were given",
                    names.len(),
                    streams.len()
                )));
            }
            let mut used = std::collections::HashSet::new();
            names
                .iter()
                .map(|n| {
                    if !used.insert(n.as_str()) {
                        return Err(Error::invalid(format!("stream {n:?} listed twice")));
                    }
                    by_name
                        .get(n.as_str())
                        .map(|m| (*m).clone())
                        .ok_or_else(|| Error::UnknownStream(n.clone()))
                })
                .collect::<Result<_>>()?
        }
    };

    let total = config.weight_ratio + 1.0;
    let (lw, rw) = (config.weight_ratio / total, 1.0 / total);
    let steps = ordered
        .iter()
        .skip(1)
        .enumerate()
        .map(|(i, meta)| FusionStep {
            left: if i == 0 {
                Operand::Stream(ordered[0].stream_name.clone())
            } else {
                Operand::Step(i - 1)
            },
            right: meta.stream_name.clone(),
            left_weight: lw,
            right_weight: rw,
        })
        .collect();
    Ok(FusionPlan {
        streams: ordered,
        steps,
    })
}

/// `(w1·s1 + w2·s2) / (w1 + w2)` elementwise.
pub fn fuse_pair(s1: &ScoreMatrix, s2: &ScoreMatrix, w1: f64, w2: f64) -> Result<ScoreMatrix> {
    if !(w1 > 0.0 && w2 > 0.0 && w1.is_finite() && w2.is_finite()) {
        return Err(Error::invalid("fusion weights must be positive"));
    }
    s1.ensure_aligned(s2)?;
    let (a, b) = (w1 / (w1 + w2), w2 / (w1 + w2));
    let data = s1
        .scores()
        .as_slice()
        .iter()
        .zip(s2.scores().as_slice())
        .map(|(x, y)| a * x + b * y)
        .collect();
    let fused = Matrix::new(s1.num_videos(), s1.num_classes(), data)?;
    let name = format!("{}+{}", s1.stream_name, s2.stream_name);
    let out = ScoreMatrix::new(name.clone(), s1.video_ids().to_vec(), fused)?;
    if s1.is_normalized() && s2.is_normalized() && out.is_row_stochastic() {
        return ScoreMatrix::new_normalized(name, out.video_ids().to_vec(), out.scores().clone());
    }
    Ok(out)
}

/// Folds the plan's steps in order. A single-stream plan returns that stream.
pub fn execute_plan(plan: &FusionPlan, streams: &[ScoredStream]) -> Result<ScoreMatrix> {
    let lookup: HashMap<&str, &ScoreMatrix> = streams
        .iter()
        .map(|s| (s.meta.stream_name.as_str(), &s.scores))
        .collect();
    let get = |name: &str| {
        lookup
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownStream(name.to_string()))
    };
    if plan.steps.is_empty() {
        let only = plan
            .streams
            .first()
            .ok_or_else(|| Error::EmptyInput("empty fusion plan".into()))?;
        return Ok(get(&only.stream_name)?.clone());
    }
    let mut outputs: Vec<ScoreMatrix> = Vec::with_capacity(plan.steps.len());
    for step in &plan.steps {
        let left = match &step.left {
            Operand::Stream(name) => get(name)?,
            Operand::Step(i) => outputs
                .get(*i)
                .ok_or_else(|| Error::invalid(format!("step refers to later step {i}")))?,
        };
        let fused = fuse_pair(left, get(&step.right)?, step.left_weight, step.right_weight)?;
        outputs.push(fused);
    }
    Ok(outputs.pop().expect("non-empty").with_name("fused"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(name: &str, acc: f64, rows: &[[f64; 2]]) -> ScoredStream {
        let ids = (0..rows.len()).map(|i| format!("v{i}")).collect();
        ScoredStream {
            scores: ScoreMatrix::new(name, ids, Matrix::from_rows(rows).unwrap()).unwrap(),
            meta: StreamMeta::new(name, acc).unwrap(),
        }
    }

    #[test]
    fn table_one_order() {
        let rows = [[0.5, 0.5]];
        let streams = vec![
            stream("MBH", 0.5732, &rows),
            stream("C3D", 0.6004, &rows),
            stream("GoogLeNet", 0.6713, &rows),
            stream("VGG16", 0.6319, &rows),
            stream("ResNet", 0.7181, &rows),
        ];
        let plan = plan_fusion(&streams, &FusionConfig::default()).unwrap();
        let names: Vec<&str> = plan.streams.iter().map(|m| m.stream_name.as_str()).collect();
        assert_eq!(names, ["ResNet", "GoogLeNet", "VGG16", "C3D", "MBH"]);
        assert_eq!(plan.steps.len(), 4);
        assert_eq!(plan.steps[0].left, Operand::Stream("ResNet".into()));
        assert_eq!(plan.steps[3].left, Operand::Step(2));
        for s in &plan.steps {
            assert!((s.left_weight - 2.0 / 3.0).abs() < 1e-15);
            assert!((s.right_weight - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn single_stream_passthrough() {
        let s = vec![stream("a", 0.4, &[[0.1, 0.9]])];
        let plan = plan_fusion(&s, &FusionConfig::default()).unwrap();
        assert!(plan.steps.is_empty());
        assert_eq!(execute_plan(&plan, &s).unwrap().row(0), &[0.1, 0.9]);
    }

    #[test]
    fn tie_goes_to_lexicographic_first() {
        let s = vec![stream("b", 0.5, &[[1.0, 0.0]]), stream("a", 0.5, &[[0.0, 1.0]])];
        let plan = plan_fusion(&s, &FusionConfig::default()).unwrap();
        assert_eq!(plan.steps[0].left, Operand::Stream("a".into()));
        assert_eq!(plan.steps[0].right, "b");
    }

    #[test]
    fn pair_arithmetic() {
        let a = stream("a", 0.0, &[[0.6, 0.4]]).scores;
        let b = stream("b", 0.0, &[[0.2, 0.8]]).scores;
        let f = fuse_pair(&a, &b, 2.0, 1.0).unwrap();
        assert!((f.row(0)[0] - 1.4 / 3.0).abs() < 1e-15);
        assert!((f.row(0)[1] - 1.6 / 3.0).abs() < 1e-15);
        let same = fuse_pair(&a, &a, 5.0, 0.3).unwrap();
        for (x, y) in same.row(0).iter().zip(a.row(0)) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn explicit_order_and_errors() {
        let s = vec![stream("a", 0.9, &[[1.0, 0.0]]), stream("b", 0.1, &[[0.0, 1.0]])];
        let cfg = FusionConfig {
            order: StreamOrder::Explicit(vec!["b".into(), "a".into()]),
            ..FusionConfig::default()
        };
        let plan = plan_fusion(&s, &cfg).unwrap();
        assert_eq!(plan.steps[0].left, Operand::Stream("b".into()));
        let bad = FusionConfig {
            order: StreamOrder::Explicit(vec!["b".into(), "c".into()]),
            ..FusionConfig::default()
        };
        assert!(matches!(plan_fusion(&s, &bad), Err(Error::UnknownStream(_))));
        let misaligned = vec![s[0].clone(), stream("c", 0.2, &[[0.5, 0.5], [0.5, 0.5]])];
        assert!(plan_fusion(&misaligned, &FusionConfig::default()).is_err());
        let json = serde_json::to_string(&plan).unwrap();
        let back: FusionPlan = serde_json::from_str(&json).unwrap();
        assert_eq!(back, plan);
    }
}
