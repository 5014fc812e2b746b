//! Top-k accuracy and non-interpolated mean average precision.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::datamodel::ScoreMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopK {
    pub k: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub num_videos: usize,
    pub top1: f64,
    /// Top-3 accuracy (top-K when there are fewer than 3 classes).
    pub top3: f64,
    #[serde(rename = "mAP")]
    pub map: f64,
    /// `None` for classes without positives; those are excluded from mAP.
    pub per_class_ap: Vec<Option<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra_top_k: Option<TopK>,
}

fn check(scores: &ScoreMatrix, labels: &[usize]) -> Result<()> {
    if labels.len() != scores.num_videos() {
        return Err(Error::Misaligned(format!(
            "{} labels for {} scored videos",
            labels.len(),
            scores.num_videos()
        )));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= scores.num_classes()) {
        return Err(Error::invalid(format!(
            "label {l} outside [0, {})",
            scores.num_classes()
        )));
    }
    Ok(())
}

/// Rank (0-based) of `label` within `row`; a tie with a lower class index
/// ranks that class first.
fn rank_of(row: &[f64], label: usize) -> usize {
    let target = row[label];
    row.iter()
        .enumerate()
        .filter(|&(c, &v)| v > target || (v == target && c < label))
        .count()
}

pub fn top_k_accuracy(scores: &ScoreMatrix, labels: &[usize], k: usize) -> Result<f64> {
    check(scores, labels)?;
    if k == 0 || k > scores.num_classes() {
        return Err(Error::invalid(format!(
            "k = {k} must lie in [1, {}]",
            scores.num_classes()
        )));
    }
    if labels.is_empty() {
        return Err(Error::EmptyInput("no videos to evaluate".into()));
    }
    let hits = labels
        .iter()
        .enumerate()
        .filter(|&(i, &l)| rank_of(scores.row(i), l) < k)
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Average precision of one ranking: mean over positives of the precision
/// at that positive's rank.
pub fn average_precision(ranked_relevance: impl IntoIterator<Item = bool>) -> Option<f64> {
    let (mut hits, mut total) = (0usize, 0.0);
    for (rank, relevant) in ranked_relevance.into_iter().enumerate() {
        if relevant {
            hits += 1;
            total += hits as f64 / (rank + 1) as f64;
        }
    }
    (hits > 0).then(|| total / hits as f64)
}

/// Returns `(mAP, per-class AP)`. Per class, videos are ranked by score
/// descending; ties keep input order.
pub fn mean_average_precision(scores: &ScoreMatrix, labels: &[usize]) -> Result<(f64, Vec<Option<f64>>)> {
    check(scores, labels)?;
    let n = scores.num_videos();
    let per_class: Vec<Option<f64>> = (0..scores.num_classes())
        .map(|c| {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| scores.row(b)[c].total_cmp(&scores.row(a)[c]));
            average_precision(order.into_iter().map(|i| labels[i] == c))
        })
        .collect();
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    if present.is_empty() {
        return Err(Error::EmptyInput("no class has a positive video".into()));
    }
    Ok((present.iter().sum::<f64>() / present.len() as f64, per_class))
}

pub fn evaluate(scores: &ScoreMatrix, labels: &[usize]) -> Result<EvalReport> {
    let top1 = top_k_accuracy(scores, labels, 1)?;
    let top3 = top_k_accuracy(scores, labels, 3.min(scores.num_classes()))?;
    let (map, per_class_ap) = mean_average_precision(scores, labels)?;
    Ok(EvalReport {
        num_videos: labels.len(),
        top1,
        top3,
        map,
        per_class_ap,
        extra_top_k: None,
    })
}

/// `Model | Top-1 | Top-3 | mAP` table, percentages with two decimals.
pub fn format_table(rows: &[(String, EvalReport)]) -> String {
    let extra = rows.iter().find_map(|(_, r)| r.extra_top_k.as_ref().map(|t| t.k));
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(5);
    let mut out = String::new();
    let _ = write!(out, "{:<width$} | {:>7} | {:>7}", "Model", "Top-1", "Top-3");
    if let Some(k) = extra {
        let _ = write!(out, " | {:>7}", format!("Top-{k}"));
    }
    let _ = writeln!(out, " | {:>7}", "mAP");
    for (name, r) in rows {
        let _ = write!(
            out,
            "{:<width$} | {:>6.2}% | {:>6.2}%",
            name,
            100.0 * r.top1,
            100.0 * r.top3
        );
        if extra.is_some() {
            match &r.extra_top_k {
                Some(t) => {
                    let _ = write!(out, " | {:>6.2}%", 100.0 * t.accuracy);
                }
                None => {
                    let _ = write!(out, " | {:>7}", "-");
                }
            }
        }
        let _ = writeln!(out, " | {:>6.2}%", 100.0 * r.map);
    }
    out
}
