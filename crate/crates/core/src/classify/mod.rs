//! Linear one-vs-rest classification and score calibration.

mod svm;

pub use svm::{
    primal_objective, svm_predict, svm_train, train_binary, BinarySolution, SvmConfig, SvmModel,
};

use crate::datamodel::{Matrix, ScoreMatrix};
use crate::error::Result;

/// Per-video softmax (temperature 1) with max-shift, making margins
/// commensurable with probability streams.
pub fn normalize_scores(scores: &ScoreMatrix) -> Result<ScoreMatrix> {
    let src = scores.scores();
    let mut out = Matrix::zeros(src.rows(), src.cols());
    for (i, row) in src.iter_rows().enumerate() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        for (o, e) in out.row_mut(i).iter_mut().zip(exps) {
            *o = e / total;
        }
    }
    ScoreMatrix::new_normalized(scores.stream_name.clone(), scores.video_ids().to_vec(), out)
}

/// Keeps row-stochastic streams (e.g. softmax outputs) as they are and
/// softmax-normalizes everything else.
pub fn ensure_normalized(scores: &ScoreMatrix) -> Result<ScoreMatrix> {
    if scores.is_row_stochastic() {
        ScoreMatrix::new_normalized(
            scores.stream_name.clone(),
            scores.video_ids().to_vec(),
            scores.scores().clone(),
        )
    } else {
        normalize_scores(scores)
    }
}
