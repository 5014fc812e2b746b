//! L2-regularized squared-hinge linear SVM trained by dual coordinate descent.
//!
//! For labels `y_i ∈ {±1}` and augmented inputs `x̂_i = (x_i, 1)` the primal is
//!
//! ```text
//! min_w  ½‖w‖² + C Σ_i max(0, 1 − y_i w·x̂_i)²
//! ```
//!
//! and the dual, with `Q̄_ij = y_i y_j x̂_i·x̂_j + δ_ij / (2C)`,
//!
//! ```text
//! min_{α ≥ 0}  ½ αᵀ Q̄ α − Σ_i α_i,        w = Σ_i α_i y_i x̂_i.
//! ```
//!
//! Each coordinate step solves the one-dimensional dual exactly and clips at
//! zero, so every iterate stays feasible.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datamodel::{FeatureSet, Matrix, ScoreMatrix, UnitKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    #[serde(rename = "C")]
    pub c: f64,
    /// Stop once the largest projected-gradient magnitude of an epoch
    /// falls below this value.
    pub tolerance: f64,
    pub max_epochs: usize,
    /// Seeds the per-epoch coordinate permutation.
    pub seed: u64,
    /// Append a constant-1 feature (a regularized bias).
    pub bias: bool,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c: 1.0,
            tolerance: 1e-3,
            max_epochs: 1000,
            seed: 0,
            bias: true,
        }
    }
}

impl SvmConfig {
    pub fn with_c(c: f64) -> Self {
        SvmConfig {
            c,
            ..SvmConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::invalid(format!("SVM C must be positive, got {}", self.c)));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::invalid("SVM tolerance must be positive"));
        }
        if self.max_epochs == 0 {
            return Err(Error::invalid("SVM max_epochs must be >= 1"));
        }
        Ok(())
    }
}

/// Outcome of one binary solve.
#[derive(Debug, Clone)]
pub struct BinarySolution {
    /// Length `d + 1` when the bias is enabled (bias last), else `d`.
    pub weights: Vec<f64>,
    pub alpha: Vec<f64>,
    pub primal: f64,
    /// Dual objective in its maximization form, so `dual <= primal`.
    pub dual: f64,
    pub epochs: usize,
    pub converged: bool,
    /// Per-epoch `(dual, primal)` when tracing was requested.
    pub history: Vec<(f64, f64)>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn augmented_dot(w: &[f64], x: &[f64], bias: bool) -> f64 {
    let lin = dot(&w[..x.len()], x);
    if bias {
        lin + w[x.len()]
    } else {
        lin
    }
}

/// Primal objective of `w` on `(x, y)`.
pub fn primal_objective(w: &[f64], x: &Matrix, y: &[f64], c: f64, bias: bool) -> f64 {
    let loss: f64 = x
        .iter_rows()
        .zip(y)
        .map(|(row, &yi)| (1.0 - yi * augmented_dot(w, row, bias)).max(0.0).powi(2))
        .sum();
    0.5 * dot(w, w) + c * loss
}

fn dual_objective(w: &[f64], alpha: &[f64], c: f64) -> f64 {
    let sum: f64 = alpha.iter().sum();
    let sq: f64 = alpha.iter().map(|a| a * a).sum();
    sum - 0.5 * dot(w, w) - sq / (4.0 * c)
}

/// Solves one ±1 problem. `stream` selects an independent permutation
/// stream so per-class solves do not depend on each other's order.
pub fn train_binary(x: &Matrix, y: &[f64], config: &SvmConfig, stream: u64, trace: bool) -> Result<BinarySolution> {
    config.validate()?;
    let (n, d) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(Error::Misaligned(format!("{} labels for {n} rows", y.len())));
    }
    if n == 0 {
        return Err(Error::EmptyInput("no training examples".into()));
    }
    let c = config.c;
    let diag = 1.0 / (2.0 * c);
    let width = if config.bias { d + 1 } else { d };
    let mut w = vec![0.0; width];
    let mut alpha = vec![0.0; n];
    let qd: Vec<f64> = x
        .iter_rows()
        .map(|r| dot(r, r) + if config.bias { 1.0 } else { 0.0 } + diag)
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(stream);

    let mut history = Vec::new();
    let mut epochs = 0;
    let mut converged = false;
    while epochs < config.max_epochs {
        epochs += 1;
        order.shuffle(&mut rng);
        let mut max_pg: f64 = 0.0;
        for &i in &order {
            let row = x.row(i);
            let g = y[i] * augmented_dot(&w, row, config.bias) - 1.0 + diag * alpha[i];
            let pg = if alpha[i] == 0.0 { g.min(0.0) } else { g };
            max_pg = max_pg.max(pg.abs());
            if pg.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = (old - g / qd[i]).max(0.0);
                let step = (alpha[i] - old) * y[i];
                for (wj, xj) in w.iter_mut().zip(row) {
                    *wj += step * xj;
                }
                if config.bias {
                    w[d] += step;
                }
            }
        }
        if trace {
            history.push((dual_objective(&w, &alpha, c), primal_objective(&w, x, y, c, config.bias)));
        }
        if max_pg < config.tolerance {
            converged = true;
            break;
        }
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("SVM weights became non-finite".into()));
    }
    Ok(BinarySolution {
        primal: primal_objective(&w, x, y, c, config.bias),
        dual: dual_objective(&w, &alpha, c),
        weights: w,
        alpha,
        epochs,
        converged,
        history,
    })
}

/// One-vs-rest linear model.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub class_names: Vec<String>,
    /// `K × (d + 1)`; the last column is the bias (zero when disabled).
    pub weights: Matrix,
    pub config: SvmConfig,
    /// Final primal objective of each per-class problem.
    pub training_objective: Vec<f64>,
    pub epochs: Vec<usize>,
    pub converged: Vec<bool>,
}

impl SvmModel {
    pub fn num_classes(&self) -> usize {
        self.weights.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.weights.cols() - 1
    }

    /// Raw margins `w_c · (x, 1)`, one row per input row.
    pub fn decision_function(&self, x: &Matrix) -> Result<Matrix> {
        let d = self.input_dim();
        if x.cols() != d {
            return Err(Error::DimMismatch {
                expected: d,
                found: x.cols(),
            });
        }
        let k = self.num_classes();
        let mut out = Matrix::zeros(x.rows(), k);
        for (i, row) in x.iter_rows().enumerate() {
            for c in 0..k {
                let w = self.weights.row(c);
                out.set(i, c, dot(&w[..d], row) + w[d]);
            }
        }
        Ok(out)
    }
}

/// Trains one binary problem per class (that class against the rest).
pub fn svm_train(x: &Matrix, labels: &[usize], class_names: &[String], config: &SvmConfig) -> Result<SvmModel> {
    config.validate()?;
    let k = class_names.len();
    if labels.len() != x.rows() {
        return Err(Error::Misaligned(format!(
            "{} labels for {} feature rows",
            labels.len(),
            x.rows()
        )));
    }
    if k < 2 {
        return Err(Error::invalid("one-vs-rest training needs at least 2 classes"));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite {
            context: "SVM training features".into(),
        });
    }
    let mut counts = vec![0usize; k];
    for &l in labels {
        *counts
            .get_mut(l)
            .ok_or_else(|| Error::invalid(format!("label {l} outside [0, {k})")))? += 1;
    }
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::SingleClass);
    }
    if let Some(missing) = counts.iter().position(|&c| c == 0) {
        return Err(Error::MissingClass(class_names[missing].clone()));
    }

    let solutions = (0..k)
        .into_par_iter()
        .map(|class| {
            let y: Vec<f64> = labels
                .iter()
                .map(|&l| if l == class { 1.0 } else { -1.0 })
                .collect();
            train_binary(x, &y, config, class as u64, false)
        })
        .collect::<Result<Vec<_>>>()?;

    let d = x.cols();
    let mut weights = Matrix::zeros(k, d + 1);
    for (c, sol) in solutions.iter().enumerate() {
        weights.row_mut(c)[..sol.weights.len()].copy_from_slice(&sol.weights);
    }
    Ok(SvmModel {
        class_names: class_names.to_vec(),
        weights,
        config: config.clone(),
        training_objective: solutions.iter().map(|s| s.primal).collect(),
        epochs: solutions.iter().map(|s| s.epochs).collect(),
        converged: solutions.iter().map(|s| s.converged).collect(),
    })
}

/// Raw-margin scores for every video of a video-level feature set.
pub fn svm_predict(model: &SvmModel, features: &FeatureSet, stream_name: &str) -> Result<ScoreMatrix> {
    if features.unit_kind() != UnitKind::Video || features.spans().iter().any(|s| s.count != 1) {
        return Err(Error::invalid("prediction needs one feature row per video"));
    }
    let margins = model.decision_function(&features.to_matrix())?;
    ScoreMatrix::new(
        stream_name,
        features.video_ids().map(str::to_string).collect(),
        margins,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_problem(n: usize, d: usize, seed: u64) -> (Matrix, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Matrix::new(n, d, (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let y = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        (x, y)
    }

    #[test]
    fn one_dimensional_closed_form() {
        let x = Matrix::from_rows(&[[1.0], [-1.0]]).unwrap();
        let y = [1.0, -1.0];
        for c in [1.0, 100.0] {
            let cfg = SvmConfig {
                c,
                tolerance: 1e-10,
                max_epochs: 100_000,
                bias: false,
                ..SvmConfig::default()
            };
            let sol = train_binary(&x, &y, &cfg, 0, false).unwrap();
            assert!(sol.converged);
            assert!((sol.weights[0] - 4.0 * c / (1.0 + 4.0 * c)).abs() < 1e-6);
        }
    }

    #[test]
    fn duplicated_data_equals_doubled_c() {
        let (x, y) = random_problem(12, 4, 3);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut yy = Vec::new();
        for (r, &l) in x.iter_rows().zip(&y) {
            rows.push(r.to_vec());
            rows.push(r.to_vec());
            yy.extend([l, l]);
        }
        let x2 = Matrix::from_rows(&rows).unwrap();
        let tight = |c| SvmConfig { c, tolerance: 1e-10, max_epochs: 100_000, ..SvmConfig::default() };
        let a = train_binary(&x2, &yy, &tight(0.7), 0, false).unwrap();
        let b = train_binary(&x, &y, &tight(1.4), 0, false).unwrap();
        for (p, q) in a.weights.iter().zip(&b.weights) {
            assert!((p - q).abs() < 1e-6);
        }
    }

    #[test]
    fn dual_monotone_and_weakly_dual() {
        let (x, y) = random_problem(30, 5, 8);
        let sol = train_binary(&x, &y, &SvmConfig::with_c(3.0), 0, true).unwrap();
        assert!(sol.alpha.iter().all(|&a| a >= 0.0));
        let mut prev = f64::NEG_INFINITY;
        for &(dual, primal) in &sol.history {
            assert!(dual >= prev - 1e-9);
            assert!(dual <= primal + 1e-6);
            prev = dual;
        }
    }

    #[test]
    fn class_order_is_irrelevant() {
        let (x, _) = random_problem(24, 3, 1);
        let labels: Vec<usize> = (0..24).map(|i| i % 3).collect();
        let names: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
        let m = svm_train(&x, &labels, &names, &SvmConfig::default()).unwrap();
        // training class 2 alone reproduces row 2
        let y: Vec<f64> = labels.iter().map(|&l| if l == 2 { 1.0 } else { -1.0 }).collect();
        let sol = train_binary(&x, &y, &SvmConfig::default(), 2, false).unwrap();
        assert_eq!(m.weights.row(2), &sol.weights[..]);
    }

    #[test]
    fn predict_examples() {
        let model = SvmModel {
            class_names: vec!["a".into(), "b".into()],
            weights: Matrix::from_rows(&[[1.0, 2.0, 0.5], [-1.0, 0.0, -0.25]]).unwrap(),
            config: SvmConfig::default(),
            training_objective: vec![0.0, 0.0],
            epochs: vec![0, 0],
            converged: vec![true, true],
        };
        let zero = model.decision_function(&Matrix::zeros(1, 2)).unwrap();
        assert_eq!(zero.row(0), &[0.5, -0.25]);
        let x = Matrix::from_rows(&[[0.3, -1.2], [2.0, 0.5]]).unwrap();
        let got = model.decision_function(&x).unwrap();
        for i in 0..2 {
            for c in 0..2 {
                let w = model.weights.row(c);
                let want = w[0] * x.get(i, 0) + w[1] * x.get(i, 1) + w[2];
                assert!((got.get(i, c) - want).abs() < 1e-10);
            }
        }
        let mut zeros = model.clone();
        zeros.weights = Matrix::zeros(2, 3);
        assert!(zeros.decision_function(&x).unwrap().as_slice().iter().all(|&v| v == 0.0));
        assert!(model.decision_function(&Matrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn training_errors() {
        let (x, _) = random_problem(6, 2, 0);
        let names: Vec<String> = ["a", "b"].map(String::from).to_vec();
        assert!(matches!(
            svm_train(&x, &[0; 6], &names, &SvmConfig::default()),
            Err(Error::SingleClass)
        ));
        let three: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
        assert!(matches!(
            svm_train(&x, &[0, 1, 0, 1, 0, 1], &three, &SvmConfig::default()),
            Err(Error::MissingClass(_))
        ));
        let mut bad = x.clone();
        bad.set(0, 0, f64::NAN);
        assert!(svm_train(&bad, &[0, 1, 0, 1, 0, 1], &names, &SvmConfig::default()).is_err());
        assert!(SvmConfig::with_c(0.0).validate().is_err());
    }
}
