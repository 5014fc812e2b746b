#![allow(dead_code)]

use latefuse_core::{Matrix, ScoreMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Matrix::new(rows, cols, data).unwrap()
}

/// Rows on the probability simplex.
pub fn simplex_scores(rng: &mut ChaCha8Rng, name: &str, rows: usize, cols: usize) -> ScoreMatrix {
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        let raw: Vec<f64> = (0..cols).map(|_| -rng.random_range(1e-9f64..1.0).ln()).collect();
        let total: f64 = raw.iter().sum();
        data.extend(raw.into_iter().map(|v| v / total));
    }
    let ids = (0..rows).map(|i| format!("v{i}")).collect();
    ScoreMatrix::new(name, ids, Matrix::new(rows, cols, data).unwrap()).unwrap()
}

pub fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("v{i}")).collect()
}
