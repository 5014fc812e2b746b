//! Pooling and vector normalizations.

use crate::datamodel::Matrix;
use crate::error::{Error, Result};

/// Elementwise signed square root.
pub fn power_normalize(v: &mut [f64]) {
    for x in v {
        *x = x.signum() * x.abs().sqrt();
    }
}

/// L2-normalizes each consecutive `block_len` slice independently.
/// All-zero blocks are left as zeros.
pub fn intra_normalize(v: &mut [f64], block_len: usize) {
    assert!(block_len > 0 && v.len().is_multiple_of(block_len));
    for block in v.chunks_exact_mut(block_len) {
        let norm = block.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in block {
                *x /= norm;
            }
        }
    }
}

/// Divides by the sum of absolute values.
pub fn l1_normalize(v: &mut [f64]) -> Result<()> {
    let total: f64 = v.iter().map(|x| x.abs()).sum();
    if total == 0.0 {
        return Err(Error::ZeroVector);
    }
    for x in v {
        *x /= total;
    }
    Ok(())
}

/// Column means.
pub fn mean_pool(rows: &Matrix) -> Result<Vec<f64>> {
    if rows.rows() == 0 {
        return Err(Error::EmptyInput("mean pooling needs at least one row".into()));
    }
    let mut acc = vec![0.0; rows.cols()];
    for row in rows.iter_rows() {
        for (a, x) in acc.iter_mut().zip(row) {
            *a += x;
        }
    }
    let n = rows.rows() as f64;
    for a in &mut acc {
        *a /= n;
    }
    Ok(acc)
}
