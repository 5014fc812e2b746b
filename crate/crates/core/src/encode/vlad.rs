//! VLAD-k aggregation of local descriptors.
//!
//! Each descriptor contributes its residual to every one of its `k` nearest
//! centers (unweighted). The accumulated `num_centers × dim` vector is then
//! power-normalized and intra-normalized per center block. No global L2
//! normalization follows.

use crate::datamodel::Matrix;
use crate::encode::kmeans::{squared_distance, Codebook};
use crate::encode::norm::{intra_normalize, power_normalize};
use crate::error::{Error, Result};

/// Indices of the `k` nearest centers in increasing distance; equal
/// distances are ordered by center index.
pub fn nearest_centers(codebook: &Codebook, x: &[f64], k: usize) -> Vec<usize> {
    if k == 0 {
        return Vec::new();
    }
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    for (j, c) in codebook.centers.iter_rows().enumerate() {
        let d = squared_distance(x, c);
        if best.len() == k && d >= best[k - 1].0 {
            continue;
        }
        let pos = best.partition_point(|&(bd, _)| bd <= d);
        best.insert(pos, (d, j));
        best.truncate(k);
    }
    best.into_iter().map(|(_, j)| j).collect()
}

fn check(descriptors: &Matrix, codebook: &Codebook, k: usize) -> Result<()> {
    if descriptors.rows() == 0 {
        return Err(Error::EmptyInput("VLAD needs at least one descriptor".into()));
    }
    if descriptors.cols() != codebook.dim() {
        return Err(Error::DimMismatch {
            expected: codebook.dim(),
            found: descriptors.cols(),
        });
    }
    if k == 0 || k > codebook.num_centers() {
        return Err(Error::invalid(format!(
            "VLAD k = {k} must lie in [1, {}]",
            codebook.num_centers()
        )));
    }
    Ok(())
}

/// Accumulated residuals before any normalization.
pub fn vlad_k_residuals(descriptors: &Matrix, codebook: &Codebook, k: usize) -> Result<Vec<f64>> {
    check(descriptors, codebook, k)?;
    let dim = codebook.dim();
    let mut out = vec![0.0; codebook.num_centers() * dim];
    for x in descriptors.iter_rows() {
        for j in nearest_centers(codebook, x, k) {
            let block = &mut out[j * dim..(j + 1) * dim];
            for ((b, xi), ci) in block.iter_mut().zip(x).zip(codebook.centers.row(j)) {
                *b += xi - ci;
            }
        }
    }
    Ok(out)
}

/// Power- and intra-normalized VLAD-k vector of length `num_centers · dim`.
pub fn vlad_k_encode(descriptors: &Matrix, codebook: &Codebook, k: usize) -> Result<Vec<f64>> {
    let mut v = vlad_k_residuals(descriptors, codebook, k)?;
    power_normalize(&mut v);
    intra_normalize(&mut v, codebook.dim());
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_centers() -> Codebook {
        Codebook::new(Matrix::from_rows(&[[0.0, 0.0], [10.0, 10.0]]).unwrap()).unwrap()
    }

    #[test]
    fn single_assignment() {
        let x = Matrix::from_rows(&[[1.0, 0.0]]).unwrap();
        assert_eq!(vlad_k_residuals(&x, &two_centers(), 1).unwrap(), [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(vlad_k_encode(&x, &two_centers(), 1).unwrap(), [1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn both_centers_with_k2() {
        let x = Matrix::from_rows(&[[1.0, 0.0]]).unwrap();
        assert_eq!(
            vlad_k_residuals(&x, &two_centers(), 2).unwrap(),
            [1.0, 0.0, -9.0, -10.0]
        );
        let v = vlad_k_encode(&x, &two_centers(), 2).unwrap();
        let (a, b) = (3.0f64, 10f64.sqrt());
        let n = (a * a + b * b).sqrt();
        assert!((v[2] + a / n).abs() < 1e-12 && (v[3] + b / n).abs() < 1e-12);
    }

    #[test]
    fn tie_prefers_low_index() {
        let book = Codebook::new(Matrix::from_rows(&[[2.0], [-2.0], [0.0], [2.0]]).unwrap()).unwrap();
        assert_eq!(nearest_centers(&book, &[0.0], 3), [2, 0, 1]);
        assert_eq!(nearest_centers(&book, &[2.0], 2), [0, 3]);
    }

    #[test]
    fn errors() {
        let x = Matrix::from_rows(&[[1.0, 0.0]]).unwrap();
        assert!(vlad_k_encode(&x, &two_centers(), 3).is_err());
        assert!(vlad_k_encode(&x, &two_centers(), 0).is_err());
        let bad = Matrix::from_rows(&[[1.0, 0.0, 0.0]]).unwrap();
        assert!(matches!(
            vlad_k_encode(&bad, &two_centers(), 1),
            Err(Error::DimMismatch { .. })
        ));
        assert!(vlad_k_encode(&Matrix::zeros(0, 2), &two_centers(), 1).is_err());
    }
}
