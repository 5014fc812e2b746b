//! Principal component analysis (centering only, no whitening).

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::datamodel::Matrix;
use crate::error::{Error, Result};

/// Input dimension above which the covariance matrix is never materialized.
pub const DENSE_SOLVER_MAX_DIM: usize = 1024;
/// Relative residual at which subspace iteration stops.
pub const SUBSPACE_TOLERANCE: f64 = 1e-9;
const SUBSPACE_MAX_ITERS: usize = 1000;
const SUBSPACE_SEED: u64 = 0x70CA_5EED;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `output_dim × input_dim`, orthonormal rows ordered by decreasing variance.
    pub components: Matrix,
    /// Variance captured by each component.
    pub explained_variance: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PcaSolver {
    /// Dense eigendecomposition up to [`DENSE_SOLVER_MAX_DIM`], subspace iteration above.
    #[default]
    Auto,
    Dense,
    Subspace,
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.components.rows()
    }

    /// `(x - mean) · componentsᵀ` for one row.
    pub fn transform_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimMismatch {
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        Ok(self
            .components
            .iter_rows()
            .map(|c| c.iter().zip(&centered).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn transform(&self, data: &Matrix) -> Result<Matrix> {
        if data.cols() != self.input_dim() {
            return Err(Error::DimMismatch {
                expected: self.input_dim(),
                found: data.cols(),
            });
        }
        let mut out = Vec::with_capacity(data.rows() * self.output_dim());
        for row in data.iter_rows() {
            out.extend(self.transform_row(row)?);
        }
        Matrix::new(data.rows(), self.output_dim(), out)
    }
}

pub fn pca_fit(data: &Matrix, out_dim: usize) -> Result<PcaModel> {
    pca_fit_with(data, out_dim, PcaSolver::Auto)
}

pub fn pca_fit_with(data: &Matrix, out_dim: usize, solver: PcaSolver) -> Result<PcaModel> {
    let (n, d) = (data.rows(), data.cols());
    if n < 2 {
        return Err(Error::EmptyInput(format!("PCA needs at least 2 rows, got {n}")));
    }
    if out_dim == 0 {
        return Err(Error::invalid("PCA output dimension must be >= 1"));
    }
    let max = d.min(n);
    if out_dim > max {
        return Err(Error::PcaRankTooLarge {
            requested: out_dim,
            max,
        });
    }
    if !data.is_finite() {
        return Err(Error::NonFinite {
            context: "PCA input".into(),
        });
    }

    let mean: Vec<f64> = (0..d)
        .map(|j| data.iter_rows().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let centered = DMatrix::from_fn(n, d, |i, j| data.get(i, j) - mean[j]);
    if centered.iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("all rows are identical".into()));
    }

    let use_dense = match solver {
        PcaSolver::Auto => d <= DENSE_SOLVER_MAX_DIM,
        PcaSolver::Dense => true,
        PcaSolver::Subspace => false,
    };
    let (vectors, values) = if use_dense {
        dense_top(&centered, out_dim)
    } else {
        subspace_top(&centered, out_dim)?
    };

    let mut components = Matrix::zeros(out_dim, d);
    for (c, v) in vectors.iter().enumerate() {
        let flip = v
            .iter()
            .find(|x| x.abs() > 1e-12)
            .is_some_and(|&x| x < 0.0);
        let sign = if flip { -1.0 } else { 1.0 };
        for (j, &x) in v.iter().enumerate() {
            components.set(c, j, sign * x);
        }
    }
    Ok(PcaModel {
        mean,
        components,
        explained_variance: values.into_iter().map(|v| v.max(0.0)).collect(),
    })
}

fn covariance_scale(centered: &DMatrix<f64>) -> f64 {
    1.0 / (centered.nrows() as f64 - 1.0)
}

/// Sorted (descending) eigenpairs of a symmetric matrix.
fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    // stable: equal eigenvalues keep solver order
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |i, j| {
        eig.eigenvectors[(i, order[j])]
    });
    (values, vectors)
}

fn dense_top(centered: &DMatrix<f64>, r: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let cov = (centered.transpose() * centered) * covariance_scale(centered);
    let (values, vectors) = sorted_eigen(cov);
    let vecs = (0..r)
        .map(|c| vectors.column(c).iter().copied().collect())
        .collect();
    (vecs, values[..r].to_vec())
}

/// Orthogonal subspace iteration with Rayleigh–Ritz extraction. The
/// covariance is applied as `Xᵀ(XQ)` so memory stays `O(n·d + d·p)`.
fn subspace_top(centered: &DMatrix<f64>, r: usize) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let d = centered.ncols();
    let p = d.min(r + (r / 2).max(10));
    let scale = covariance_scale(centered);
    let apply = |q: &DMatrix<f64>| (centered.transpose() * (centered * q)) * scale;

    let mut rng = ChaCha8Rng::seed_from_u64(SUBSPACE_SEED);
    let start = DMatrix::from_fn(d, p, |_, _| StandardNormal.sample(&mut rng));
    let mut q = start.qr().q();

    for _ in 0..SUBSPACE_MAX_ITERS {
        let z = apply(&q);
        let small = q.transpose() * &z;
        let small = (&small + small.transpose()) * 0.5;
        let (values, v) = sorted_eigen(small);
        let ritz = &q * &v;
        let zv = &z * &v;
        let top = values[0].abs().max(f64::MIN_POSITIVE);
        let converged = (0..r).all(|c| {
            let resid = zv.column(c) - ritz.column(c) * values[c];
            resid.norm() <= SUBSPACE_TOLERANCE * top
        });
        if converged {
            let vecs = (0..r)
                .map(|c| ritz.column(c).iter().copied().collect())
                .collect();
            return Ok((vecs, values[..r].to_vec()));
        }
        q = zv.qr().q();
    }
    Err(Error::Numerical(format!(
        "PCA subspace iteration did not reach tolerance {SUBSPACE_TOLERANCE} in {SUBSPACE_MAX_ITERS} iterations"
    )))
}
