//! Codebook learning: Lloyd's k-means from a seeded k-means++ start.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::datamodel::Matrix;
use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 100;
/// Largest center displacement (Euclidean) below which Lloyd's iterations stop.
pub const MOVEMENT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    /// `num_centers × dim`.
    pub centers: Matrix,
}

impl Codebook {
    pub fn new(centers: Matrix) -> Result<Self> {
        if centers.rows() == 0 || centers.cols() == 0 {
            return Err(Error::invalid("codebook needs at least one center of dim >= 1"));
        }
        if !centers.is_finite() {
            return Err(Error::NonFinite {
                context: "codebook centers".into(),
            });
        }
        Ok(Codebook { centers })
    }

    pub fn num_centers(&self) -> usize {
        self.centers.rows()
    }

    pub fn dim(&self) -> usize {
        self.centers.cols()
    }

    /// Index of the closest center; ties go to the lowest index.
    pub fn nearest(&self, x: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (j, c) in self.centers.iter_rows().enumerate() {
            let d = squared_distance(x, c);
            if d < best.1 {
                best = (j, d);
            }
        }
        best
    }
}

/// Result of [`kmeans_fit`] with its convergence trace.
#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub codebook: Codebook,
    /// Inertia after each assignment step.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl KMeansFit {
    pub fn inertia(&self) -> f64 {
        self.inertia_history.last().copied().unwrap_or(0.0)
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn kmeans_fit(data: &Matrix, num_centers: usize, seed: u64) -> Result<KMeansFit> {
    let n = data.rows();
    if num_centers == 0 {
        return Err(Error::invalid("number of centers must be >= 1"));
    }
    if n < num_centers {
        return Err(Error::TooFewPoints {
            needed: num_centers,
            got: n,
        });
    }
    if !data.is_finite() {
        return Err(Error::NonFinite {
            context: "k-means input".into(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = plus_plus_init(data, num_centers, &mut rng);
    let dim = data.cols();

    let mut assignment = vec![0usize; n];
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let book = Codebook {
            centers: centers.clone(),
        };
        let mut inertia = 0.0;
        for (i, row) in data.iter_rows().enumerate() {
            let (j, d) = book.nearest(row);
            assignment[i] = j;
            inertia += d;
        }
        history.push(inertia);

        let mut sums = Matrix::zeros(num_centers, dim);
        let mut counts = vec![0usize; num_centers];
        for (i, row) in data.iter_rows().enumerate() {
            counts[assignment[i]] += 1;
            for (s, x) in sums.row_mut(assignment[i]).iter_mut().zip(row) {
                *s += x;
            }
        }
        let mut movement: f64 = 0.0;
        for (j, &count) in counts.iter().enumerate() {
            // an empty cluster keeps its previous center
            if count == 0 {
                continue;
            }
            let inv = 1.0 / count as f64;
            let updated: Vec<f64> = sums.row(j).iter().map(|s| s * inv).collect();
            movement = movement.max(squared_distance(&updated, centers.row(j)).sqrt());
            centers.row_mut(j).copy_from_slice(&updated);
        }
        if movement < MOVEMENT_TOLERANCE {
            converged = true;
            break;
        }
    }
    Ok(KMeansFit {
        codebook: Codebook::new(centers)?,
        inertia_history: history,
        iterations,
        converged,
    })
}

fn plus_plus_init(data: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let n = data.rows();
    let mut centers = Matrix::zeros(k, data.cols());
    let first = rng.random_range(0..n);
    centers.row_mut(0).copy_from_slice(data.row(first));
    let mut dist: Vec<f64> = data
        .iter_rows()
        .map(|r| squared_distance(r, centers.row(0)))
        .collect();
    for c in 1..k {
        let pick = match WeightedIndex::new(&dist) {
            Ok(w) => w.sample(rng),
            // every point already coincides with a center
            Err(_) => rng.random_range(0..n),
        };
        centers.row_mut(c).copy_from_slice(data.row(pick));
        for (d, row) in dist.iter_mut().zip(data.iter_rows()) {
            *d = d.min(squared_distance(row, centers.row(c)));
        }
    }
    centers
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn distinct_points_are_fixed_point() {
        let data = Matrix::from_rows(&[[0.0, 0.0], [3.0, 1.0], [-2.0, 5.0], [7.0, -1.0]]).unwrap();
        let fit = kmeans_fit(&data, 4, 17).unwrap();
        assert_eq!(fit.inertia(), 0.0);
        let mut got: Vec<Vec<f64>> = fit.codebook.centers.iter_rows().map(|r| r.to_vec()).collect();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut want: Vec<Vec<f64>> = data.iter_rows().map(|r| r.to_vec()).collect();
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got, want);
    }

    #[test]
    fn separated_blobs_recover_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise = Normal::new(0.0, 0.5).unwrap();
        let mut rows = Vec::new();
        for (cx, cy) in [(-10.0, 0.0), (10.0, 4.0)] {
            for _ in 0..200 {
                rows.push([cx + noise.sample(&mut rng), cy + noise.sample(&mut rng)]);
            }
        }
        let blob_mean = |range: std::ops::Range<usize>| {
            let m = range.len() as f64;
            let sx: f64 = rows[range.clone()].iter().map(|r| r[0]).sum();
            let sy: f64 = rows[range].iter().map(|r| r[1]).sum();
            [sx / m, sy / m]
        };
        let means = [blob_mean(0..200), blob_mean(200..400)];
        let data = Matrix::from_rows(&rows).unwrap();
        let fit = kmeans_fit(&data, 2, 1).unwrap();
        for m in means {
            let (_, d) = fit.codebook.nearest(&m);
            assert!(d.sqrt() < 0.1);
        }
    }

    #[test]
    fn deterministic_and_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data = Matrix::new(300, 3, (0..900).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let a = kmeans_fit(&data, 8, 99).unwrap();
        let b = kmeans_fit(&data, 8, 99).unwrap();
        assert_eq!(a.codebook, b.codebook);
        assert_eq!(a.inertia_history, b.inertia_history);
        for w in a.inertia_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn too_few_points() {
        let data = Matrix::zeros(3, 2);
        assert!(matches!(
            kmeans_fit(&data, 4, 0),
            Err(Error::TooFewPoints { needed: 4, got: 3 })
        ));
    }

    #[test]
    fn duplicate_points_do_not_panic() {
        let data = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]]).unwrap();
        let fit = kmeans_fit(&data, 2, 0).unwrap();
        assert_eq!(fit.inertia(), 0.0);
    }

    #[test]
    fn nearest_breaks_ties_low() {
        let book = Codebook::new(Matrix::from_rows(&[[1.0, 0.0], [-1.0, 0.0]]).unwrap()).unwrap();
        assert_eq!(book.nearest(&[0.0, 0.0]).0, 0);
    }
}
