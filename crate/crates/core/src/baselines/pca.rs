//! Principal component analysis via the covariance eigendecomposition.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numerics::{covariance, sym_eigen, Matrix};

/// A fitted projection onto the leading `k` principal axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// `k × p`, one unit-norm principal axis per row.
    pub components: Matrix,
    /// All `p` covariance eigenvalues, descending, clamped at 0.
    pub eigenvalues: Vec<f64>,
    /// `eigenvalues / sum(eigenvalues)`.
    pub explained_ratio: Vec<f64>,
}

const RANK_TOL: f64 = 1e-10;

impl Pca {
    /// Fit with every axis retained.
    pub fn fit_all(x: &Matrix) -> Result<Self> {
        if x.rows() < 2 {
            return Err(invalid("PCA needs at least two rows"));
        }
        let eig = sym_eigen(&covariance(x))?;
        let eigenvalues: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0)).collect();
        let total: f64 = eigenvalues.iter().sum();
        let explained_ratio = if total > 0.0 {
            eigenvalues.iter().map(|v| v / total).collect()
        } else {
            vec![0.0; eigenvalues.len()]
        };
        Ok(Self {
            mean: x.column_means(),
            components: eig.eigenvectors.transpose(),
            eigenvalues,
            explained_ratio,
        })
    }

    /// Fit keeping `k` axes; rejects `k` above the numerical rank.
    pub fn fit(x: &Matrix, k: usize) -> Result<Self> {
        let full = Self::fit_all(x)?;
        let rank = full.rank();
        if k == 0 || k > rank {
            return Err(invalid(format!("PCA with k={k} but data rank is {rank}")));
        }
        Ok(full.truncated(k))
    }

    pub fn rank(&self) -> usize {
        let top = self.eigenvalues.first().copied().unwrap_or(0.0);
        self.eigenvalues
            .iter()
            .filter(|&&v| v > RANK_TOL * top.max(f64::MIN_POSITIVE))
            .count()
    }

    pub fn truncated(&self, k: usize) -> Self {
        let p = self.components.cols();
        let k = k.min(self.components.rows());
        let data = self.components.as_slice()[..k * p].to_vec();
        Self {
            components: Matrix::from_vec_unchecked(k, p, data),
            ..self.clone()
        }
    }

    pub fn k(&self) -> usize {
        self.components.rows()
    }

    pub fn transform(&self, rows: &Matrix) -> Result<Matrix> {
        let p = self.mean.len();
        if rows.cols() != p {
            return Err(invalid(format!("PCA expects {p} columns, got {}", rows.cols())));
        }
        let k = self.k();
        let mut out = Vec::with_capacity(rows.rows() * k);
        let mut centred = vec![0.0; p];
        for r in rows.row_iter() {
            for ((c, v), m) in centred.iter_mut().zip(r).zip(&self.mean) {
                *c = v - m;
            }
            for a in 0..k {
                out.push(self.components.row(a).iter().zip(&centred).map(|(w, c)| w * c).sum());
            }
        }
        Ok(Matrix::from_vec_unchecked(rows.rows(), k, out))
    }

    pub fn inverse_transform(&self, scores: &Matrix) -> Result<Matrix> {
        let k = self.k();
        if scores.cols() != k {
            return Err(invalid(format!("PCA scores need {k} columns, got {}", scores.cols())));
        }
        let p = self.mean.len();
        let mut out = Vec::with_capacity(scores.rows() * p);
        for s in scores.row_iter() {
            let mut row = self.mean.clone();
            for (a, &sa) in s.iter().enumerate() {
                for (o, w) in row.iter_mut().zip(self.components.row(a)) {
                    *o += sa * w;
                }
            }
            out.extend(row);
        }
        Ok(Matrix::from_vec_unchecked(scores.rows(), p, out))
    }
}

/// Fit PCA with `k` components.
pub fn pca_fit(x: &Matrix, k: usize) -> Result<Pca> {
    Pca::fit(x, k)
}

pub fn pca_transform(model: &Pca, rows: &Matrix) -> Result<Matrix> {
    model.transform(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::matmul;
    use crate::rng::seeded;
    use rand::Rng;

    fn random(n: usize, p: usize, seed: u64) -> Matrix {
        let mut rng = seeded(seed);
        Matrix::from_vec(n, p, (0..n * p).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn line_y_equals_x() {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, i as f64]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let pca = pca_fit(&x, 1).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((pca.components.get(0, 0) - h).abs() < 1e-12);
        assert!((pca.components.get(0, 1) - h).abs() < 1e-12);
        assert!((pca.explained_ratio[0] - 1.0).abs() < 1e-12);
        assert!(pca_fit(&x, 2).is_err());
    }

    #[test]
    fn full_rank_reconstruction_and_orthonormality() {
        let x = random(50, 6, 1);
        let pca = pca_fit(&x, 6).unwrap();
        let back = pca.inverse_transform(&pca.transform(&x).unwrap()).unwrap();
        assert!(back.max_abs_diff(&x) < 1e-8);
        let ggt = matmul(&pca.components, &pca.components.transpose()).unwrap();
        assert!(ggt.max_abs_diff(&Matrix::identity(6)) < 1e-8);
        assert!(pca.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn scores_match_eigen_oracle() {
        let x = random(20, 5, 2);
        let pca = pca_fit(&x, 3).unwrap();
        let scores = pca.transform(&x).unwrap();
        let eig = sym_eigen(&covariance(&x)).unwrap();
        let means = x.column_means();
        for i in 0..20 {
            for a in 0..3 {
                let v = eig.eigenvector(a);
                let s: f64 = (0..5).map(|j| (x.get(i, j) - means[j]) * v[j]).sum();
                assert!((scores.get(i, a) - s).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn width_mismatch_rejected() {
        let pca = pca_fit(&random(10, 3, 4), 2).unwrap();
        assert!(pca.transform(&random(2, 4, 5)).is_err());
        assert!(pca.inverse_transform(&random(2, 3, 5)).is_err());
    }
}
