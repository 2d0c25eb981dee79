use crate::distances::{nearest, DistanceMatrix, NeighborGraph, DEFAULT_NEIGHBORS};
use crate::error::{invalid, Error, Result};
use crate::numerics::{sym_eigen_tridiagonal, Matrix};
use crate::par::map_indices;

/// Classical MDS on k-NN geodesic distances, with a landmark-style
/// extension to unseen rows.
#[derive(Debug, Clone)]
pub struct Isomap {
    pub training: Matrix,
    pub geodesic: DistanceMatrix,
    pub n_neighbors: usize,
    /// Leading eigenvalues of the double-centred squared geodesic matrix.
    pub eigenvalues: Vec<f64>,
    /// Matching unit eigenvectors as columns (`n × k`).
    pub eigenvectors: Matrix,
    /// Fitted coordinates of the training rows.
    pub embedding: Matrix,
    squared_column_means: Vec<f64>,
}

impl Isomap {
    pub fn fit(x: &Matrix, k: usize, n_neighbors: usize) -> Result<Self> {
        let n = x.rows();
        if k == 0 || k >= n {
            return Err(invalid(format!("cannot embed {n} rows into {k} dimensions")));
        }
        let geodesic = NeighborGraph::build(x, n_neighbors)?.all_shortest_paths();
        let sq: Vec<f64> = geodesic.as_slice().iter().map(|d| d * d).collect();
        let col_means: Vec<f64> = (0..n).map(|j| (0..n).map(|i| sq[i * n + j]).sum::<f64>() / n as f64).collect();
        let grand = col_means.iter().sum::<f64>() / n as f64;
        let mut b = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                // rows and columns share means because D is symmetric
                b[i * n + j] = -0.5 * (sq[i * n + j] - col_means[i] - col_means[j] + grand);
            }
        }
        let eig = sym_eigen_tridiagonal(&Matrix::from_vec(n, n, b)?)?;
        let tol = 1e-9 * eig.eigenvalues[0].abs().max(1.0);
        let usable = eig.eigenvalues.iter().take_while(|&&l| l > tol).count();
        if usable < k {
            return Err(Error::EmbeddingRank { requested: k, usable });
        }
        let eigenvalues = eig.eigenvalues[..k].to_vec();
        let mut vectors = Vec::with_capacity(n * k);
        let mut coords = Vec::with_capacity(n * k);
        for i in 0..n {
            for (j, l) in eigenvalues.iter().enumerate() {
                let v = eig.eigenvectors.get(i, j);
                vectors.push(v);
                coords.push(v * l.sqrt());
            }
        }
        Ok(Self {
            training: x.clone(),
            geodesic,
            n_neighbors,
            eigenvalues,
            eigenvectors: Matrix::from_vec(n, k, vectors)?,
            embedding: Matrix::from_vec(n, k, coords)?,
            squared_column_means: col_means,
        })
    }

    pub fn k(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Geodesic distance from an arbitrary point to every training row,
    /// entering the training graph through its nearest training rows.
    pub fn geodesic_to_training(&self, row: &[f64]) -> Vec<f64> {
        let n = self.training.rows();
        let entries = nearest(row, &self.training, self.n_neighbors.min(n), None);
        (0..n)
            .map(|i| {
                entries
                    .iter()
                    .map(|&(e, d)| d + self.geodesic.get(e, i))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    pub fn transform(&self, rows: &Matrix) -> Result<Matrix> {
        if rows.cols() != self.training.cols() {
            return Err(invalid(format!(
                "isomap fitted on {} columns, got {}",
                self.training.cols(),
                rows.cols()
            )));
        }
        let k = self.k();
        let out = map_indices(rows.rows(), |r| {
            let delta = self.geodesic_to_training(rows.row(r));
            (0..k)
                .map(|j| {
                    let scale = -0.5 / self.eigenvalues[j].sqrt();
                    delta
                        .iter()
                        .zip(&self.squared_column_means)
                        .enumerate()
                        .map(|(i, (d, m))| self.eigenvectors.get(i, j) * (d * d - m))
                        .sum::<f64>()
                        * scale
                })
                .collect::<Vec<f64>>()
        });
        Matrix::from_vec(rows.rows(), k, out.into_iter().flatten().collect())
    }
}

pub fn isomap_fit(x: &Matrix, k: usize, n_neighbors: Option<usize>) -> Result<Isomap> {
    Isomap::fit(x, k, n_neighbors.unwrap_or(DEFAULT_NEIGHBORS))
}

pub fn isomap_transform(model: &Isomap, rows: &Matrix) -> Result<Matrix> {
    model.transform(rows)
}
