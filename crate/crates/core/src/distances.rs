//! Pairwise Euclidean and k-NN-graph geodesic distance matrices.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numerics::Matrix;
use crate::par::map_indices;

pub const DEFAULT_NEIGHBORS: usize = 10;

/// Symmetric `n × n` matrix of nonnegative distances with a zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    /// Validates symmetry (exact), zero diagonal and finite nonnegative entries.
    pub fn from_vec(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(invalid(format!("{} entries for a {n}×{n} distance matrix", data.len())));
        }
        for i in 0..n {
            if data[i * n + i] != 0.0 {
                return Err(invalid(format!("nonzero diagonal at {i}")));
            }
            for j in 0..i {
                let v = data[i * n + j];
                if !v.is_finite() || v < 0.0 || v != data[j * n + i] {
                    return Err(invalid(format!("entry ({i}, {j}) is not a symmetric finite distance")));
                }
            }
        }
        Ok(Self { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Row `i` with its zero self-distance removed.
    pub fn row_without_self(&self, i: usize) -> Vec<f64> {
        self.row(i)
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &v)| v)
            .collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Distances among the points `indices`, in that order.
    pub fn submatrix(&self, indices: &[usize]) -> DistanceMatrix {
        let m = indices.len();
        let mut data = Vec::with_capacity(m * m);
        for &a in indices {
            let row = self.row(a);
            data.extend(indices.iter().map(|&b| row[b]));
        }
        DistanceMatrix { n: m, data }
    }
}

#[inline]
pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn pairwise_euclidean(x: &Matrix) -> DistanceMatrix {
    let n = x.rows();
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        let ri = x.row(i);
        for j in 0..i {
            let d = euclidean(ri, x.row(j));
            data[i * n + j] = d;
            data[j * n + i] = d;
        }
    }
    DistanceMatrix { n, data }
}

/// The `k` rows of `x` closest to `point`, as `(index, distance)` sorted by
/// distance then index; `skip` excludes one row (the point itself).
pub(crate) fn nearest(point: &[f64], x: &Matrix, k: usize, skip: Option<usize>) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = x
        .row_iter()
        .enumerate()
        .filter(|&(j, _)| Some(j) != skip)
        .map(|(j, r)| (j, euclidean(point, r)))
        .collect();
    let by_distance = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
    if k < all.len() {
        all.select_nth_unstable_by(k, by_distance);
        all.truncate(k);
    }
    all.sort_by(by_distance);
    all
}

/// Undirected weighted k-nearest-neighbour graph.
#[derive(Debug, Clone)]
pub struct NeighborGraph {
    adjacency: Vec<Vec<(usize, f64)>>,
    /// Edges added to join otherwise disconnected components.
    pub bridges: usize,
}

impl NeighborGraph {
    /// Symmetrised k-NN relation; disconnected components are then joined by
    /// repeatedly adding the shortest edge between two different components.
    pub fn build(x: &Matrix, n_neighbors: usize) -> Result<Self> {
        let n = x.rows();
        if n_neighbors == 0 || n < n_neighbors + 1 {
            return Err(invalid(format!("{n_neighbors} neighbours needs at least {} points, got {n}", n_neighbors + 1)));
        }
        let lists = map_indices(n, |i| nearest(x.row(i), x, n_neighbors, Some(i)));
        let mut adjacency = vec![Vec::new(); n];
        for (i, list) in lists.into_iter().enumerate() {
            for (j, d) in list {
                adjacency[i].push((j, d));
                adjacency[j].push((i, d));
            }
        }
        for a in &mut adjacency {
            a.sort_by(|p, q| p.0.cmp(&q.0).then(p.1.total_cmp(&q.1)));
            a.dedup_by_key(|e| e.0);
        }
        let mut graph = Self { adjacency, bridges: 0 };
        graph.join_components(x);
        Ok(graph)
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    /// Component label of every node.
    pub fn components(&self) -> Vec<usize> {
        let n = self.n();
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        for s in 0..n {
            if label[s] != usize::MAX {
                continue;
            }
            let mut stack = vec![s];
            label[s] = next;
            while let Some(u) = stack.pop() {
                for &(v, _) in &self.adjacency[u] {
                    if label[v] == usize::MAX {
                        label[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        label
    }

    fn join_components(&mut self, x: &Matrix) {
        loop {
            let label = self.components();
            let n = self.n();
            let mut best: Option<(usize, usize, f64)> = None;
            for i in 0..n {
                for j in 0..i {
                    if label[i] != label[j] {
                        let d = euclidean(x.row(i), x.row(j));
                        if best.is_none_or(|(_, _, b)| d < b) {
                            best = Some((i, j, d));
                        }
                    }
                }
            }
            let Some((i, j, d)) = best else { return };
            self.adjacency[i].push((j, d));
            self.adjacency[j].push((i, d));
            self.bridges += 1;
        }
    }

    /// Single-source shortest path lengths.
    pub fn shortest_paths(&self, source: usize) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.n()];
        dist[source] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(Entry(0.0, source));
        while let Some(Entry(d, u)) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &(v, w) in &self.adjacency[u] {
                let nd = d + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Entry(nd, v));
                }
            }
        }
        dist
    }

    /// All-pairs shortest paths. Each pair takes the smaller of its two
    /// directed results so the matrix is exactly symmetric.
    pub fn all_shortest_paths(&self) -> DistanceMatrix {
        let n = self.n();
        let rows = map_indices(n, |s| self.shortest_paths(s));
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..i {
                let d = rows[i][j].min(rows[j][i]);
                data[i * n + j] = d;
                data[j * n + i] = d;
            }
        }
        DistanceMatrix { n, data }
    }
}

/// Min-heap entry ordered by distance.
#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest-path distances over the symmetrised k-NN graph of `x`.
pub fn geodesic(x: &Matrix, n_neighbors: usize) -> Result<DistanceMatrix> {
    Ok(NeighborGraph::build(x, n_neighbors)?.all_shortest_paths())
}
