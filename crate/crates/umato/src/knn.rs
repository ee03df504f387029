//! Exact k-nearest-neighbor graph construction and per-point calibration of
//! the local metric (ρ, σ) producing symmetric fuzzy edge weights.

use std::collections::HashMap;

use ndarray::Array2;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::{Error, Result};

/// Raw neighbor table: per-row neighbor indices sorted by ascending distance,
/// ties broken by ascending point index.
#[derive(Debug, Clone)]
pub struct NeighborTable {
    pub k: usize,
    pub indices: Array2<usize>,
    pub distances: Array2<f64>,
}

impl NeighborTable {
    pub fn n(&self) -> usize {
        self.indices.nrows()
    }
}

/// Sparse symmetric weight matrix stored as per-node adjacency lists sorted
/// by neighbor index.
#[derive(Debug, Clone)]
pub struct SparseSymmetric {
    n: usize,
    adj: Vec<Vec<(usize, f64)>>,
}

impl SparseSymmetric {
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Self {
        let mut adj = vec![Vec::new(); n];
        for &(i, j, w) in edges {
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
        for list in &mut adj {
            list.sort_unstable_by_key(|&(j, _)| j);
        }
        Self { n, adj }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adj[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self.adj[i].binary_search_by_key(&j, |&(x, _)| x) {
            Ok(pos) => self.adj[i][pos].1,
            Err(_) => 0.0,
        }
    }

    /// Iterates each undirected edge once, with i < j, in sorted order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            self.adj[i]
                .iter()
                .filter(move |&&(j, _)| j > i)
                .map(move |&(j, w)| (i, j, w))
        })
    }
}

/// Calibrated kNN graph: neighbor table plus per-point local metric and the
/// symmetric fuzzy weights derived from it.
#[derive(Debug, Clone)]
pub struct NeighborGraph {
    pub table: NeighborTable,
    pub rho: Vec<f64>,
    pub sigma: Vec<f64>,
    /// True where the calibration target could not be met and σ was clamped
    /// to a search boundary.
    pub sigma_clamped: Vec<bool>,
    pub directed_weights: Array2<f64>,
    pub sym_weights: SparseSymmetric,
}

impl NeighborGraph {
    pub fn n(&self) -> usize {
        self.table.n()
    }

    pub fn k(&self) -> usize {
        self.table.k
    }
}

/// Exact brute-force kNN: row i holds the k points (excluding i) closest to
/// point i in Euclidean distance, ties broken by ascending index.
pub fn build_knn_graph(data: &Dataset, k: usize) -> Result<NeighborTable> {
    let n = data.n();
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!(
            "k must satisfy 1 <= k <= n-1, got k={k}, n={n}"
        )));
    }
    let points = &data.points;
    let rows: Vec<(Vec<usize>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let pi = points.row(i);
            let mut cands: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let d2: f64 = pi
                        .iter()
                        .zip(points.row(j).iter())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    (d2, j)
                })
                .collect();
            let cmp = |a: &(f64, usize), b: &(f64, usize)| {
                a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1))
            };
            cands.select_nth_unstable_by(k - 1, cmp);
            cands.truncate(k);
            cands.sort_unstable_by(cmp);
            let idx: Vec<usize> = cands.iter().map(|&(_, j)| j).collect();
            let dist: Vec<f64> = cands.iter().map(|&(d2, _)| d2.sqrt()).collect();
            (idx, dist)
        })
        .collect();

    let mut indices = Array2::<usize>::zeros((n, k));
    let mut distances = Array2::<f64>::zeros((n, k));
    for (i, (idx, dist)) in rows.into_iter().enumerate() {
        for (c, (&j, &d)) in idx.iter().zip(dist.iter()).enumerate() {
            indices[[i, c]] = j;
            distances[[i, c]] = d;
        }
    }
    Ok(NeighborTable { k, indices, distances })
}

/// Smallest strictly positive neighbor distance; 0 when every distance is 0
/// (all-duplicate neighborhood).
pub fn compute_rho(neighbor_distances: &[f64]) -> f64 {
    neighbor_distances
        .iter()
        .copied()
        .find(|&d| d > 0.0)
        .unwrap_or(0.0)
}

#[derive(Debug, Clone, Copy)]
pub struct SigmaResult {
    pub sigma: f64,
    /// Set when the calibration target was unattainable and σ was clamped.
    pub unattainable: bool,
}

const SIGMA_MAX_ITER: usize = 64;
pub const SIGMA_TOL: f64 = 1e-5;

/// Binary search for the bandwidth σ making the total neighbor affinity equal
/// log2(k). The sum Σ exp(-max(0, d_j - ρ)/σ) is nondecreasing in σ, so the
/// search bisects on σ ∈ [1e-3·meanDist, 1e3·meanDist]; an unattainable
/// target returns the clamped boundary with the flag set.
pub fn compute_sigma(neighbor_distances: &[f64], rho: f64, k: usize, tol: f64) -> SigmaResult {
    let target = (k as f64).log2();
    let adjusted: Vec<f64> = neighbor_distances
        .iter()
        .map(|&d| (d - rho).max(0.0))
        .collect();
    let mean_dist: f64 =
        neighbor_distances.iter().sum::<f64>() / neighbor_distances.len().max(1) as f64;

    let sigma_min = if mean_dist > 0.0 { 1e-3 * mean_dist } else { 1e-3 };
    if adjusted.iter().all(|&d| d == 0.0) {
        // All neighbors at distance ρ: the sum is k for every σ.
        return SigmaResult { sigma: sigma_min, unattainable: true };
    }
    let sigma_max = 1e3 * mean_dist;

    let sum_at = |sigma: f64| -> f64 { adjusted.iter().map(|&d| (-d / sigma).exp()).sum() };

    if sum_at(sigma_min) > target + tol {
        return SigmaResult { sigma: sigma_min, unattainable: true };
    }
    if sum_at(sigma_max) < target - tol {
        return SigmaResult { sigma: sigma_max, unattainable: true };
    }

    let (mut lo, mut hi) = (sigma_min, sigma_max);
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..SIGMA_MAX_ITER {
        mid = 0.5 * (lo + hi);
        let s = sum_at(mid);
        if (s - target).abs() <= tol {
            return SigmaResult { sigma: mid, unattainable: false };
        }
        if s < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let unattainable = (sum_at(mid) - target).abs() > tol;
    SigmaResult { sigma: mid, unattainable }
}

/// Affinity of a directed edge: exp(-max(0, dist - ρ)/σ), in (0, 1].
pub fn directed_weight(dist: f64, rho: f64, sigma: f64) -> f64 {
    (-(dist - rho).max(0.0) / sigma).exp()
}

/// Probabilistic union of the two directed weights per edge:
/// v = v1 + v2 - v1*v2, with missing directions counted as 0.
pub fn symmetrize(indices: &Array2<usize>, directed_weights: &Array2<f64>) -> SparseSymmetric {
    let n = indices.nrows();
    let mut pairs: HashMap<(usize, usize), (f64, f64)> = HashMap::new();
    for i in 0..n {
        for c in 0..indices.ncols() {
            let j = indices[[i, c]];
            let w = directed_weights[[i, c]];
            let key = (i.min(j), i.max(j));
            let entry = pairs.entry(key).or_insert((0.0, 0.0));
            if i < j {
                entry.0 = w;
            } else {
                entry.1 = w;
            }
        }
    }
    let mut edges: Vec<(usize, usize, f64)> = pairs
        .into_iter()
        .map(|((i, j), (w1, w2))| (i, j, w1 + w2 - w1 * w2))
        .collect();
    edges.sort_unstable_by_key(|&(i, j, _)| (i, j));
    SparseSymmetric::from_edges(n, &edges)
}

/// Runs ρ/σ calibration on every row of the table and assembles the full
/// graph with directed and symmetric fuzzy weights.
pub fn calibrate(table: NeighborTable) -> NeighborGraph {
    let n = table.n();
    let k = table.k;
    let per_row: Vec<(f64, SigmaResult, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let row: Vec<f64> = (0..k).map(|c| table.distances[[i, c]]).collect();
            let rho = compute_rho(&row);
            let sig = compute_sigma(&row, rho, k, SIGMA_TOL);
            let weights: Vec<f64> = row
                .iter()
                .map(|&d| {
                    if rho == 0.0 && d == 0.0 {
                        1.0 // all-duplicate neighborhood: maximal affinity
                    } else {
                        directed_weight(d, rho, sig.sigma)
                    }
                })
                .collect();
            (rho, sig, weights)
        })
        .collect();

    let mut rho = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    let mut sigma_clamped = Vec::with_capacity(n);
    let mut directed = Array2::<f64>::zeros((n, k));
    for (i, (r, s, w)) in per_row.into_iter().enumerate() {
        rho.push(r);
        sigma.push(s.sigma);
        sigma_clamped.push(s.unattainable);
        for (c, &wi) in w.iter().enumerate() {
            directed[[i, c]] = wi;
        }
    }
    let sym_weights = symmetrize(&table.indices, &directed);
    NeighborGraph {
        table,
        rho,
        sigma,
        sigma_clamped,
        directed_weights: directed,
        sym_weights,
    }
}
