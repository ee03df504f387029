//! Embedding quality metrics: Gaussian-kernel density comparisons (DTM, KL
//! divergence) and rank-based neighborhood preservation (Trustworthiness,
//! Continuity, MRREs).

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::Serialize;

use crate::{Error, Result};

/// Options for the density-based metrics.
#[derive(Debug, Clone, Copy, Default)]
pub struct DensityOptions {
    /// Divide each space's pairwise distance matrix by its maximum before
    /// applying the kernel. Used for benchmark-style comparisons where the
    /// two spaces have incommensurate scales.
    pub normalize_distances: bool,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Per-point kernel density f_σ(x) = Σ_y exp(-dist(x,y)²/σ), including the
/// self term exp(0) = 1.
pub fn density_estimate(points: ArrayView2<f64>, sigma: f64) -> Vec<f64> {
    let n = points.nrows();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let pi = points.row(i);
            let pi = pi.as_slice().unwrap();
            (0..n)
                .map(|j| {
                    let d2 = squared_distance(pi, points.row(j).as_slice().unwrap());
                    (-d2 / sigma).exp()
                })
                .sum()
        })
        .collect()
}

fn max_squared_distance(points: ArrayView2<f64>) -> f64 {
    let n = points.nrows();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let pi = points.row(i);
            let pi = pi.as_slice().unwrap();
            (i + 1..n)
                .map(|j| squared_distance(pi, points.row(j).as_slice().unwrap()))
                .fold(0.0_f64, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// Density normalized to a probability vector, with optional min-max
/// distance normalization (distances divided by the space's maximum).
fn normalized_density(points: ArrayView2<f64>, sigma: f64, opts: DensityOptions) -> Vec<f64> {
    let scale = if opts.normalize_distances {
        let m = max_squared_distance(points);
        if m > 0.0 {
            m
        } else {
            1.0
        }
    } else {
        1.0
    };
    let n = points.nrows();
    let raw: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let pi = points.row(i);
            let pi = pi.as_slice().unwrap();
            (0..n)
                .map(|j| {
                    let d2 = squared_distance(pi, points.row(j).as_slice().unwrap()) / scale;
                    (-d2 / sigma).exp()
                })
                .sum::<f64>()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|f| f / total).collect()
}

/// Total absolute difference between the normalized density vectors of the
/// data and the embedding.
pub fn dtm(
    data: ArrayView2<f64>,
    embedding: ArrayView2<f64>,
    sigma: f64,
    opts: DensityOptions,
) -> f64 {
    let fx = normalized_density(data, sigma, opts);
    let fz = normalized_density(embedding, sigma, opts);
    fx.iter().zip(fz.iter()).map(|(x, z)| (x - z).abs()).sum()
}

/// KL divergence KL(f̄X ‖ f̄Z) between the normalized density vectors.
/// Both are strictly positive thanks to the unit self term.
pub fn kl_density(
    data: ArrayView2<f64>,
    embedding: ArrayView2<f64>,
    sigma: f64,
    opts: DensityOptions,
) -> f64 {
    let fx = normalized_density(data, sigma, opts);
    let fz = normalized_density(embedding, sigma, opts);
    fx.iter()
        .zip(fz.iter())
        .map(|(x, z)| if *x > 0.0 { x * (x / z).ln() } else { 0.0 })
        .sum()
}

/// Full n×n matrix of neighbor ranks: `ranks[[i, j]]` is the rank of j among
/// all points by ascending distance from i (1 = nearest, ties by ascending
/// index); the diagonal is 0 and unused.
#[derive(Debug, Clone)]
pub struct RankMatrix {
    pub ranks: Array2<u32>,
}

/// Neighbor order and ranks of a single row.
fn row_order_and_ranks(points: ArrayView2<f64>, i: usize) -> (Vec<usize>, Vec<u32>) {
    let n = points.nrows();
    let pi = points.row(i);
    let pi = pi.as_slice().unwrap();
    let mut order: Vec<(f64, usize)> = (0..n)
        .filter(|&j| j != i)
        .map(|j| (squared_distance(pi, points.row(j).as_slice().unwrap()), j))
        .collect();
    order.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let order: Vec<usize> = order.into_iter().map(|(_, j)| j).collect();
    let mut ranks = vec![0u32; n];
    for (r, &j) in order.iter().enumerate() {
        ranks[j] = (r + 1) as u32;
    }
    (order, ranks)
}

pub fn rank_matrix(points: ArrayView2<f64>) -> RankMatrix {
    let n = points.nrows();
    let rows: Vec<Vec<u32>> = (0..n)
        .into_par_iter()
        .map(|i| row_order_and_ranks(points, i).1)
        .collect();
    let mut ranks = Array2::<u32>::zeros((n, n));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, r) in row.into_iter().enumerate() {
            ranks[[i, j]] = r;
        }
    }
    RankMatrix { ranks }
}

fn check_local_k(n: usize, k: usize) -> Result<()> {
    if k == 0 || 2 * k >= n {
        return Err(Error::InvalidParameter(format!(
            "local metrics require 1 <= k < n/2, got k={k}, n={n}"
        )));
    }
    Ok(())
}

#[derive(Default, Clone, Copy)]
struct LocalAccum {
    trust_penalty: f64,
    conti_penalty: f64,
    mrre_x_error: f64,
    mrre_z_error: f64,
}

fn local_accumulate(data: ArrayView2<f64>, embedding: ArrayView2<f64>, k: usize) -> LocalAccum {
    let n = data.nrows();
    let per_row: Vec<LocalAccum> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (order_x, ranks_x) = row_order_and_ranks(data, i);
            let (order_z, ranks_z) = row_order_and_ranks(embedding, i);
            let knn_x: std::collections::HashSet<usize> = order_x[..k].iter().copied().collect();
            let knn_z: std::collections::HashSet<usize> = order_z[..k].iter().copied().collect();
            let mut acc = LocalAccum::default();
            for &j in &order_z[..k] {
                if !knn_x.contains(&j) {
                    acc.trust_penalty += ranks_x[j] as f64 - k as f64;
                }
                let (rx, rz) = (ranks_x[j] as f64, ranks_z[j] as f64);
                acc.mrre_z_error += (rx - rz).abs() / rz;
            }
            for &j in &order_x[..k] {
                if !knn_z.contains(&j) {
                    acc.conti_penalty += ranks_z[j] as f64 - k as f64;
                }
                let (rx, rz) = (ranks_x[j] as f64, ranks_z[j] as f64);
                acc.mrre_x_error += (rx - rz).abs() / rx;
            }
            acc
        })
        .collect();
    let mut total = LocalAccum::default();
    for acc in per_row {
        total.trust_penalty += acc.trust_penalty;
        total.conti_penalty += acc.conti_penalty;
        total.mrre_x_error += acc.mrre_x_error;
        total.mrre_z_error += acc.mrre_z_error;
    }
    total
}

fn venna_kaski_factor(n: usize, k: usize) -> f64 {
    2.0 / (n as f64 * k as f64 * (2.0 * n as f64 - 3.0 * k as f64 - 1.0))
}

/// Penalizes embedding neighbors that are not data neighbors, weighted by
/// their data-space rank excess (Venna-Kaski normalization).
pub fn trustworthiness(data: ArrayView2<f64>, embedding: ArrayView2<f64>, k: usize) -> Result<f64> {
    check_local_k(data.nrows(), k)?;
    let acc = local_accumulate(data, embedding, k);
    Ok(1.0 - venna_kaski_factor(data.nrows(), k) * acc.trust_penalty)
}

/// Mirror of [`trustworthiness`]: penalizes data neighbors missing from the
/// embedding neighborhood, ranked in embedding space.
pub fn continuity(data: ArrayView2<f64>, embedding: ArrayView2<f64>, k: usize) -> Result<f64> {
    check_local_k(data.nrows(), k)?;
    let acc = local_accumulate(data, embedding, k);
    Ok(1.0 - venna_kaski_factor(data.nrows(), k) * acc.conti_penalty)
}

/// Mean relative rank errors, reported as (1 - E_X, 1 - E_Z) so larger is
/// better (Lee-Verleysen normalization).
pub fn mrre(data: ArrayView2<f64>, embedding: ArrayView2<f64>, k: usize) -> Result<(f64, f64)> {
    let n = data.nrows();
    check_local_k(n, k)?;
    let acc = local_accumulate(data, embedding, k);
    let norm: f64 = n as f64
        * (1..=k)
            .map(|l| ((n as f64) - 2.0 * l as f64 + 1.0).abs() / l as f64)
            .sum::<f64>();
    Ok((1.0 - acc.mrre_x_error / norm, 1.0 - acc.mrre_z_error / norm))
}

#[derive(Debug, Clone, Serialize)]
pub struct SigmaMetric {
    pub sigma: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricParams {
    pub k: usize,
    pub sigmas: Vec<f64>,
    pub normalize_distances: bool,
}

/// Named scalar results with the parameters that produced them.
#[derive(Debug, Clone, Serialize)]
pub struct MetricReport {
    pub dtm: Vec<SigmaMetric>,
    pub kl: Vec<SigmaMetric>,
    pub trustworthiness: f64,
    pub continuity: f64,
    pub mrre_x: f64,
    pub mrre_z: f64,
    pub params: MetricParams,
}

impl MetricReport {
    pub fn dtm_at(&self, sigma: f64) -> Option<f64> {
        self.dtm.iter().find(|m| m.sigma == sigma).map(|m| m.value)
    }

    pub fn kl_at(&self, sigma: f64) -> Option<f64> {
        self.kl.iter().find(|m| m.sigma == sigma).map(|m| m.value)
    }
}

/// Computes all six metric families for an index-aligned data/embedding pair.
pub fn evaluate(
    data: ArrayView2<f64>,
    embedding: ArrayView2<f64>,
    k: usize,
    sigmas: &[f64],
    opts: DensityOptions,
) -> Result<MetricReport> {
    if data.nrows() != embedding.nrows() {
        return Err(Error::InvalidParameter(format!(
            "data has {} rows but embedding has {}",
            data.nrows(),
            embedding.nrows()
        )));
    }
    let mut dtm_values = Vec::new();
    let mut kl_values = Vec::new();
    for &sigma in sigmas {
        dtm_values.push(SigmaMetric { sigma, value: dtm(data, embedding, sigma, opts) });
        kl_values.push(SigmaMetric { sigma, value: kl_density(data, embedding, sigma, opts) });
    }
    let acc = local_accumulate(data, embedding, k);
    check_local_k(data.nrows(), k)?;
    let n = data.nrows();
    let vk = venna_kaski_factor(n, k);
    let norm: f64 = n as f64
        * (1..=k)
            .map(|l| ((n as f64) - 2.0 * l as f64 + 1.0).abs() / l as f64)
            .sum::<f64>();
    Ok(MetricReport {
        dtm: dtm_values,
        kl: kl_values,
        trustworthiness: 1.0 - vk * acc.trust_penalty,
        continuity: 1.0 - vk * acc.conti_penalty,
        mrre_x: 1.0 - acc.mrre_x_error / norm,
        mrre_z: 1.0 - acc.mrre_z_error / norm,
        params: MetricParams {
            k,
            sigmas: sigmas.to_vec(),
            normalize_distances: opts.normalize_distances,
        },
    })
}
