//! Local phase: eNN initialization from embedded neighbors, outlier-free
//! graph rebuild, penalized negative-sampling SGD, and outlier placement.

use std::collections::VecDeque;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::OptimizationConfig;
use crate::classify::{PointClassification, Role};
use crate::data::Dataset;
use crate::knn::{
    compute_rho, compute_sigma, directed_weight, NeighborGraph, NeighborTable, SparseSymmetric,
    SIGMA_TOL,
};
use crate::{Error, Result};

/// Undirected adjacency with distances derived from the neighbor table.
fn undirected_adjacency(table: &NeighborTable) -> Vec<Vec<(usize, f64)>> {
    let n = table.n();
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for i in 0..n {
        for c in 0..table.k {
            let j = table.indices[[i, c]];
            let d = table.distances[[i, c]];
            adj[i].push((j, d));
            adj[j].push((i, d));
        }
    }
    for list in &mut adj {
        list.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        list.dedup_by_key(|e| e.0);
    }
    adj
}

/// Places every eNN point at the mean of its nearest already-positioned
/// neighbors (up to `enn_init_m` of them) plus small uniform noise, visiting
/// points in BFS order from the hubs so each has at least one positioned
/// neighbor when reached.
pub fn init_enn_positions(
    positions: &mut Array2<f64>,
    classification: &PointClassification,
    graph: &NeighborGraph,
    cfg: &OptimizationConfig,
    noise_scale: f64,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let n = classification.n();
    let adj = undirected_adjacency(&graph.table);
    let mut positioned = vec![false; n];
    for &h in &classification.hubs {
        positioned[h] = true;
    }

    let mut visited = vec![false; n];
    let mut queue: VecDeque<usize> = classification.hubs.iter().copied().collect();
    for &h in &classification.hubs {
        visited[h] = true;
    }
    while let Some(p) = queue.pop_front() {
        if !classification.is_hub(p) {
            let mut cands: Vec<(f64, usize)> = adj[p]
                .iter()
                .filter(|&&(j, _)| positioned[j])
                .map(|&(j, d)| (d, j))
                .collect();
            if cands.is_empty() {
                return Err(Error::Internal(format!(
                    "eNN point {p} reached with no positioned neighbor"
                )));
            }
            cands.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            cands.truncate(cfg.enn_init_m);
            let m = cands.len() as f64;
            let (mut x, mut y) = (0.0, 0.0);
            for &(_, j) in &cands {
                x += positions[[j, 0]] / m;
                y += positions[[j, 1]] / m;
            }
            if noise_scale > 0.0 {
                x += rng.gen_range(-noise_scale..noise_scale);
                y += rng.gen_range(-noise_scale..noise_scale);
            }
            positions[[p, 0]] = x;
            positions[[p, 1]] = y;
            positioned[p] = true;
        }
        for c in 0..graph.table.k {
            let j = graph.table.indices[[p, c]];
            if !visited[j] {
                visited[j] = true;
                queue.push_back(j);
            }
        }
    }
    Ok(())
}

/// Rewrites hub/eNN neighbor rows so they reference only non-outlier points,
/// pulling in the next-nearest non-outliers where entries were dropped, then
/// recalibrates the modified rows and rebuilds the symmetric weights over the
/// hub/eNN subgraph.
pub fn rebuild_knn_without_outliers(
    data: &Dataset,
    graph: &NeighborGraph,
    classification: &PointClassification,
) -> Result<NeighborGraph> {
    let n = graph.n();
    let embedded: Vec<usize> = classification.embedded_points();
    let is_outlier: Vec<bool> = (0..n)
        .map(|i| classification.roles[i] == Role::Outlier)
        .collect();

    let mut k = graph.k();
    if embedded.len() <= k {
        k = embedded.len().saturating_sub(1);
        log::warn!(
            "only {} non-outlier points; shrinking k to {k} for the local phase",
            embedded.len()
        );
        if k == 0 {
            return Err(Error::InvalidParameter(
                "cannot rebuild a neighbor graph over fewer than 2 points".into(),
            ));
        }
    }

    let dist = |i: usize, j: usize| -> f64 {
        data.points
            .row(i)
            .iter()
            .zip(data.points.row(j).iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    };

    let mut indices = Array2::<usize>::zeros((n, k));
    let mut distances = Array2::<f64>::zeros((n, k));
    let mut rho = graph.rho.clone();
    let mut sigma = graph.sigma.clone();
    let mut sigma_clamped = graph.sigma_clamped.clone();
    let mut directed = Array2::<f64>::zeros((n, k));

    for &i in &embedded {
        let mut row: Vec<(f64, usize)> = (0..graph.k())
            .map(|c| (graph.table.distances[[i, c]], graph.table.indices[[i, c]]))
            .filter(|&(_, j)| !is_outlier[j])
            .collect();
        let modified = row.len() != k;
        if row.len() < k {
            let present: std::collections::HashSet<usize> =
                row.iter().map(|&(_, j)| j).collect();
            let mut extra: Vec<(f64, usize)> = embedded
                .iter()
                .copied()
                .filter(|&j| j != i && !present.contains(&j))
                .map(|j| (dist(i, j), j))
                .collect();
            extra.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            extra.truncate(k - row.len());
            row.extend(extra);
            row.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        } else {
            row.truncate(k);
        }
        let dists: Vec<f64> = row.iter().map(|&(d, _)| d).collect();
        if modified {
            rho[i] = compute_rho(&dists);
            let res = compute_sigma(&dists, rho[i], k, SIGMA_TOL);
            sigma[i] = res.sigma;
            sigma_clamped[i] = res.unattainable;
        }
        for (c, &(d, j)) in row.iter().enumerate() {
            indices[[i, c]] = j;
            distances[[i, c]] = d;
            directed[[i, c]] = if rho[i] == 0.0 && d == 0.0 {
                1.0
            } else {
                directed_weight(d, rho[i], sigma[i])
            };
        }
    }

    // Symmetrize over hub/eNN rows only.
    let mut pairs: std::collections::HashMap<(usize, usize), (f64, f64)> =
        std::collections::HashMap::new();
    for &i in &embedded {
        for c in 0..k {
            let j = indices[[i, c]];
            let w = directed[[i, c]];
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

    Ok(NeighborGraph {
        table: NeighborTable { k, indices, distances },
        rho,
        sigma,
        sigma_clamped,
        directed_weights: directed,
        sym_weights: SparseSymmetric::from_edges(n, &edges),
    })
}

/// Movement accounting for the local phase: every applied position update
/// adds its magnitude to the bucket of the point that moved.
#[derive(Debug, Clone, Copy, Default)]
pub struct LocalPhaseStats {
    /// Total movement of hub points over the phase.
    pub hub_displacement: f64,
    /// Total movement of eNN points over the phase.
    pub enn_displacement: f64,
}

impl LocalPhaseStats {
    fn record(&mut self, role: Role, dx: f64, dy: f64) {
        let d = (dx * dx + dy * dy).sqrt();
        match role {
            Role::Hub => self.hub_displacement += d,
            Role::Enn => self.enn_displacement += d,
            Role::Outlier => {}
        }
    }
}

/// Negative-sampling SGD over edges whose head is an eNN point. The tail
/// also moves under attraction, scaled by `hub_penalty` when it is a hub;
/// repulsion from sampled negatives applies to the head only, scaled by
/// `gamma * repulsion_penalty`. Edges are revisited with frequency
/// proportional to their weight; the learning rate decays linearly.
pub fn local_optimize(
    weights: &SparseSymmetric,
    positions: &mut Array2<f64>,
    classification: &PointClassification,
    cfg: &OptimizationConfig,
    rng: &mut ChaCha8Rng,
) -> LocalPhaseStats {
    let mut stats = LocalPhaseStats::default();

    // Directed edge list: head is always an eNN point.
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for (p, q, v) in weights.edges() {
        if classification.roles[p] == Role::Enn {
            edges.push((p, q, v));
        }
        if classification.roles[q] == Role::Enn {
            edges.push((q, p, v));
        }
    }
    if edges.is_empty() {
        return stats;
    }

    let max_v = edges.iter().map(|e| e.2).fold(0.0_f64, f64::max);
    let epochs_per_sample: Vec<f64> = edges.iter().map(|e| max_v / e.2).collect();
    let mut next_sample: Vec<f64> = epochs_per_sample.clone();

    // Negative-sample distribution over embedded points: degree^{3/4}.
    let candidates: Vec<usize> = classification.embedded_points();
    let cumulative: Vec<f64> = candidates
        .iter()
        .scan(0.0, |acc, &p| {
            *acc += (weights.degree(p) as f64).powf(0.75);
            Some(*acc)
        })
        .collect();
    let total_mass = *cumulative.last().unwrap_or(&0.0);

    let clip = |x: f64| x.clamp(-cfg.grad_clip, cfg.grad_clip);

    for epoch in 0..cfg.local_epochs {
        let alpha = cfg.local_learning_rate * (1.0 - epoch as f64 / cfg.local_epochs as f64);
        for (e, &(i, j, v)) in edges.iter().enumerate() {
            if next_sample[e] > (epoch + 1) as f64 {
                continue;
            }
            next_sample[e] += epochs_per_sample[e];

            let dx = positions[[i, 0]] - positions[[j, 0]];
            let dy = positions[[i, 1]] - positions[[j, 1]];
            let d2 = dx * dx + dy * dy;
            if d2 > 0.0 {
                let denom = 1.0 + cfg.a * d2.powf(cfg.b);
                let c = -2.0 * cfg.a * cfg.b * d2.powf(cfg.b - 1.0) * v / denom;
                let gx = clip(c * dx);
                let gy = clip(c * dy);
                positions[[i, 0]] += alpha * gx;
                positions[[i, 1]] += alpha * gy;
                stats.record(classification.roles[i], alpha * gx, alpha * gy);
                let pen = if classification.is_hub(j) { cfg.hub_penalty } else { 1.0 };
                positions[[j, 0]] -= alpha * pen * gx;
                positions[[j, 1]] -= alpha * pen * gy;
                stats.record(classification.roles[j], alpha * pen * gx, alpha * pen * gy);
            }

            if total_mass <= 0.0 {
                continue;
            }
            for _ in 0..cfg.negative_samples {
                // Redraw on self or adjacent picks, then give up.
                let mut pick = None;
                for _ in 0..6 {
                    let r = rng.gen::<f64>() * total_mass;
                    let pos = cumulative.partition_point(|&c| c < r);
                    let cand = candidates[pos.min(candidates.len() - 1)];
                    if cand != i && weights.get(i, cand) == 0.0 {
                        pick = Some(cand);
                        break;
                    }
                }
                let Some(nj) = pick else { continue };
                let dx = positions[[i, 0]] - positions[[nj, 0]];
                let dy = positions[[i, 1]] - positions[[nj, 1]];
                let d2 = dx * dx + dy * dy;
                if d2 == 0.0 {
                    continue;
                }
                let denom = 1.0 + cfg.a * d2.powf(cfg.b);
                let c = 2.0 * cfg.b * cfg.gamma * cfg.repulsion_penalty
                    / ((cfg.epsilon + d2) * denom);
                let gx = clip(c * dx);
                let gy = clip(c * dy);
                positions[[i, 0]] += alpha * gx;
                positions[[i, 1]] += alpha * gy;
                stats.record(classification.roles[i], alpha * gx, alpha * gy);
            }
        }
    }
    stats
}

/// Copies each outlier onto its high-dimensional nearest already-embedded
/// point within the same connected component, plus small uniform noise.
pub fn place_outliers(
    positions: &mut Array2<f64>,
    classification: &PointClassification,
    data: &Dataset,
    noise_scale: f64,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let embedded = classification.embedded_points();
    for o in classification.outlier_points() {
        let comp = classification.component_id[o];
        let mut best: Option<(f64, usize)> = None;
        for &p in &embedded {
            if classification.component_id[p] != comp {
                continue;
            }
            let d: f64 = data
                .points
                .row(o)
                .iter()
                .zip(data.points.row(p).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if best.map_or(true, |(bd, bp)| d < bd || (d == bd && p < bp)) {
                best = Some((d, p));
            }
        }
        let (_, anchor) = best.ok_or_else(|| {
            Error::Internal(format!("outlier {o} has no embedded point in its component"))
        })?;
        positions[[o, 0]] = positions[[anchor, 0]];
        positions[[o, 1]] = positions[[anchor, 1]];
        if noise_scale > 0.0 {
            positions[[o, 0]] += rng.gen_range(-noise_scale..noise_scale);
            positions[[o, 1]] += rng.gen_range(-noise_scale..noise_scale);
        }
    }
    Ok(())
}
