//! Two-phase layout optimization: PCA-initialized full-gradient global phase
//! over hubs, penalized negative-sampling local phase over hubs and eNN, and
//! nearest-anchor placement of outliers.

mod global;
mod local;

pub use global::{ce_gradient, cross_entropy_loss, global_optimize, low_dim_similarity};
pub use local::{
    init_enn_positions, local_optimize, place_outliers, rebuild_knn_without_outliers,
    LocalPhaseStats,
};

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classify::classify_points;
use crate::data::Dataset;
use crate::knn::{build_knn_graph, calibrate};
use crate::pca::pca_project;
use crate::{Error, Result};

/// All tunables of the two-phase optimization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizationConfig {
    /// Neighbor count for graph construction.
    pub k: usize,
    /// Similarity-curve constants of w = (1 + a·d^{2b})^{-1}.
    pub a: f64,
    pub b: f64,
    pub global_epochs: usize,
    pub local_epochs: usize,
    pub global_learning_rate: f64,
    pub local_learning_rate: f64,
    /// Negative samples drawn per processed edge.
    pub negative_samples: usize,
    /// Repulsion weight applied to negative samples.
    pub gamma: f64,
    /// Attractive-force multiplier applied to the far endpoint when it is a
    /// hub during the local phase.
    pub hub_penalty: f64,
    /// Multiplier on the repulsive gradient in the local phase.
    pub repulsion_penalty: f64,
    /// Neighbor count for eNN initialization.
    pub enn_init_m: usize,
    /// Perturbation scale as a fraction of the embedding span.
    pub enn_init_noise: f64,
    pub seed: u64,
    /// Regularizer preventing division by zero in the repulsive gradient.
    pub epsilon: f64,
    /// Per-coordinate clip applied to every gradient component.
    pub grad_clip: f64,
}

impl Default for OptimizationConfig {
    fn default() -> Self {
        Self {
            k: 50,
            a: 1.0,
            b: 1.0,
            global_epochs: 100,
            local_epochs: 200,
            global_learning_rate: 0.01,
            local_learning_rate: 1.0,
            negative_samples: 5,
            gamma: 1.0,
            hub_penalty: 0.1,
            repulsion_penalty: 0.1,
            enn_init_m: 10,
            enn_init_noise: 0.05,
            seed: 0,
            epsilon: 0.001,
            grad_clip: 4.0,
        }
    }
}

impl OptimizationConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("a", self.a),
            ("b", self.b),
            ("global_learning_rate", self.global_learning_rate),
            ("local_learning_rate", self.local_learning_rate),
            ("epsilon", self.epsilon),
            ("grad_clip", self.grad_clip),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.k == 0 || self.global_epochs == 0 || self.local_epochs == 0 || self.enn_init_m == 0
        {
            return Err(Error::InvalidParameter(
                "k, epoch counts, and enn_init_m must be positive".into(),
            ));
        }
        for (name, v) in [
            ("hub_penalty", self.hub_penalty),
            ("repulsion_penalty", self.repulsion_penalty),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in [0, 1], got {v}"
                )));
            }
        }
        if self.gamma < 0.0 || self.enn_init_noise < 0.0 {
            return Err(Error::InvalidParameter(
                "gamma and enn_init_noise must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// 2-D positions aligned index-wise with the dataset.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub positions: Array2<f64>,
}

/// Pipeline accounting gathered by [`umato_embed_detailed`].
#[derive(Debug, Clone, Serialize)]
pub struct EmbedDiagnostics {
    pub n_hubs: usize,
    pub n_enn: usize,
    pub n_outliers: usize,
    pub global_loss_before: f64,
    pub global_loss_after: f64,
    pub hub_displacement: f64,
    pub enn_displacement: f64,
}

/// Runs the full pipeline and returns the embedding.
pub fn umato_embed(data: &Dataset, cfg: &OptimizationConfig) -> Result<Embedding> {
    umato_embed_detailed(data, cfg).map(|(e, _)| e)
}

/// Runs kNN construction, calibration, classification, the global and local
/// optimization phases, and outlier placement. Deterministic for a fixed
/// seed, independent of thread count.
pub fn umato_embed_detailed(
    data: &Dataset,
    cfg: &OptimizationConfig,
) -> Result<(Embedding, EmbedDiagnostics)> {
    cfg.validate()?;
    let n = data.n();
    let k = cfg.k.min(n.saturating_sub(1));
    if k == 0 {
        return Err(Error::InvalidParameter("need at least 2 points to embed".into()));
    }

    let graph = calibrate(build_knn_graph(data, k)?);
    let cls = classify_points(&graph.table);
    let hubs = &cls.hubs;

    // PCA initialization of the hubs, rescaled so the hub bounding box spans
    // [-10, 10] per axis.
    let projection = pca_project(data, 2)?;
    let mut hub_init = Array2::<f64>::zeros((hubs.len(), 2));
    for (r, &h) in hubs.iter().enumerate() {
        hub_init[[r, 0]] = projection[[h, 0]];
        hub_init[[r, 1]] = projection[[h, 1]];
    }
    for c in 0..2 {
        let col = hub_init.column(c);
        let (min, max) = col.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
        let span = max - min;
        let mut col = hub_init.column_mut(c);
        if span > 0.0 {
            for v in col.iter_mut() {
                *v = (*v - min) / span * 20.0 - 10.0;
            }
        } else {
            for v in col.iter_mut() {
                *v = 0.0;
            }
        }
    }

    // Dense symmetric weights restricted to hub pairs.
    let h = hubs.len();
    let mut hub_weights = Array2::<f64>::zeros((h, h));
    let hub_rank: std::collections::HashMap<usize, usize> =
        hubs.iter().enumerate().map(|(r, &p)| (p, r)).collect();
    for (p, q, v) in graph.sym_weights.edges() {
        if let (Some(&rp), Some(&rq)) = (hub_rank.get(&p), hub_rank.get(&q)) {
            hub_weights[[rp, rq]] = v;
            hub_weights[[rq, rp]] = v;
        }
    }

    let global_loss_before =
        cross_entropy_loss(hub_weights.view(), hub_init.view(), cfg.a, cfg.b);
    let hub_positions = global_optimize(&hub_weights, hub_init, cfg);
    let global_loss_after =
        cross_entropy_loss(hub_weights.view(), hub_positions.view(), cfg.a, cfg.b);

    let mut positions = Array2::<f64>::zeros((n, 2));
    for (r, &hub) in hubs.iter().enumerate() {
        positions[[hub, 0]] = hub_positions[[r, 0]];
        positions[[hub, 1]] = hub_positions[[r, 1]];
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise_scale = cfg.enn_init_noise * embedding_span(&hub_positions);
    init_enn_positions(&mut positions, &cls, &graph, cfg, noise_scale, &mut rng)?;

    let rebuilt = rebuild_knn_without_outliers(data, &graph, &cls)?;
    let stats = local_optimize(&rebuilt.sym_weights, &mut positions, &cls, cfg, &mut rng);

    let outlier_noise = cfg.enn_init_noise * embedding_span(&positions);
    place_outliers(&mut positions, &cls, data, outlier_noise, &mut rng)?;

    if let Some(bad) = positions.iter().position(|v| !v.is_finite()) {
        return Err(Error::Internal(format!(
            "non-finite coordinate for point {}",
            bad / 2
        )));
    }

    let diagnostics = EmbedDiagnostics {
        n_hubs: hubs.len(),
        n_enn: cls.enn_points().len(),
        n_outliers: cls.outlier_points().len(),
        global_loss_before,
        global_loss_after,
        hub_displacement: stats.hub_displacement,
        enn_displacement: stats.enn_displacement,
    };
    Ok((Embedding { positions }, diagnostics))
}

/// Largest per-axis extent of a position matrix.
fn embedding_span(positions: &Array2<f64>) -> f64 {
    let mut span = 0.0_f64;
    for c in 0..positions.ncols() {
        let col = positions.column(c);
        let (min, max) = col.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
        if max > min {
            span = span.max(max - min);
        }
    }
    span
}
