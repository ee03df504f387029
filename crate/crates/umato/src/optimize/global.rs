//! Global phase: full-batch cross-entropy descent over all hub pairs,
//! without negative sampling.

use ndarray::{Array2, ArrayView2};

use super::OptimizationConfig;

const W_CLAMP: f64 = 1e-12;

/// Low-dimensional similarity w = (1 + a·‖yi−yj‖^{2b})^{-1}.
pub fn low_dim_similarity(yi: &[f64], yj: &[f64], a: f64, b: f64) -> f64 {
    let d2: f64 = yi.iter().zip(yj).map(|(p, q)| (p - q) * (p - q)).sum();
    1.0 / (1.0 + a * d2.powf(b))
}

/// Cross-entropy between high-dimensional weights v and low-dimensional
/// similarities w over all ordered pairs i != j, with w clamped away from
/// {0, 1} inside the logarithms.
pub fn cross_entropy_loss(v: ArrayView2<f64>, positions: ArrayView2<f64>, a: f64, b: f64) -> f64 {
    let n = positions.nrows();
    let mut loss = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let vij = v[[i, j]];
            let w = low_dim_similarity(
                positions.row(i).as_slice().unwrap(),
                positions.row(j).as_slice().unwrap(),
                a,
                b,
            )
            .clamp(W_CLAMP, 1.0 - W_CLAMP);
            let mut term = 0.0;
            if vij > 0.0 {
                term += vij * (vij / w).ln();
            }
            if vij < 1.0 {
                term += (1.0 - vij) * ((1.0 - vij) / (1.0 - w)).ln();
            }
            loss += 2.0 * term; // ordered pairs count each (i, j) twice
        }
    }
    loss
}

/// Analytic gradient of [`cross_entropy_loss`] with respect to the positions,
/// before any clipping. `epsilon` regularizes the repulsive denominator.
pub fn ce_gradient(
    v: ArrayView2<f64>,
    positions: ArrayView2<f64>,
    a: f64,
    b: f64,
    epsilon: f64,
) -> Array2<f64> {
    let n = positions.nrows();
    let mut grad = Array2::<f64>::zeros((n, 2));
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = positions[[i, 0]] - positions[[j, 0]];
            let dy = positions[[i, 1]] - positions[[j, 1]];
            let d2 = dx * dx + dy * dy;
            if d2 == 0.0 {
                continue;
            }
            let vij = v[[i, j]];
            let denom = 1.0 + a * d2.powf(b);
            let attr = 2.0 * a * b * d2.powf(b - 1.0) * vij / denom;
            let rep = -2.0 * b * (1.0 - vij) / ((epsilon + d2) * denom);
            // Each unordered pair appears twice in the ordered sum.
            let c = 2.0 * (attr + rep);
            grad[[i, 0]] += c * dx;
            grad[[i, 1]] += c * dy;
            grad[[j, 0]] -= c * dx;
            grad[[j, 1]] -= c * dy;
        }
    }
    grad
}

/// Full-batch gradient descent on the cross-entropy over every hub pair.
/// Per-pair descent contributions are clipped per coordinate; the learning
/// rate decays linearly to zero. Deterministic (no randomness involved).
pub fn global_optimize(
    hub_weights: &Array2<f64>,
    init: Array2<f64>,
    cfg: &OptimizationConfig,
) -> Array2<f64> {
    let n = init.nrows();
    let mut pos = init;
    let clip = |x: f64| x.clamp(-cfg.grad_clip, cfg.grad_clip);
    for epoch in 0..cfg.global_epochs {
        let alpha =
            cfg.global_learning_rate * (1.0 - epoch as f64 / cfg.global_epochs as f64);
        let mut step = Array2::<f64>::zeros((n, 2));
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = pos[[i, 0]] - pos[[j, 0]];
                let dy = pos[[i, 1]] - pos[[j, 1]];
                let d2 = dx * dx + dy * dy;
                if d2 == 0.0 {
                    continue;
                }
                let vij = hub_weights[[i, j]];
                let denom = 1.0 + cfg.a * d2.powf(cfg.b);
                // Descent direction: negative CE gradient (attractive pulls,
                // repulsive pushes).
                let attr = -2.0 * cfg.a * cfg.b * d2.powf(cfg.b - 1.0) * vij / denom;
                let rep = 2.0 * cfg.b * (1.0 - vij) / ((cfg.epsilon + d2) * denom);
                let c = 2.0 * (attr + rep);
                let gx = clip(c * dx);
                let gy = clip(c * dy);
                step[[i, 0]] += gx;
                step[[i, 1]] += gy;
                step[[j, 0]] -= gx;
                step[[j, 1]] -= gy;
            }
        }
        for i in 0..n {
            pos[[i, 0]] += alpha * step[[i, 0]];
            pos[[i, 1]] += alpha * step[[i, 1]];
        }
    }
    pos
}
