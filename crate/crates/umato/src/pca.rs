//! Principal component analysis used both as the hub-position initializer
//! and as the baseline embedding.

use nalgebra::DMatrix;
use ndarray::Array2;

use crate::data::Dataset;
use crate::{Error, Result};

/// Projects mean-centered data onto the top `out_dim` principal directions
/// (covariance eigenvectors in descending eigenvalue order).
///
/// Sign convention: within each component, the entry of largest absolute
/// value is made nonnegative, so the projection is deterministic. If the data
/// rank is below `out_dim` the missing columns are zero-padded.
pub fn pca_project(data: &Dataset, out_dim: usize) -> Result<Array2<f64>> {
    let n = data.n();
    let d = data.dim();
    if out_dim == 0 || out_dim > d {
        return Err(Error::InvalidParameter(format!(
            "out_dim must satisfy 1 <= out_dim <= d, got out_dim={out_dim}, d={d}"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "PCA requires at least 2 points, got {n}"
        )));
    }

    let mut mean = vec![0.0; d];
    for row in data.points.rows() {
        for (m, v) in mean.iter_mut().zip(row.iter()) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }

    let centered = DMatrix::from_fn(n, d, |i, j| data.points[[i, j]] - mean[j]);
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let eig = cov.symmetric_eigen();

    // Descending eigenvalue order, ties by original column.
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap()
            .then(a.cmp(&b))
    });

    let rank_tol = eig.eigenvalues[order[0]].abs().max(1.0) * 1e-12;
    let mut projection = Array2::<f64>::zeros((n, out_dim));
    for (c, &e) in order.iter().take(out_dim).enumerate() {
        if eig.eigenvalues[e] <= rank_tol {
            log::warn!("data rank below {out_dim}: zero-padding component {c}");
            continue;
        }
        let mut component: Vec<f64> = (0..d).map(|j| eig.eigenvectors[(j, e)]).collect();
        let dominant = component
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(j, _)| j)
            .unwrap();
        if component[dominant] < 0.0 {
            for v in &mut component {
                *v = -*v;
            }
        }
        for i in 0..n {
            projection[[i, c]] = (0..d).map(|j| centered[(i, j)] * component[j]).sum();
        }
    }
    Ok(projection)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn diagonal_covariance_identity_basis() {
        // Mean-centered 2-D data with diagonal covariance diag(4, 1): the
        // projection equals the data up to column order and sign convention.
        let pts = array![
            [2.0, 0.0],
            [-2.0, 0.0],
            [2.0, 1.0],
            [-2.0, -1.0],
            [0.0, 1.0],
            [0.0, -1.0],
            [2.0, -1.0],
            [-2.0, 1.0],
        ];
        let ds = Dataset::new(pts.clone(), None).unwrap();
        let proj = pca_project(&ds, 2).unwrap();
        for i in 0..pts.nrows() {
            assert!((proj[[i, 0]] - pts[[i, 0]]).abs() < 1e-10);
            assert!((proj[[i, 1]] - pts[[i, 1]]).abs() < 1e-10);
        }
    }

    #[test]
    fn identical_points_project_to_zero() {
        let ds = Dataset::new(array![[3.0, 3.0], [3.0, 3.0], [3.0, 3.0]], None).unwrap();
        let proj = pca_project(&ds, 2).unwrap();
        assert!(proj.iter().all(|&v| v == 0.0));
    }

    /// Jacobi eigenvalue oracle, independent of nalgebra.
    fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
        let d = a.len();
        for _ in 0..200 {
            let mut off = 0.0;
            let (mut p, mut q) = (0, 1);
            for i in 0..d {
                for j in i + 1..d {
                    if a[i][j].abs() > off {
                        off = a[i][j].abs();
                        p = i;
                        q = j;
                    }
                }
            }
            if off < 1e-14 {
                break;
            }
            let theta = 0.5 * (2.0 * a[p][q]).atan2(a[p][p] - a[q][q]);
            let (c, s) = (theta.cos(), theta.sin());
            for i in 0..d {
                let (aip, aiq) = (a[i][p], a[i][q]);
                a[i][p] = c * aip + s * aiq;
                a[i][q] = -s * aip + c * aiq;
            }
            for j in 0..d {
                let (apj, aqj) = (a[p][j], a[q][j]);
                a[p][j] = c * apj + s * aqj;
                a[q][j] = -s * apj + c * aqj;
            }
        }
        (0..d).map(|i| a[i][i]).collect()
    }

    #[test]
    fn projection_variances_match_eigen_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let pts = Array2::from_shape_fn((30, 6), |_| rng.gen_range(-2.0..2.0));
        let ds = Dataset::new(pts.clone(), None).unwrap();
        let proj = pca_project(&ds, 2).unwrap();

        // Covariance by hand, eigenvalues via Jacobi.
        let n = 30;
        let d = 6;
        let mean: Vec<f64> = (0..d).map(|j| pts.column(j).sum() / n as f64).collect();
        let mut cov = vec![vec![0.0; d]; d];
        for (i, row) in cov.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..n)
                    .map(|r| (pts[[r, i]] - mean[i]) * (pts[[r, j]] - mean[j]))
                    .sum::<f64>()
                    / (n as f64 - 1.0);
            }
        }
        let mut evals = jacobi_eigenvalues(cov);
        evals.sort_by(|a, b| b.partial_cmp(a).unwrap());

        for c in 0..2 {
            let col = proj.column(c);
            let m = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n as f64 - 1.0);
            assert!((var - evals[c]).abs() < 1e-8, "component {c}: {var} vs {}", evals[c]);
        }
    }

    #[test]
    fn rank_deficient_pads_zero_columns() {
        // All points on a line in 3-D: second component has no variance.
        let pts = array![[0.0, 0.0, 0.0], [1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [3.0, 6.0, 9.0]];
        let ds = Dataset::new(pts, None).unwrap();
        let proj = pca_project(&ds, 2).unwrap();
        assert!(proj.column(1).iter().all(|&v| v == 0.0));
        assert!(proj.column(0).iter().any(|&v| v != 0.0));
    }
}
