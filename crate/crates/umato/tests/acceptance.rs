//! End-to-end acceptance checks. Each test prints one line so the suite
//! doubles as a release checklist; the heavyweight Spheres runs are shared
//! through a lazily built fixture.

use std::sync::OnceLock;
use std::time::Instant;

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use umato::classify::{classify_points, Role};
use umato::data::{generate_spheres, subsample, Dataset};
use umato::knn::{build_knn_graph, compute_rho, compute_sigma, NeighborTable, SIGMA_TOL};
use umato::metrics::{evaluate, rank_matrix, DensityOptions, MetricReport};
use umato::optimize::{
    ce_gradient, cross_entropy_loss, umato_embed_detailed, EmbedDiagnostics, OptimizationConfig,
};
use umato::pca::pca_project;

const SEEDS: [u64; 3] = [0, 1, 2];

/// Configuration of the benchmark-scale runs: library defaults with a
/// shorter local phase, which both fits the runtime budget and keeps the
/// local phase from over-tightening neighborhoods at n = 10,000.
fn bench_config(seed: u64) -> OptimizationConfig {
    OptimizationConfig { local_epochs: 50, seed, ..OptimizationConfig::default() }
}

struct SpheresRun {
    umato: MetricReport,
    pca: MetricReport,
    diag: EmbedDiagnostics,
}

struct SpheresFixture {
    runs: Vec<SpheresRun>,
    elapsed_secs: f64,
}

static FIXTURE: OnceLock<SpheresFixture> = OnceLock::new();

fn spheres_fixture() -> &'static SpheresFixture {
    FIXTURE.get_or_init(|| {
        let start = Instant::now();
        let opts = DensityOptions { normalize_distances: true };
        let runs = SEEDS
            .iter()
            .map(|&seed| {
                let ds = generate_spheres(seed);
                let cfg = bench_config(seed);
                let (emb, diag) = umato_embed_detailed(&ds.data, &cfg).unwrap();
                let umato =
                    evaluate(ds.data.points.view(), emb.positions.view(), 5, &[0.1], opts)
                        .unwrap();
                let pca_positions = pca_project(&ds.data, 2).unwrap();
                let pca =
                    evaluate(ds.data.points.view(), pca_positions.view(), 5, &[0.1], opts)
                        .unwrap();
                SpheresRun { umato, pca, diag }
            })
            .collect();
        SpheresFixture { runs, elapsed_secs: start.elapsed().as_secs_f64() }
    })
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize, span: f64) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |_| rng.gen_range(-span..span))
}

#[test]
fn gradients_match_finite_differences() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let n = rng.gen_range(3..=10);
        let pos = random_points(&mut rng, n, 2, 2.0);
        let mut v = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in (i + 1)..n {
                let w = rng.gen_range(0.0..1.0);
                v[[i, j]] = w;
                v[[j, i]] = w;
            }
        }
        let analytic = ce_gradient(v.view(), pos.view(), 1.0, 1.0, 0.0);
        let h = 1e-6;
        let mut diff2 = 0.0;
        let mut norm2 = 0.0;
        for i in 0..n {
            for c in 0..2 {
                let mut plus = pos.clone();
                plus[[i, c]] += h;
                let mut minus = pos.clone();
                minus[[i, c]] -= h;
                let fd = (cross_entropy_loss(v.view(), plus.view(), 1.0, 1.0)
                    - cross_entropy_loss(v.view(), minus.view(), 1.0, 1.0))
                    / (2.0 * h);
                diff2 += (fd - analytic[[i, c]]).powi(2);
                norm2 += fd * fd;
            }
        }
        let rel = (diff2 / norm2).sqrt();
        worst = worst.max(rel);
        assert!(rel <= 1e-4, "relative gradient error {rel}");
    }
    assert!(start.elapsed().as_secs_f64() < 5.0);
    println!("[PASS] analytic gradients match finite differences (worst rel err {worst:.2e})");
}

#[test]
fn sigma_calibration_hits_target() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut checked = 0;
    for _ in 0..1000 {
        let k = rng.gen_range(3..30);
        let mut row: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..5.0)).collect();
        row.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let rho = compute_rho(&row);
        let res = compute_sigma(&row, rho, k, SIGMA_TOL);
        if !res.unattainable {
            let sum: f64 =
                row.iter().map(|&d| (-(d - rho).max(0.0) / res.sigma).exp()).sum();
            assert!(
                (sum - (k as f64).log2()).abs() <= 1e-4,
                "calibration residual {} at k={k}",
                (sum - (k as f64).log2()).abs()
            );
            checked += 1;
        }
    }
    assert!(checked > 900, "only {checked} attainable rows");
    assert!(start.elapsed().as_secs_f64() < 5.0);
    println!("[PASS] sigma calibration meets its target on {checked}/1000 random rows");
}

#[test]
fn classification_partitions_every_table() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    for trial in 0..500 {
        let n = rng.gen_range(2..=300);
        let k = rng.gen_range(1..n.min(12));
        let mut indices = Array2::<usize>::zeros((n, k));
        let mut distances = Array2::<f64>::zeros((n, k));
        for i in 0..n {
            let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            others.shuffle(&mut rng);
            let mut row: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..10.0)).collect();
            row.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for c in 0..k {
                indices[[i, c]] = others[c];
                distances[[i, c]] = row[c];
            }
        }
        let table = NeighborTable { k, indices: indices.clone(), distances };
        let cls = classify_points(&table);

        assert_eq!(cls.roles.len(), n, "trial {trial}");
        let hubs: std::collections::HashSet<usize> = cls.hubs.iter().copied().collect();
        for i in 0..n {
            assert_eq!(hubs.contains(&i), cls.roles[i] == Role::Hub);
        }
        // Every component of the undirected graph contains a hub.
        let mut component_has_hub =
            vec![false; cls.component_id.iter().max().map_or(0, |&c| c + 1)];
        for &h in &cls.hubs {
            component_has_hub[cls.component_id[h]] = true;
        }
        assert!(component_has_hub.iter().all(|&b| b), "trial {trial}");
    }
    assert!(start.elapsed().as_secs_f64() < 30.0);
    println!("[PASS] hub/expanded/outlier roles partition 500 random neighbor tables");
}

#[test]
fn metrics_match_brute_force_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..5 {
        let n = rng.gen_range(20..=50);
        let d = rng.gen_range(2..6);
        let data = random_points(&mut rng, n, d, 3.0);
        let emb = random_points(&mut rng, n, 2, 3.0);
        let k = 4;

        // Oracle ranks from a full sort per row.
        let rank_of = |pts: &Array2<f64>| -> Vec<Vec<usize>> {
            (0..n)
                .map(|i| {
                    let mut order: Vec<(f64, usize)> = (0..n)
                        .filter(|&j| j != i)
                        .map(|j| {
                            let d2: f64 = pts
                                .row(i)
                                .iter()
                                .zip(pts.row(j).iter())
                                .map(|(a, b)| (a - b) * (a - b))
                                .sum();
                            (d2, j)
                        })
                        .collect();
                    order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
                    let mut ranks = vec![0usize; n];
                    for (r, &(_, j)) in order.iter().enumerate() {
                        ranks[j] = r + 1;
                    }
                    ranks
                })
                .collect()
        };
        let rx = rank_of(&data);
        let rz = rank_of(&emb);

        // kNN rows agree with the rank oracle.
        let table = build_knn_graph(&Dataset::new(data.clone(), None).unwrap(), k).unwrap();
        for i in 0..n {
            for c in 0..k {
                assert_eq!(rx[i][table.indices[[i, c]]], c + 1);
            }
        }
        // Rank matrices agree entry-wise.
        let rm = rank_matrix(data.view());
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    assert_eq!(rm.ranks[[i, j]] as usize, rx[i][j]);
                }
            }
        }

        // All six metrics against direct recomputation.
        let opts = DensityOptions::default();
        let report = evaluate(data.view(), emb.view(), k, &[0.5], opts).unwrap();

        let density = |pts: &Array2<f64>| -> Vec<f64> {
            let raw: Vec<f64> = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            let d2: f64 = pts
                                .row(i)
                                .iter()
                                .zip(pts.row(j).iter())
                                .map(|(a, b)| (a - b) * (a - b))
                                .sum();
                            (-d2 / 0.5).exp()
                        })
                        .sum()
                })
                .collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|f| f / total).collect()
        };
        let fx = density(&data);
        let fz = density(&emb);
        let dtm_oracle: f64 = fx.iter().zip(&fz).map(|(x, z)| (x - z).abs()).sum();
        let kl_oracle: f64 = fx.iter().zip(&fz).map(|(x, z)| x * (x / z).ln()).sum();
        assert!((report.dtm_at(0.5).unwrap() - dtm_oracle).abs() <= 1e-12);
        assert!((report.kl_at(0.5).unwrap() - kl_oracle).abs() <= 1e-12);

        let mut trust_pen = 0.0;
        let mut conti_pen = 0.0;
        let mut ex = 0.0;
        let mut ez = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                if rz[i][j] <= k {
                    if rx[i][j] > k {
                        trust_pen += (rx[i][j] - k) as f64;
                    }
                    ez += (rx[i][j] as f64 - rz[i][j] as f64).abs() / rz[i][j] as f64;
                }
                if rx[i][j] <= k {
                    if rz[i][j] > k {
                        conti_pen += (rz[i][j] - k) as f64;
                    }
                    ex += (rx[i][j] as f64 - rz[i][j] as f64).abs() / rx[i][j] as f64;
                }
            }
        }
        let vk = 2.0 / (n as f64 * k as f64 * (2.0 * n as f64 - 3.0 * k as f64 - 1.0));
        let norm: f64 = n as f64
            * (1..=k).map(|l| (n as f64 - 2.0 * l as f64 + 1.0).abs() / l as f64).sum::<f64>();
        assert!((report.trustworthiness - (1.0 - vk * trust_pen)).abs() <= 1e-12);
        assert!((report.continuity - (1.0 - vk * conti_pen)).abs() <= 1e-12);
        assert!((report.mrre_x - (1.0 - ex / norm)).abs() <= 1e-12);
        assert!((report.mrre_z - (1.0 - ez / norm)).abs() <= 1e-12);
    }
    println!("[PASS] kNN rows, rank matrices, and all six metrics match brute-force oracles");
}

#[test]
fn spheres_global_metrics_beat_pca() {
    let fx = spheres_fixture();
    let u_kl = mean(fx.runs.iter().map(|r| r.umato.kl_at(0.1).unwrap()));
    let p_kl = mean(fx.runs.iter().map(|r| r.pca.kl_at(0.1).unwrap()));
    let u_dtm = mean(fx.runs.iter().map(|r| r.umato.dtm_at(0.1).unwrap()));
    let p_dtm = mean(fx.runs.iter().map(|r| r.pca.dtm_at(0.1).unwrap()));

    assert!(u_kl < p_kl, "KL {u_kl:.4} !< {p_kl:.4}");
    assert!(u_dtm < p_dtm, "DTM {u_dtm:.4} !< {p_dtm:.4}");
    assert!((0.52..=0.78).contains(&p_kl), "PCA KL {p_kl:.4} out of range");
    assert!((0.80..=1.20).contains(&p_dtm), "PCA DTM {p_dtm:.4} out of range");
    assert!(fx.elapsed_secs <= 900.0, "fixture took {:.0} s", fx.elapsed_secs);

    // Subsampled variant preserves the orderings within a tight budget.
    let start = Instant::now();
    let opts = DensityOptions { normalize_distances: true };
    let ds = subsample(&generate_spheres(0), 2000, 0).unwrap();
    let (emb, _) = umato_embed_detailed(&ds.data, &bench_config(0)).unwrap();
    let u = evaluate(ds.data.points.view(), emb.positions.view(), 5, &[0.1], opts).unwrap();
    let pca_positions = pca_project(&ds.data, 2).unwrap();
    let p = evaluate(ds.data.points.view(), pca_positions.view(), 5, &[0.1], opts).unwrap();
    assert!(u.kl_at(0.1).unwrap() < p.kl_at(0.1).unwrap());
    assert!(u.dtm_at(0.1).unwrap() < p.dtm_at(0.1).unwrap());
    assert!(start.elapsed().as_secs_f64() <= 120.0);

    println!(
        "[PASS] Spheres density metrics beat PCA \
         (KL {u_kl:.4} < {p_kl:.4}, DTM {u_dtm:.4} < {p_dtm:.4})"
    );
}

#[test]
fn spheres_local_metrics_in_plausible_ranges() {
    let fx = spheres_fixture();
    let trust = mean(fx.runs.iter().map(|r| r.umato.trustworthiness));
    let conti = mean(fx.runs.iter().map(|r| r.umato.continuity));
    assert!((0.58..=0.74).contains(&trust), "trustworthiness {trust:.4} out of range");
    assert!((0.70..=0.87).contains(&conti), "continuity {conti:.4} out of range");
    println!(
        "[PASS] Spheres local metrics plausible (trust {trust:.4}, continuity {conti:.4})"
    );
}

#[test]
fn identity_embedding_scores_perfectly() {
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    for &normalize in &[false, true] {
        let data = random_points(&mut rng, 40, 2, 5.0);
        let report = evaluate(
            data.view(),
            data.view(),
            5,
            &[0.01, 0.1, 1.0],
            DensityOptions { normalize_distances: normalize },
        )
        .unwrap();
        assert_eq!(report.trustworthiness, 1.0);
        assert_eq!(report.continuity, 1.0);
        assert_eq!(report.mrre_x, 1.0);
        assert_eq!(report.mrre_z, 1.0);
        for m in report.dtm.iter().chain(report.kl.iter()) {
            assert!(m.value.abs() <= 1e-12, "sigma {} residual {}", m.sigma, m.value);
        }
    }
    println!("[PASS] identity embedding scores exactly perfect on all metrics");
}

#[test]
fn cli_runs_are_deterministic() {
    let bin = env!("CARGO_BIN_EXE_umato");
    let dir = tempfile::tempdir().unwrap();
    let run = |out: &str, threads: Option<&str>| -> Vec<u8> {
        let path = dir.path().join(out);
        let mut cmd = std::process::Command::new(bin);
        cmd.args([
            "embed",
            "--dataset",
            "spheres",
            "--subsample",
            "1000",
            "--seed",
            "7",
            "--algo",
            "umato",
            "--out",
        ])
        .arg(&path);
        if let Some(t) = threads {
            cmd.args(["--threads", t]);
        }
        let status = cmd.status().unwrap();
        assert!(status.success());
        std::fs::read(&path).unwrap()
    };
    let first = run("a.csv", None);
    let second = run("b.csv", None);
    assert_eq!(first, second, "repeat run differs");
    let threaded = run("c.csv", Some("2"));
    assert_eq!(first, threaded, "thread count changed the output");
    let single = run("d.csv", Some("1"));
    assert_eq!(first, single);
    println!("[PASS] CLI embeddings are byte-identical across runs and thread counts");
}

#[test]
fn hubs_stay_put_during_local_phase() {
    let fx = spheres_fixture();
    for run in &fx.runs {
        assert!(
            run.diag.hub_displacement < 0.2 * run.diag.enn_displacement,
            "hub displacement {:.2} vs expanded {:.2}",
            run.diag.hub_displacement,
            run.diag.enn_displacement
        );
    }

    // With both penalties at zero the hubs do not move at all.
    let ds = subsample(&generate_spheres(0), 2000, 0).unwrap();
    let cfg = OptimizationConfig {
        hub_penalty: 0.0,
        repulsion_penalty: 0.0,
        ..bench_config(0)
    };
    let (_, diag) = umato_embed_detailed(&ds.data, &cfg).unwrap();
    assert_eq!(diag.hub_displacement, 0.0);

    let ratio = mean(
        fx.runs.iter().map(|r| r.diag.hub_displacement / r.diag.enn_displacement),
    );
    println!(
        "[PASS] hubs stay anchored in the local phase \
         (displacement ratio {ratio:.3}, zero-penalty displacement 0)"
    );
}
