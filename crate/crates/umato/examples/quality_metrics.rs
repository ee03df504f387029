//! Score embeddings with density-based (DTM, KL) and rank-based
//! (trustworthiness, continuity, MRRE) quality metrics.
//!
//! Usage: cargo run --release --example quality_metrics

use umato::data::{generate_spheres, subsample};
use umato::metrics::{evaluate, DensityOptions};
use umato::optimize::{umato_embed, OptimizationConfig};
use umato::pca::pca_project;

fn main() -> umato::Result<()> {
    let ds = subsample(&generate_spheres(0), 2000, 0)?;
    let opts = DensityOptions { normalize_distances: true };
    let sigmas = [0.01, 0.1, 1.0];

    let pca = pca_project(&ds.data, 2)?;
    let pca_report = evaluate(ds.data.points.view(), pca.view(), 5, &sigmas, opts)?;

    let cfg = OptimizationConfig::default();
    let emb = umato_embed(&ds.data, &cfg)?;
    let report = evaluate(ds.data.points.view(), emb.positions.view(), 5, &sigmas, opts)?;

    println!("{:<18}{:>10}{:>10}", "metric", "pca", "umato");
    for (p, u) in pca_report.dtm.iter().zip(report.dtm.iter()) {
        println!("{:<18}{:>10.4}{:>10.4}", format!("DTM_{}", p.sigma), p.value, u.value);
    }
    for (p, u) in pca_report.kl.iter().zip(report.kl.iter()) {
        println!("{:<18}{:>10.4}{:>10.4}", format!("KL_{}", p.sigma), p.value, u.value);
    }
    println!(
        "{:<18}{:>10.4}{:>10.4}",
        "trustworthiness", pca_report.trustworthiness, report.trustworthiness
    );
    println!("{:<18}{:>10.4}{:>10.4}", "continuity", pca_report.continuity, report.continuity);
    println!("{:<18}{:>10.4}{:>10.4}", "mrre_x", pca_report.mrre_x, report.mrre_x);
    println!("{:<18}{:>10.4}{:>10.4}", "mrre_z", pca_report.mrre_z, report.mrre_z);
    Ok(())
}
