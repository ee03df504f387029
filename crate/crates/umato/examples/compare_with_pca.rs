//! Side-by-side benchmark of PCA and the two-phase embedding, written as a
//! Markdown table with the best value per column in bold.
//!
//! Usage: cargo run --release --example compare_with_pca

use umato::app::{
    benchmark_markdown, cmd_benchmark, BenchmarkOptions, DatasetSpec, DEFAULT_SIGMAS,
};
use umato::optimize::OptimizationConfig;

fn main() -> umato::Result<()> {
    let out = std::env::temp_dir().join("umato_benchmark");
    let bench = cmd_benchmark(&BenchmarkOptions {
        dataset: DatasetSpec::Spheres { seed: 0 },
        subsample: Some(2000),
        cfg: OptimizationConfig::default(),
        k_metrics: 5,
        sigmas: DEFAULT_SIGMAS.to_vec(),
        normalize_distances: true,
        grid: false,
        out_markdown: out.with_extension("md"),
        out_json: out.with_extension("json"),
    })?;
    print!("{}", benchmark_markdown(&bench));
    println!();
    println!("report written to {} and {}", out.with_extension("md").display(), out.with_extension("json").display());
    Ok(())
}
