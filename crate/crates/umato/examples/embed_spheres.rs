//! Embed a Spheres subsample into 2-D and write the result as CSV and SVG.
//!
//! Usage: cargo run --release --example embed_spheres

use umato::data::{generate_spheres, save_embedding, subsample};
use umato::optimize::{umato_embed_detailed, OptimizationConfig};
use umato::plot::render_svg;

fn main() -> umato::Result<()> {
    let ds = subsample(&generate_spheres(0), 2000, 0)?;

    let cfg = OptimizationConfig { seed: 0, ..OptimizationConfig::default() };
    let (embedding, diag) = umato_embed_detailed(&ds.data, &cfg)?;
    println!(
        "hubs {}, expanded neighbors {}, outliers {}",
        diag.n_hubs, diag.n_enn, diag.n_outliers
    );
    println!(
        "global loss {:.1} -> {:.1}",
        diag.global_loss_before, diag.global_loss_after
    );

    save_embedding(&embedding.positions, Some(ds.labels()), "spheres_embedding.csv")?;
    let svg = render_svg(embedding.positions.view(), ds.labels())?;
    std::fs::write("spheres_embedding.svg", svg)?;
    println!("wrote spheres_embedding.csv and spheres_embedding.svg");
    Ok(())
}
