//! Load an IDX image/label pair (the MNIST container format), subsample it,
//! and embed the result.
//!
//! Usage: cargo run --release --example load_idx -- IMAGES LABELS

use umato::data::{load_idx, save_embedding, subsample};
use umato::optimize::{umato_embed, OptimizationConfig};

fn main() -> umato::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    if args.len() != 3 {
        eprintln!("usage: load_idx IMAGES LABELS");
        std::process::exit(2);
    }
    let ds = load_idx(&args[1], &args[2])?;
    println!("loaded {} points of dimension {}", ds.n(), ds.data.dim());

    let small = subsample(&ds, 1000.min(ds.n()), 0)?;
    let cfg = OptimizationConfig { k: 15, ..OptimizationConfig::default() };
    let emb = umato_embed(&small.data, &cfg)?;
    save_embedding(&emb.positions, Some(small.labels()), "idx_embedding.csv")?;
    println!("wrote idx_embedding.csv");
    Ok(())
}
