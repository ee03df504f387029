//! Generate the synthetic Spheres benchmark and print a few summary stats.
//!
//! Usage: cargo run --release --example generate_spheres

use umato::data::{generate_spheres, subsample};

fn main() {
    let ds = generate_spheres(0);
    println!("points: {} x {}", ds.n(), ds.data.dim());

    let mut counts = std::collections::BTreeMap::new();
    for &l in ds.labels() {
        *counts.entry(l).or_insert(0usize) += 1;
    }
    for (label, count) in &counts {
        println!("class {label}: {count} points");
    }

    // Mean vector norm per class: inner spheres sit on shells of radius ~5
    // around shifted centers, the outer shell at radius 25.
    for (label, _) in &counts {
        let mut norm = 0.0;
        let mut n = 0;
        for i in 0..ds.n() {
            if ds.labels()[i] == *label {
                norm += ds.data.points.row(i).mapv(|v| v * v).sum().sqrt();
                n += 1;
            }
        }
        println!("class {label}: mean norm {:.2}", norm / n as f64);
    }

    let small = subsample(&ds, 1000, 0).unwrap();
    println!("stratified subsample: {} points", small.n());
}
