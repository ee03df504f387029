//! Build a kNN graph and show how points split into hubs, expanded
//! neighbors, and outliers.
//!
//! Usage: cargo run --release --example classify_points

use umato::classify::{classify_points, Role};
use umato::data::{generate_spheres, subsample};
use umato::knn::build_knn_graph;

fn main() -> umato::Result<()> {
    let ds = subsample(&generate_spheres(0), 2000, 0)?;
    let table = build_knn_graph(&ds.data, 50)?;
    let cls = classify_points(&table);

    println!("hubs: {}", cls.hubs.len());
    println!("expanded: {}", cls.enn_points().len());
    println!("outliers: {}", cls.outlier_points().len());

    let n_components = cls.component_id.iter().max().map_or(0, |&c| c + 1);
    println!("connected components: {n_components}");

    // Hubs per class: coverage should roughly track class sizes.
    let mut per_class = std::collections::BTreeMap::new();
    for &h in &cls.hubs {
        *per_class.entry(ds.labels()[h]).or_insert(0usize) += 1;
    }
    for (label, count) in per_class {
        println!("class {label}: {count} hubs");
    }

    // Every point is exactly one of the three roles.
    let total = cls
        .roles
        .iter()
        .filter(|r| matches!(r, Role::Hub | Role::Enn | Role::Outlier))
        .count();
    assert_eq!(total, ds.n());
    Ok(())
}
