//! Two-phase hub-based dimensionality reduction.
//!
//! The pipeline splits layout optimization into a global phase over a small
//! set of hub points (full-gradient cross-entropy descent, PCA-initialized)
//! and a penalized local phase over the hubs' expanded neighborhoods
//! (negative-sampling SGD). Remaining isolated points are appended next to
//! their nearest embedded neighbor. The companion [`metrics`] module provides
//! the density- and rank-based quality measures used to compare embeddings.

pub mod app;
pub mod classify;
pub mod data;
pub mod knn;
pub mod metrics;
pub mod optimize;
pub mod pca;
pub mod plot;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter is out of range for the given input.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// Input data violates a structural invariant (NaN/Inf, empty, ragged).
    #[error("invalid data: {0}")]
    InvalidData(String),
    /// A file could not be parsed; the message carries the offending location.
    #[error("format error: {0}")]
    Format(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    /// An invariant the pipeline is supposed to maintain was observed broken.
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub use classify::{classify_points, PointClassification, Role};
pub use data::{generate_spheres, Dataset, LabeledDataset};
pub use knn::{build_knn_graph, calibrate, NeighborGraph, NeighborTable};
pub use metrics::{evaluate, DensityOptions, MetricReport};
pub use optimize::{umato_embed, umato_embed_detailed, Embedding, OptimizationConfig};
pub use pca::pca_project;
