//! Integrity auditing and repair for labeled image datasets.
//!
//! The pipeline works on a [`DatasetManifest`] plus an [`EmbeddingMatrix`]
//! keyed by the same image ids:
//!
//! - [`leakage`]: group overlap between train, valid and test, and its repair
//! - [`embeddings`] and [`duplicates`]: similar pairs, clusters, review outcomes
//! - [`labels`]: diagnosis and skin-type disagreements among similar pairs
//! - [`outliers`]: images far from all of their neighbors
//! - [`cleaner`]: filtering, stratified splitting, resizing, dataset extension
//! - [`review`]: the human review service and annotator agreement
//! - [`reporting`]: JSON and HTML audit reports
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod cleaner;
pub mod cli;
pub mod duplicates;
pub mod embeddings;
pub mod error;
pub mod labels;
pub mod leakage;
pub mod manifest;
pub mod outliers;
pub mod reporting;
pub mod resample;
pub mod review;
pub mod union_find;

pub use embeddings::{cosine, knn, scan_pairs, EmbeddingMatrix, PairKey, SimilarityPair};
pub use error::{Error, Result};
pub use manifest::{DatasetManifest, ImageRecord, Partition};
