//! Semi-supervised overlapping community detection on attributed graphs.
//!
//! The pipeline seeds pseudo-labels from weak cliques (an edge plus the
//! common neighbors of its endpoints), trains a GCN fused with a single-layer
//! linear-attention graph transformer against true and pseudo labels, then
//! regenerates pseudo-labels from confident predictions and trains again.
//!
//! Modules:
//! - [`graphio`]: graphs, covers, features, file formats, synthetic benchmarks, label sampling
//! - [`cliquefind`]: node priority, Salton index, weak-clique identification
//! - [`pseudolabel`]: clique-vote pseudo-labels and confidence-thresholded refresh
//! - [`neuralnet`]: dense/sparse kernels, the predictor, loss, gradients, Adam
//! - [`trainer`]: two-phase training and the end-to-end pipeline
//! - [`metrics`]: overlapping NMI

pub mod cliquefind;
pub mod error;
pub mod exec;
pub mod graphio;
pub mod metrics;
pub mod neuralnet;
pub mod pseudolabel;
pub mod trainer;

pub use error::{Error, Result};
pub use exec::Exec;
pub use graphio::{Cover, FeatureMatrix, Graph, SampledLabels, SynthConfig};
