//! Maximum clique approximation with a hybrid scattering graph network.
//!
//! The pipeline: per-node statistics feed a small GNN whose layers pick,
//! per node, between low-pass neighborhood-averaging filters and band-pass
//! diffusion wavelets via a learned attention. The network is trained
//! unsupervised against a two-term quadratic objective whose penalty term
//! vanishes exactly when the probability mass sits inside a clique, and a
//! greedy multi-sampler decoder turns the resulting per-node probabilities
//! into an actual clique. Exact and heuristic baselines plus synthetic
//! instance generators make the whole thing testable end to end.
//!
//! Crate layout:
//! - [`graph`]: sparse graph, walk/wavelet/renormalized-adjacency
//!   operators, quadratic forms over the graph and its implicit complement
//! - [`features`]: eccentricity, clustering coefficient, log-degree
//! - [`autodiff`]: the reverse-mode tape the trainer runs on
//! - [`model`]: the scattering GNN and its checkpoints
//! - [`loss`]: the two-term objective and its cross-check form
//! - [`decoder`]: the greedy multi-sampler clique extractor
//! - [`oracles`]: exact Bron-Kerbosch solver and a local-search baseline
//! - [`datagen`]: planted-clique and group-structured instance generators
//! - [`train`]: Adam loop with validation checkpointing
//! - [`eval`]: scoring, timing, and benchmark tables
//! - [`dense`]: dense reference operators for the test suites

pub mod autodiff;
pub mod datagen;
pub mod decoder;
pub mod dense;
pub mod eval;
pub mod features;
pub mod graph;
pub mod loss;
pub mod model;
pub mod oracles;
pub mod train;

pub use datagen::{Dataset, Instance};
pub use decoder::{decode, CliqueResult, DecoderConfig};
pub use features::{compute_features, FeatureMatrix};
pub use graph::Graph;
pub use loss::LossConfig;
pub use model::{forward, init_params, ModelConfig, ModelParams};
