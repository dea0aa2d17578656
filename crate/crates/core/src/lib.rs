//! Link prediction on signed, weighted, directed social networks.
//!
//! The crate covers the whole pipeline: graph loading and triadic influence
//! ([`graph`], [`io`], [`stats`]), sample construction and splits
//! ([`dataset`]), a one-hidden-layer classifier ([`mlp`]), structural
//! embeddings ([`embedding`]), embedding-input classifiers ([`deep`],
//! [`forest`]), evaluation ([`eval`]) and synthetic network generation
//! ([`synth`]).

pub mod dataset;
pub mod deep;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod forest;
pub mod graph;
pub mod io;
pub mod mlp;
pub mod params;
pub mod rng;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use graph::{
    influence_matrix, prosociality_score, triadic_influence, two_path_count, Gender,
    Prosociality, SignedDigraph, StudentAttributes, Weight,
};
