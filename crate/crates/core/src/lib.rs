//! Mesh neural networks: recurrent classifiers in which any mesh neuron may
//! connect to any other, trained by a genetic algorithm rather than by
//! gradient descent.
//!
//! The crate is organised around the network lifecycle:
//!
//! * [`mesh`] holds the five-matrix [`MeshNetwork`] and its settling forward pass.
//! * [`mlp`] is a plain backprop-trained feedforward network, used as a
//!   baseline and as embedding material for mesh seeds.
//! * [`topology`] builds seed networks: Bernoulli-random meshes, MLP embeddings
//!   and four-layer connectome-style wirings, plus the [`StructureMask`]s that
//!   confine evolution.
//! * [`evolution`] is the genetic algorithm and the hyperparameter sweep.
//! * [`dataset`], [`stats`] and [`bias_report`] cover ingestion, evaluation
//!   statistics and per-source bias aggregation.

pub mod bias_report;
mod codec;
pub mod dataset;
mod error;
pub mod evolution;
mod label;
pub mod matrix;
pub mod mesh;
pub mod mlp;
pub mod rng;
pub mod stats;
pub mod synthetic;
pub mod topology;

pub use error::{Error, ErrorKind, FormatError, Result};
pub use label::{Label, NUM_CLASSES};
pub use mesh::{Classifier, Dims, HiddenState, MeshNetwork};
pub use mlp::Mlp;
pub use topology::StructureMask;
