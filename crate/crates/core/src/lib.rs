//! Multimodal-graph variational autoencoders for node-pair interaction
//! prediction: graph construction and splitting, SMILES parsing and
//! Morgan fingerprints, a small reverse-mode autodiff engine, the
//! encoder/latent/decoder architecture, training loops, and ranking
//! and regression metrics.
//!
//! All dense math is generic over the [`num::Scalar`] element type;
//! f64 is the default precision and f32 is opt-in.

pub mod chem;
pub mod error;
pub mod metrics;
pub mod model;
pub mod num;
pub mod graph;
pub mod rng;
pub mod synth;
pub mod train;
pub mod tensor;

pub use error::{Error, ErrorClass, Result};
pub use num::{Dtype, Scalar};

/// Concrete aliases for the two supported precisions.
pub type Mat64 = tensor::DenseMatrix<f64>;
pub type Mat32 = tensor::DenseMatrix<f32>;
pub type Tape64 = tensor::Tape<f64>;
pub type Tape32 = tensor::Tape<f32>;
pub type Params64 = tensor::ParamStore<f64>;
pub type Params32 = tensor::ParamStore<f32>;
