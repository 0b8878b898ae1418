//! Dense-matrix reverse-mode autodiff, sparse products, Adam, and the
//! checkpoint format: the numerical substrate for training.

pub mod adam;
pub mod checkpoint;
pub mod grad_check;
pub mod matrix;
pub mod params;
pub mod sparse;
pub mod tape;

pub use adam::{AdamConfig, AdamState};
pub use grad_check::{grad_check, GradCheckReport};
pub use matrix::DenseMatrix;
pub use params::ParamStore;
pub use sparse::SparseMatrix;
pub use tape::{sigmoid_scalar, softplus_scalar, Gradients, NodeId, Tape};
