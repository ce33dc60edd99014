//! Training and evaluation engine for multi-energy CT lymph-node classification
//! with channel squeeze-and-excitation and a virtual-class softmax.

pub mod data;
pub mod error;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod ndcore;
pub mod rng;
pub mod train;

pub use error::{Error, ErrorKind, Result};
