//! Evolutionary quantum architecture search with QFIM-based parameter
//! pruning.
//!
//! Circuits are encoded as bitstring genomes, pruned of redundant parameters
//! by inspecting the quantum Fisher information matrix, trained as binary
//! classifiers and evolved with roulette-wheel selection.

pub mod cli;
pub mod data;
pub mod error;
pub mod evolution;
pub mod genome;
pub mod pipeline;
pub mod qfim;
pub mod simulator;
pub mod trainer;

pub use error::{Error, Result};
