//! Certification of uniqueness and linear robustness of multi-qubit states
//! determined by local marginals.
//!
//! Qubit indices are 0-based throughout the Rust API; JSON and CLI inputs
//! use 1-based subsets. Basis index bit `n-1-q` is qubit `q`.

pub mod certify;
pub mod commands;
pub mod config;
pub mod error;
pub mod gme;
pub mod linalg;
pub mod marginal;
pub mod pauli;
pub mod probes;
pub mod runlog;
pub mod sdp;
pub mod states;

pub use error::{Error, Result};
