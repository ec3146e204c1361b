//! Simulation and inference pipeline for small Markovian open systems probed
//! through a single output state.
//!
//! The crate covers the full loop: propagate an (N+1)-state Lindblad model,
//! sweep a tunable output coupling to turn one system into a feature vector
//! of output populations, persist labeled datasets, classify the state count
//! with K-nearest neighbors, and regress every Hamiltonian matrix element
//! and dephasing rate with a from-scratch MLP.

pub mod coupling;
pub mod dataset;
pub mod error;
pub mod experiments;
pub mod fsio;
pub mod knn;
pub mod linalg;
pub mod lindblad;
pub mod metrics;
pub mod mlp;
pub mod rng;

pub use error::{CoreError, Result};
pub use lindblad::{DensityMatrix, EffectiveModel, FullHamiltonian, Liouvillian, OutputCouplingSet};
