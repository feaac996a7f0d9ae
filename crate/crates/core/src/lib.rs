//! Quasi-curvature locally linear embedding (QLLE) on landmark sets, with an
//! extreme-learning-machine map that extends the embedding to unseen samples.
//!
//! Pipeline: [`graph::knn`] → [`graph::quasi_curvature`] → [`graph::prune`] →
//! [`qlle::reconstruction_weights`] → [`qlle::embedding`], wrapped by
//! [`qlle::fit_qlle`]; [`oos::fit_nm_qlle`] runs it on landmarks and trains the
//! explicit map. [`retrieval`] holds the precision@k evaluation harness.

pub mod error;
pub mod graph;
pub mod model_io;
pub mod numerics;
pub mod oos;
pub mod parallel;
pub mod qlle;
pub mod retrieval;

pub use error::{Error, Result, Stage};
pub use graph::{NeighborGraph, Threshold};
pub use numerics::Matrix;
pub use oos::{ElmConfig, ElmModel, LandmarkSelection, NmConfig, NmQlleModel, PcaModel};
pub use qlle::{Embedding, QlleConfig, QlleFit, WeightMatrix};
