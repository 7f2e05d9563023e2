//! Gene regulatory network inference by node-wise penalized regression.
//!
//! Each gene is regressed on all others under one of several penalties
//! (lasso, ridge, elastic net, fused, group, sparse group, paired group and
//! hierarchical interaction lasso). Penalties are tuned by cross-validation,
//! coefficients are assembled into a weighted network, and the network can be
//! thresholded, stabilized by response permutation and scored against a gold
//! standard.
//!
//! All penalized objectives use the convention
//! `(1/(2n)) ‖y − Xθ‖² + P(θ)`.

pub mod data;
pub mod error;
pub mod evaluation;
pub mod grouping;
pub mod model_selection;
pub mod network;
pub mod solvers;
pub mod synthetic;

pub use nalgebra;

pub use data::{ExpressionMatrix, ResponseView};
pub use error::{Error, Result};
pub use solvers::{Family, FitResult, PenaltySpec, SolverOptions};
