//! Exact decomposition of ReLU networks into local linear models.
//!
//! On the region of input space sharing one activation pattern, a ReLU
//! network is exactly affine. This crate computes that affine map in closed
//! form for feedforward, graph-convolutional, and tensor networks, describes
//! each region as an intersection of half-spaces, exports the whole network
//! as a decision-tree or propositional-logic surrogate, and uses the region
//! structure to compute exact Shapley attributions.

pub mod error;
pub mod io;
pub mod linalg;
pub mod networks;
pub mod regions;
pub mod sample;
pub mod shap;
pub mod surrogate;
pub mod unwrap;

pub use error::{Error, Result};
