//! Tangent kernel and feature alignment diagnostics.
//!
//! * [`spectral`]: eigendecompositions, effective rank, trace ratios, CKA.
//! * [`tangent`]: dense networks, exact tangent features and kernels.
//! * [`linear`]: linear models, SuperNat and capacity bounds.
//! * [`datasets`]: synthetic generators and IDX/CSV loaders.
//! * [`trajectory`]: training traces and checkpoint diagnostics.

// Negated comparisons deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datasets;
pub mod error;
pub mod linear;
pub mod spectral;
pub mod tangent;
pub mod trajectory;

pub use error::{Error, Result};
