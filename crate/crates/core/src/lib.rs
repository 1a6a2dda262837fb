//! Primal-dual conditional gradient methods for convex problems with
//! function constraints, with an IMRT treatment-planning application.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conex;
pub mod error;
pub mod imrt;
pub mod linalg;
pub mod lmo;
pub mod problem;
pub mod ratefit;
pub mod smoothing;
pub mod solver;

pub use error::{CoexError, Result};
