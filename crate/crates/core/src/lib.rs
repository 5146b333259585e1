//! Shape discrepancy from directional distance fields evaluated at shared
//! reference points, with analytic gradients, plus the registration,
//! scene-flow and template-fitting solvers driven by it.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod ddf;
pub mod deform;
pub mod error;
pub mod eval;
pub mod flow;
pub mod geom;
pub mod io;
pub mod metric;
pub mod optim;
pub mod records;
pub mod rigid;

pub use error::{DdmError, Result};
