//! Quantum-action fitting: Euclidean amplitudes, effective classical actions
//! reproducing them, and the analytics built on the fitted actions.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotic;
pub mod chaos;
pub mod error;
pub mod fitter;
pub mod instanton;
pub mod model;
pub mod propagator;
pub mod trajectory;

pub use error::{Error, Result};
pub use model::*;
