//! Squashed quantum non-Markovianity for finite-dimensional tripartite
//! states: entropic functionals, the variational estimator over state
//! extensions and its analytic bounds, recovery maps, k-extendibility caps
//! and resource-theory rates.
//!
//! All logarithms are base 2 and every value is in bits.

pub mod entropic;
pub mod error;
pub mod extendibility;
pub mod linalg;
pub mod parties;
pub mod qstate;
pub mod recovery;
pub mod resource;
pub mod squash;
pub mod states;

pub use error::{Error, Result};
