//! Simulation of measurement-based computation on matrix-product resource
//! states in symmetry-protected phases.
//!
//! Two levels of description are provided and cross-checked:
//! an exact channel-level engine on the virtual (logical ⊗ junk) space, and a
//! Monte Carlo trajectory sampler. A dense state-vector oracle on short chains
//! validates both.

pub mod channel;
pub mod error;
pub mod gates;
pub mod linalg;
pub mod measurement;
pub mod model;
pub mod oracle;
pub mod trajectory;

pub use error::{Error, Result};
