//! Quantum PAC learning of measurement classes with classical shadows.

pub mod concept;
pub mod error;
pub mod learner;
pub mod linalg;
pub mod loss;
pub mod quantum;
pub mod rng;
pub mod shadow;
pub mod shadow_norm;

pub use error::{Error, Result};
