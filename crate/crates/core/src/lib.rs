//! Negative-sample analysis for InfoNCE-style contrastive learning:
//! coupon-collector and collision probabilities, loss estimators, lower and
//! upper bounds on supervised losses, and a small synthetic training
//! pipeline to evaluate them on.

pub mod analysis;
pub mod bounds;
pub mod datamodel;
pub mod error;
pub mod losses;
pub mod numeric;
pub mod probkit;
pub mod rng;
pub mod toytrain;

pub use error::{Error, Result};
