//! Dense state-vector simulation, hybrid quantum-classical binary classifiers
//! and white-box adversarial attacks on them.

pub mod attacks;
pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod qnn;
pub mod qsim;
pub mod search;

#[cfg(any(test, feature = "oracle"))]
pub mod oracle;

pub use error::{Error, Result};
