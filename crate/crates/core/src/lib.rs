//! Spectral-submanifold reduction of harmonically forced mechanical systems
//! with internal resonance, forced-response continuation and full-system
//! periodic-orbit validation.

pub mod continuation;
pub mod error;
pub mod frc;
pub mod linalg;
pub mod model;
pub mod models;
pub mod ode;
pub mod pipeline;
pub mod oracle;
pub mod poly;
pub mod reduced;
pub mod registry;
pub mod series;
pub mod spectral;
pub mod ssm;

pub use error::{Result, SsmError};

/// Library version, stamped on emitted artifacts.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
