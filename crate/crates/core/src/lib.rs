//! Dirac-type operators on collapsing flat fiber bundles.

pub mod assembly;
pub mod cli;
pub mod clifford;
pub mod collapse;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod operator;
pub mod resolvent;
pub mod spectrum;

pub use error::{Error, Result};
