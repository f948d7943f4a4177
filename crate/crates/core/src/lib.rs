pub mod error;
pub mod quad;
pub mod special;
pub mod potentials;
pub mod jost;
pub mod spectral;
pub mod marchenko;

pub use error::{Error, Result};
pub mod cli;
