pub mod error;
pub mod cli;
pub mod derivative;
pub mod harmonic;
pub mod index;
pub mod linalg;
pub mod measure;
pub mod scalar;
pub mod structure;
pub mod zoo;

pub use error::{Error, Result};
