//! File formats, experiment manifests, artifact writers and the matrix
//! runner around [`fedrad_core`].

pub mod error;
pub mod fetch;
pub mod idx;
pub mod manifest;
pub mod report;
pub mod runner;
pub mod svg;

pub use error::{Error, Result};
