//! File formats, pipeline wiring, the `hypersal` CLI and the annotation HTTP
//! service around [`hypersal_core`].

pub mod config;
pub mod error;
pub mod fixture;
pub mod io;
pub mod pipeline;
pub mod service;

pub use error::{Error, Result};
