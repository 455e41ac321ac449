//! File formats, synthetic data and the command pipeline around
//! `jointstream-core`.

pub mod binary;
pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod fbag;
pub mod manifest;
pub mod png_io;
pub mod report;
pub mod synth;

pub use error::{Error, Result};
