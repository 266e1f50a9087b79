//! IO, file formats, and the command-line interface for the `siamrae`
//! segment-embedding toolkit. All numerics live in `siamrae-core`; this
//! crate adds WAV decoding, manifests, the binary container formats, and
//! the `synth | train | embed | score | evaluate` subcommands.

pub mod commands;
pub mod container;
pub mod error;
pub mod formats;
pub mod inputs;
pub mod manifest;
pub mod wav;

pub use error::{CliError, CliResult};
