//! Fixed-dimension embeddings of variable-length feature sequences with a
//! Siamese recurrent autoencoder, plus cosine-distance detection of atypical
//! segments against reference pools.
//!
//! The crate is organized around the pipeline stages:
//!
//! - [`features`]: filterbank extraction, global normalization, synthetic
//!   corpus generation, and frame-span arithmetic.
//! - [`rae`]: the GRU encoder/decoder model, embedding projection with L2
//!   normalization, reconstruction losses, and exact reverse-mode gradients.
//! - [`siamese`]: pair/triplet sampling, contrastive and triplet losses,
//!   combined objectives, and the training loop.
//! - [`detection`]: reference pools and mean-cosine-similarity scoring with
//!   threshold classification.
//! - [`eval`]: same-different pairing, precision-recall curves, and average
//!   precision.
//!
//! Everything here is pure computation over in-memory data. File formats,
//! WAV decoding, and the command-line interface live in the companion
//! `siamrae` crate. The crate is `no_std` (with `alloc`); all math goes
//! through `libm` so results are identical between test and release builds.
//!
//! Randomness is drawn from a single seedable generator (ChaCha8 from
//! `rand_chacha`); see [`rng`] for the derivation rules that make every
//! sampling and initialization step reproducible from one seed.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod detection;
pub mod error;
pub mod eval;
pub mod features;
mod mat;
mod math;
pub mod optim;
pub mod rae;
pub mod rng;
pub mod siamese;

pub use error::{Error, Result};
pub use mat::Mat;
