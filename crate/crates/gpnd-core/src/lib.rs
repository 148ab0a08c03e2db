//! Core algorithms for generative probabilistic novelty detection.
//!
//! The detector learns the manifold of inlier data with an adversarial
//! autoencoder, then scores a test sample by a factorized log density: the
//! decoder is linearized at the encoded sample (numerical Jacobian plus thin
//! SVD), the sample is expressed in coordinates parallel and perpendicular to
//! the tangent space, and the two coordinate groups are scored by a fitted
//! generalized Gaussian latent density and a residual-norm histogram.
//!
//! Design goals:
//! - deterministic: every random choice flows from one 64-bit seed ([`rng`]);
//! - `no_std` compatible (requires `alloc`): file IO, threading, and the
//!   command line live in the companion `gpnd` crate;
//! - all arithmetic in `f64`, since log densities and singular values are
//!   precision sensitive and the networks are small.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod aae;
pub mod dataset;
pub mod density;
pub mod detector;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod metrics;
pub mod nn;
pub mod persist;
pub mod protocol;
pub mod rng;

pub use error::{Error, Result};
