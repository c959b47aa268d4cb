//! View-tolerant, mirror-symmetric face signatures.
//!
//! The crate is organised as a pipeline:
//!
//! * [`stimuli`]: symmetric 3D blob faces, depth-rotated views and orbits.
//! * [`encoder`]: raw-pixel or C1 encodings with an exact feature-space reflection.
//! * [`learning`]: online Hebb / Oja / Sanger / Foldiak / ICA rules and batch PCA.
//! * [`signature`]: pooled nonlinear template responses.
//! * [`analysis`]: tuning curves, parity, ROC/AUC, similarity matrices and the
//!   property checks that tie everything together.
//!
//! Batch work (orbits, identities, repetitions) goes through [`exec::Execution`],
//! which uses rayon when the `parallel` feature is enabled.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod encoder;
pub mod error;
pub mod exec;
pub mod export;
pub mod learning;
pub mod linalg;
pub mod signature;
pub mod stimuli;

pub use error::{Error, Result};
pub use exec::Execution;
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
