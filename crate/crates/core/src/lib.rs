//! Texture-aware iris verification engine.
//!
//! The crate provides, bottom-up:
//!
//! - [`tensor`] / [`tape`]: a dense `f32` tensor type and reverse-mode
//!   automatic differentiation sufficient to train the models here;
//! - [`layers`]: convolution, batch norm, max / window-mean pooling, pixel
//!   shuffle, global spatial averaging, fully connected;
//! - [`losses`]: windowed-SSIM reconstruction loss and cross-entropy;
//! - [`models`]: the 4-block encoder, parameter-free pixel-shuffle decoder,
//!   and classifier variants, with exact parameter accounting;
//! - [`train`]: two-stage training (unsupervised reconstruction
//!   pre-training, supervised refinement) with SGD and deterministic
//!   seeding;
//! - [`data`]: PGM image I/O, synthetic texture dataset generation,
//!   manifests, and binary checkpoints;
//! - [`eval`]: signature extraction, verification scoring, and DET/EER/AUC
//!   metrics;
//! - [`pipeline`]: end-to-end experiment drivers (within-dataset and
//!   cross-dataset protocols, ablation table).

pub mod data;
pub mod error;
pub mod eval;
mod kernels;
pub mod layers;
pub mod losses;
pub mod models;
pub mod pipeline;
pub mod rng;
pub mod tape;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use layers::PoolKind;
pub use models::{Classifier, HeadKind, ParamReport};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
