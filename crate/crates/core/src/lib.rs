//! Multimodal contrastive cross-view graph fusion classifier.
//!
//! Patients are nodes in two KNN graphs, one built from autoencoder features
//! of their images and one from clinical measurements. A graph-attention (or
//! graph-convolution) encoder runs on each view; the view embeddings are
//! concatenated with their inputs, projected, summed, and trained with a
//! per-view cross-entropy, a masked contrastive loss over the fused
//! similarity matrix, and a degree-target regulariser.
//!
//! The crate is `no_std` + `alloc`; file formats and the CLI live in the
//! `crossview` companion crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod autodiff;
pub mod encoder;
pub mod fusion;
pub mod gnn;
pub mod error;
pub mod graph;
pub mod nn;
pub mod pipeline;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
