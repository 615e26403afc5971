//! Hierarchical text classification with per-layer heads over shared,
//! nested representations, a loss that penalizes predictions inconsistent
//! with the category tree, and decoders that only emit valid paths.
//!
//! Modules from the bottom up: [`hierarchy`] (category trees), [`nncore`]
//! (matrices, layers, optimizers), [`model`], [`loss`], [`inference`]
//! (decoders), [`data`], [`metrics`], [`engine`] (training, checkpoints,
//! configuration).

pub mod data;
pub mod engine;
pub mod error;
pub mod hierarchy;
pub mod inference;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod nncore;

pub use error::{Error, Result};
pub use hierarchy::{CategoryTree, LabelPath};
pub use inference::{DecodedPath, Decoder};
pub use model::{DhcModel, ModelConfig, ShareMode};
