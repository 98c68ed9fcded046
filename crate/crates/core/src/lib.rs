//! Distilling sentence embeddings into syntax-shaped networks of small
//! rule-keyed modules.
//!
//! A [`treebank`] corpus supplies constituency parses; each production
//! rule and POS tag owns one module in a [`modnet::ModuleRegistry`].
//! [`distill::train`] fits the registry so that composing word vectors
//! bottom-up along a parse reproduces a teacher's sentence vector.

pub mod analysis;
pub mod autodiff;
pub mod distill;
pub mod error;
pub mod modnet;
pub mod par;
pub mod synth;
pub mod treebank;

pub use error::{Error, Result};
