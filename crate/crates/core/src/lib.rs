//! Desk-scale exact machine unlearning engine.
//!
//! The training data is split into a public half (used to pre-train a small
//! frozen feature-extraction backbone) and a private half. Private data is
//! clustered by feature diversity, and each cluster gets its own tunable
//! pixel-frame prompt plus classifier head. Removing a private point then
//! only requires re-optimizing the affected cluster's prompt and head from
//! pinned seeds, which is provably equivalent to retraining from scratch on
//! the reduced dataset.

pub mod backbone;
pub mod baseline;
pub mod checkpoint;
pub mod cluster;
pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod num;
pub mod prompt;
pub mod rng;
pub mod unlearn;

pub use error::{Error, Result};
