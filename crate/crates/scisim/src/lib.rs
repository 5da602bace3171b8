//! Desk-scale simulator for adaptive video snapshot compressive imaging.
//!
//! A coded-aperture camera folds every B consecutive video frames into a
//! single measurement through per-frame binary masks. Larger B compresses
//! harder but blurs motion; the right B depends on how fast the scene is
//! moving. This crate closes that loop: it senses synthetic (or loaded)
//! video through a fixed mask stack, detects objects directly on the
//! normalized measurements, optionally reconstructs the frames with a
//! GAP-TV solver, and feeds the detection rate (and during training, the
//! reconstruction PSNR) to a tabular Q-learning policy that adapts B
//! between `{6, 8, 10, 12, 15, 20}` as the scene changes.
//!
//! Everything is deterministic under explicit seeds: scene generation,
//! masks, sensing noise, transitions, and training.

pub mod config;
pub mod detect;
pub mod error;
pub mod reconstruct;
pub mod rl;
pub mod runner;
pub mod sensing;
pub mod video;

pub use error::{Error, Result};
