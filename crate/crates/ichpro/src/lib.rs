//! Joint-attention cross-modal fusion for hemorrhage prognosis, desk scale.
//!
//! The crate is self-contained: a reverse-mode autodiff tensor core, toy
//! text/vision encoders with representation-transformation blocks, the
//! cross-modal attention fusion (CMAF) and multi-head self-attention fusion
//! (MHSAF) blocks, the VTMF joint loss (IMIMA + SDM + MLM), a synthetic
//! bimodal dataset generator, and a five-fold training/ablation/Score-CAM
//! harness behind the `ichpro` CLI.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod datagen;
pub mod encoders;
pub mod error;
pub mod fusion;
pub mod losses;
pub mod model;
pub mod params;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
