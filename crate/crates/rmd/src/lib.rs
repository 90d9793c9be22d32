//! ReLU matrix decomposition (RMD): find a low-rank matrix Θ = WH such that
//! X ≈ max(0, Θ) for a sparse nonnegative target X.
//!
//! The crate provides the masked latent formulation and its block coordinate
//! descent solvers (`solvers`), the supporting matrix operations (`core`),
//! executable checks for the identities the solvers rely on (`theory`),
//! problem generators and metrics for ReLU sampling, Euclidean distance
//! matrix completion, and thresholded similarity embedding (`data`), and the
//! command line front end (`cli`).

pub mod cli;
pub mod core;
pub mod data;
pub mod error;
pub mod solvers;
pub mod theory;

#[cfg(test)]
mod test_util;

pub use error::{Error, Result};
