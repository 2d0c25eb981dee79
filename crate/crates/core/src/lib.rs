//! Evolving symbolic formulas for dimensionality reduction.
//!
//! A genome is a set of expression trees (a *multi-tree*) mapping a feature
//! row to a `k`-dimensional latent point, or an encoder/decoder pair of
//! multi-trees. Genomes are evolved against one of four objectives:
//!
//! * Sammon stress between original and latent pairwise distances,
//! * weighted Kendall rank agreement of per-point distance rankings,
//! * mean squared error to the bottleneck of a trained neural autoencoder,
//! * reconstruction error of an evolved tree decoder.
//!
//! PCA and isomap baselines, a random-forest/neural-decoder evaluation
//! protocol and Mann-Whitney U testing are provided to compare methods.

pub mod baselines;
mod clock;
pub mod dataset;
pub mod distances;
pub mod error;
pub mod eval;
pub mod evolution;
pub mod experiment;
pub mod fitness;
pub mod gp;
pub mod neural;
pub mod numerics;
mod par;
pub mod rng;
pub mod stats;
pub mod variation;

pub use error::{Error, Result};
pub use numerics::Matrix;
