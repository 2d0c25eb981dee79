//! Baseline dimensionality-reduction models and a common wrapper over
//! every model the evaluation protocol accepts.

pub mod isomap;
pub mod pca;

pub use isomap::{isomap_fit, isomap_transform, Isomap};
pub use pca::{pca_fit, pca_transform, Pca};

use crate::error::Result;
use crate::gp::{AutoencoderMultiTree, MultiTree};
use crate::numerics::Matrix;

/// A fitted mapping from `p` input columns to a `k`-dimensional latent space.
#[derive(Debug, Clone)]
pub enum DrModel {
    Pca(Pca),
    Isomap(Box<Isomap>),
    Gp(MultiTree),
    GpAuto(AutoencoderMultiTree),
}

impl DrModel {
    pub fn k(&self) -> usize {
        match self {
            DrModel::Pca(m) => m.k(),
            DrModel::Isomap(m) => m.k(),
            DrModel::Gp(m) => m.k(),
            DrModel::GpAuto(m) => m.encoder.k(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            DrModel::Pca(_) => "pca",
            DrModel::Isomap(_) => "isomap",
            DrModel::Gp(_) => "gp",
            DrModel::GpAuto(_) => "gp_auto",
        }
    }

    pub fn transform(&self, rows: &Matrix) -> Result<Matrix> {
        match self {
            DrModel::Pca(m) => m.transform(rows),
            DrModel::Isomap(m) => m.transform(rows),
            DrModel::Gp(m) => m.encode(rows),
            DrModel::GpAuto(m) => m.encoder.encode(rows),
        }
    }
}
