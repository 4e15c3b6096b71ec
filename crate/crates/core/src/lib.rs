//! Interactive coding of 360-degree images.

pub mod baselines;
pub mod blocks;
pub mod codec;
pub mod container;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod geom;
pub mod image;
pub mod incremental;
pub mod intra;
pub mod ldpca;
pub mod ordering;
pub mod placement;
pub mod session;
pub mod trace;

pub use error::{Error, Result};
