#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exaggerate;
pub mod losses;
pub mod mesh;
pub mod pca;
pub mod registration;
pub mod scoring;
pub mod spatial;
pub mod synth;
pub mod texture;
pub mod toy;

pub use error::{Error, Result};
