//! Almost-sure regime classification and exact simulation of affine SDEs
//! `dX = A X dt + σ(t) dB`.

pub mod cli;
pub mod criteria;
pub mod error;
pub mod linalg;
pub mod model;
pub mod quad;
pub mod report;
pub mod scenario;
pub mod simulate;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
