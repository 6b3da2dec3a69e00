#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod cmc;
pub mod curvature;
pub mod error;
pub mod heat;
pub mod lichnerowicz;
pub mod poly;
pub mod quad;
pub mod sphere;
pub mod symmetry;
pub mod warped;

pub use error::{LabError, Result};
