//! Wireless case studies: synthetic channels, CSI prediction and
//! multi-user beamforming.

// `!(x > 0.0)` is how NaN gets rejected; index loops read better in the numerics.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod beamform;
pub mod channel;
pub mod error;
pub mod predict;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
