//! Continuous-time recurrent networks built on a small reverse-mode
//! autodiff engine: liquid time-constant (LTC) and closed-form (CfC) cells,
//! a GRU baseline, and sparse four-layer circuit wiring.

// `!(x > 0.0)` is how NaN gets rejected; index loops read better in the numerics.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod autodiff;
pub mod cells;
pub mod checkpoint;
pub mod error;
pub mod wiring;

pub use autodiff::{Adam, AdamConfig, Parameters, Tape, Tensor, Var};
pub use cells::{Cell, CellKind};
pub use checkpoint::Checkpoint;
pub use error::{Error, Result};
pub use wiring::{build_wiring, validate_wiring, Wiring, WiringConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
