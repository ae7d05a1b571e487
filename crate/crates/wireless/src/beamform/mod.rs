pub mod experiment;
pub mod glnn;
pub mod reference;
pub mod se;
pub mod wmmse;

pub use experiment::{run_glnn_experiment, BfConfig, BfReport, SeTrace, SCHEMES};
pub use glnn::{Glnn, GlnnConfig, GlnnStep};
pub use reference::{mrt, reference_precoders, zf, ReferenceKind};
pub use se::{power_project, se_gradient, sum_se, user_rates, PrecoderSet};
pub use wmmse::{wmmse_solve, WmmseConfig, WmmseResult};
