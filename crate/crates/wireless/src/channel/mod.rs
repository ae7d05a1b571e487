pub mod csi;
pub mod fading;
pub mod geometry;
pub mod scenario;

pub use csi::CsiTensor;
pub use fading::{bessel_j0, doppler_frequency, jakes_sequence, SosFader};
pub use geometry::{beamforming_channel_sequence, steering_vector, BeamformingScenario, ChannelSet, CMatrix, Phase};
pub use scenario::{random_walk, PredictionScenario, Trajectory};
