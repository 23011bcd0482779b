//! Pilot design and beam-training simulation for wideband near-field arrays.
//!
//! The crate designs true-time-delay / phase-shifter (TD-PS) pilot
//! parameters so that the beams of different OFDM subcarriers sweep the whole
//! angle range several times while their focal distance ring drifts, then
//! simulates beam training with those pilots against exhaustive and
//! rainbow-style baselines.

// `!(x > 0.0)` style checks are kept so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod array;
pub mod beamsplit;
pub mod design;
pub mod error;
pub mod harness;
pub mod numeric;
pub mod training;

pub use array::{PolarLocation, SteeringVector, SystemConfig};
pub use beamsplit::{BeamFocus, TdPsParams};
pub use design::{DesignInputs, FixedTdNetwork, PilotPlan};
pub use error::{Error, Result};
pub use training::{ObservationGrid, Scheme, TrainingEstimate};
