//! Simulator and algorithm library for satellite-to-ground links assisted by
//! two cooperative reflecting surfaces: one near the ground node and one
//! mounted next to the satellite.
//!
//! All quantities are in SI units, angles in radians and complex baseband.

// Negated comparisons are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arrays;
pub mod beamforming;
pub mod channels;
pub mod error;
pub mod estimation;
pub mod experiments;
pub mod geometry;
pub mod linalg;
pub mod rng;
pub mod tracking;

use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex64;

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

pub use arrays::{steering_vector, upa_response, ArrayGeometry};
pub use beamforming::{BeamSolution, LocalCsi, Scheme, Side};
pub use channels::{ChannelSet, PathGain, ShortRangeModel, SplitGains};
pub use error::{Error, Result};
pub use estimation::{TrainingConfig, TrainingRecord};
pub use experiments::{ResultRow, SweepSpec, SweepVariable};
pub use geometry::{AoAPair, Orientation, Position3D, ScenarioConfig};
pub use tracking::{ProtocolConfig, TrackingTrace};
