//! Force recovery, environment identification and door geometry estimation.

pub mod door;
pub mod force;
pub mod miac;
pub mod momentum;

pub use door::{algebraic_circle_fit, estimate_door, DoorEstimate, DoorEstimator, DoorEstimatorConfig};
pub use force::{extract_ee_force, ForceEstimate, DEFAULT_MAX_JACOBIAN_CONDITION};
pub use miac::{MiacConfig, MiacFilterState, MiacUpdate};
pub use momentum::MomentumObserver;
