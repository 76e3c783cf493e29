//! Whole-body model predictive control of a planar mobile manipulator in
//! contact with unknown linear-impedance environments, with two adaptive
//! extensions: online identification of the environment and model-reference
//! adaptation of a virtual end-effector force.

#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::large_enum_variant
)]

pub mod adaptive;
pub mod bench;
pub mod config;
pub mod environment;
pub mod error;
pub mod estimation;
pub mod model;
pub mod mpc;
pub mod sim;
pub mod traj;

pub use error::{Error, Result};
