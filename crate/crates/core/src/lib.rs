//! Extremum-seeking search for an avalanche transceiver with a quadrotor.
//!
//! The crate is organized along the signal path:
//!
//! * [`geometry`]: rotation conventions and the search-plane transform.
//! * [`arva`]: dipole field, noisy measurement and conditioning.
//! * [`esrg`]: extremum-seeking reference generator on the search plane.
//! * [`uav`]: rigid-body plant and internal-model LQR regulators.
//! * [`sim`]: scenario files, the multirate loop, ground truth and metrics.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arva;
pub mod esrg;
pub mod geometry;
pub mod sim;
pub mod uav;

pub use geometry::{HomTransform, Rot3, Vec3};
