//! Quadrotor plant and the internal-model LQR position controller.

mod control;
mod dynamics;
mod lqr;

pub use control::{
    control_step, internal_model_matrices, internal_model_step, ControlOutput, InternalModel,
    RegulatorState,
};
pub use dynamics::{dynamics_deriv, integrate_rk4, linearized_models, LinearModel, LinearizedModels, StateDerivative};
pub use lqr::{
    closed_loop_spectral_radius, discretize_zoh, solve_dare, synthesize_gains, AxisWeights,
    LqrWeights, RegulatorGains,
};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, Rot3, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UavError {
    #[error("invalid vehicle parameters: {0}")]
    InvalidParams(String),
    #[error("invalid LQR weights: {0}")]
    InvalidWeights(String),
    #[error("Riccati iteration did not converge after {0} iterations")]
    RiccatiNoConvergence(usize),
    #[error("singular matrix in {0}")]
    Singular(&'static str),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleParams {
    /// kg
    pub mass: f64,
    /// Principal moments of inertia, kg m^2.
    pub inertia: [f64; 3],
    pub g: f64,
    pub t_min: f64,
    pub t_max: f64,
    /// Per-axis torque limit, N m.
    pub tau_max: f64,
    /// Planar speed limit used to validate ES parameters, m/s.
    pub max_speed: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        let mass = 1.5;
        let g = 9.81;
        Self {
            mass,
            inertia: [0.029, 0.029, 0.055],
            g,
            t_min: 0.0,
            t_max: 2.0 * mass * g,
            tau_max: 0.5,
            max_speed: 4.0,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), UavError> {
        if !(self.mass > 0.0) {
            return Err(UavError::InvalidParams(format!("mass {}", self.mass)));
        }
        if self.inertia.iter().any(|j| !(*j > 0.0)) {
            return Err(UavError::InvalidParams(format!("inertia {:?}", self.inertia)));
        }
        if !(self.g > 0.0) {
            return Err(UavError::InvalidParams(format!("gravity {}", self.g)));
        }
        if !(self.t_min >= 0.0 && self.t_max > self.t_min) {
            return Err(UavError::InvalidParams(format!(
                "thrust range [{}, {}]",
                self.t_min, self.t_max
            )));
        }
        if self.hover_thrust() > self.t_max || self.hover_thrust() < self.t_min {
            return Err(UavError::InvalidParams("hover thrust outside thrust range".into()));
        }
        if !(self.tau_max > 0.0) || !(self.max_speed > 0.0) {
            return Err(UavError::InvalidParams("tau_max and max_speed must be positive".into()));
        }
        Ok(())
    }

    pub fn hover_thrust(&self) -> f64 {
        self.mass * self.g
    }

    pub fn inertia_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::from(self.inertia))
    }
}

/// Rigid-body state in the NED inertial frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadState {
    pub p: Vec3,
    pub v: Vec3,
    /// Body to inertial attitude.
    pub r: Rot3,
    /// Body angular rate, rad/s.
    pub w_body: Vec3,
}

impl QuadState {
    pub fn at_rest(p: Vec3) -> Self {
        Self { p, v: Vec3::zeros(), r: Rot3::identity(), w_body: Vec3::zeros() }
    }

    /// Largest absolute component over position, velocity and rate.
    pub fn magnitude(&self) -> f64 {
        self.p.amax().max(self.v.amax()).max(self.w_body.amax())
    }

    pub fn is_finite(&self) -> bool {
        self.p.iter().chain(self.v.iter()).chain(self.w_body.iter()).all(|x| x.is_finite())
            && self.r.matrix().iter().all(|x| x.is_finite())
    }
}
