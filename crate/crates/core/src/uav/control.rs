//! Internal-model regulators and the per-step control law.

use nalgebra::{Matrix3, Vector2, Vector3, Vector4};

use super::{QuadState, RegulatorGains, UavError, VehicleParams};
use crate::geometry::{rot_to_rpy, Vec3};

/// Bilinear discretization of the bias-plus-sinusoid generator
/// `eta' = Phi eta + G e`, `Phi = [0 1 0; 0 0 1; 0 -omega^2 0]`, `G = e3`.
///
/// The transform is prewarped at `omega` so the discrete oscillator sits
/// exactly at angle `omega * dt` on the unit circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InternalModel {
    pub a: Matrix3<f64>,
    pub b: Vector3<f64>,
    pub omega: f64,
}

pub fn internal_model_matrices(omega: f64, dt: f64) -> InternalModel {
    let phi = Matrix3::new(0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, -omega * omega, 0.0);
    let g = Vector3::z();
    // prewarped half step; tends to dt/2 as omega -> 0
    let c = if omega > 0.0 { (omega * dt / 2.0).tan() / omega } else { dt / 2.0 };
    let eye = Matrix3::identity();
    let inv = (eye - phi * c).try_inverse().expect("det(I - c Phi) = 1 + (c omega)^2 > 0");
    InternalModel { a: inv * (eye + phi * c), b: inv * g * (2.0 * c), omega }
}

/// One step of the discrete internal model driven by the error `e`.
pub fn internal_model_step(eta: &Vector3<f64>, e: f64, omega: f64, dt: f64) -> Vector3<f64> {
    let im = internal_model_matrices(omega, dt);
    im.a * eta + im.b * e
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RegulatorState {
    pub eta_r: Vector3<f64>,
    pub eta_p: Vector3<f64>,
    pub eta_v: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub thrust: f64,
    pub tau: Vec3,
    pub regulator: RegulatorState,
}

/// Computes saturated thrust and torques toward the inertial reference and
/// advances the internal-model states. The yaw reference is zero.
pub fn control_step(
    s: &QuadState,
    reference: &Vec3,
    reg: &RegulatorState,
    gains: &RegulatorGains,
    params: &VehicleParams,
) -> Result<ControlOutput, UavError> {
    let (roll, pitch, yaw) = rot_to_rpy(&s.r)?;
    let e = s.p - reference;
    let w = s.w_body;

    let tau_z = -(gains.k_y * Vector2::new(yaw, w.z))[0];
    let x_r = Vector4::new(e.y, s.v.y, roll, w.x);
    let tau_x = -(gains.k_r * x_r)[0] - (gains.k_eta_r * reg.eta_r)[0];
    let x_p = Vector4::new(e.x, s.v.x, pitch, w.y);
    let tau_y = -(gains.k_p * x_p)[0] - (gains.k_eta_p * reg.eta_p)[0];
    let x_v = Vector2::new(e.z, s.v.z);
    let delta_t = -(gains.k_v * x_v)[0] - (gains.k_eta_v * reg.eta_v)[0];

    let im = &gains.internal_model;
    let regulator = RegulatorState {
        eta_r: im.a * reg.eta_r + im.b * e.y,
        eta_p: im.a * reg.eta_p + im.b * e.x,
        eta_v: im.a * reg.eta_v + im.b * e.z,
    };
    let lim = params.tau_max;
    Ok(ControlOutput {
        thrust: (params.hover_thrust() + delta_t).clamp(params.t_min, params.t_max),
        tau: Vec3::new(tau_x.clamp(-lim, lim), tau_y.clamp(-lim, lim), tau_z.clamp(-lim, lim)),
        regulator,
    })
}
