use nalgebra::{DMatrix, Matrix3};

use super::{QuadState, VehicleParams};
use crate::geometry::{skew, Rot3, Vec3};

/// Time derivative of a [`QuadState`]. The attitude rate is a raw matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub dp: Vec3,
    pub dv: Vec3,
    pub dr: Matrix3<f64>,
    pub dw: Vec3,
}

// Integration works on an unconstrained attitude matrix; it is projected back
// onto SO(3) once per step.
#[derive(Clone, Copy)]
struct RawState {
    p: Vec3,
    v: Vec3,
    r: Matrix3<f64>,
    w: Vec3,
}

fn deriv_raw(s: &RawState, thrust: f64, tau: &Vec3, params: &VehicleParams) -> StateDerivative {
    let e3 = Vec3::z();
    let j = params.inertia_matrix();
    let dv = s.r * e3 * (-thrust / params.mass) + e3 * params.g;
    let dr = s.r * skew(&s.w);
    let jw = j * s.w;
    let dw = Vec3::new(
        (tau.x - (s.w.y * jw.z - s.w.z * jw.y)) / params.inertia[0],
        (tau.y - (s.w.z * jw.x - s.w.x * jw.z)) / params.inertia[1],
        (tau.z - (s.w.x * jw.y - s.w.y * jw.x)) / params.inertia[2],
    );
    StateDerivative { dp: s.v, dv, dr, dw }
}

/// Newton-Euler rigid-body equations: thrust along body -z, gravity along +z.
pub fn dynamics_deriv(s: &QuadState, thrust: f64, tau: &Vec3, params: &VehicleParams) -> StateDerivative {
    let raw = RawState { p: s.p, v: s.v, r: *s.r.matrix(), w: s.w_body };
    deriv_raw(&raw, thrust, tau, params)
}

fn advance(s: &RawState, d: &StateDerivative, h: f64) -> RawState {
    RawState { p: s.p + d.dp * h, v: s.v + d.dv * h, r: s.r + d.dr * h, w: s.w + d.dw * h }
}

/// Classical RK4 step with inputs held constant, then re-orthonormalization.
pub fn integrate_rk4(s: &QuadState, thrust: f64, tau: &Vec3, dt: f64, params: &VehicleParams) -> QuadState {
    let x0 = RawState { p: s.p, v: s.v, r: *s.r.matrix(), w: s.w_body };
    let k1 = deriv_raw(&x0, thrust, tau, params);
    let k2 = deriv_raw(&advance(&x0, &k1, dt / 2.0), thrust, tau, params);
    let k3 = deriv_raw(&advance(&x0, &k2, dt / 2.0), thrust, tau, params);
    let k4 = deriv_raw(&advance(&x0, &k3, dt), thrust, tau, params);
    let w6 = dt / 6.0;
    QuadState {
        p: x0.p + (k1.dp + (k2.dp + k3.dp) * 2.0 + k4.dp) * w6,
        v: x0.v + (k1.dv + (k2.dv + k3.dv) * 2.0 + k4.dv) * w6,
        r: Rot3::orthonormalize(x0.r + (k1.dr + (k2.dr + k3.dr) * 2.0 + k4.dr) * w6),
        w_body: x0.w + (k1.dw + (k2.dw + k3.dw) * 2.0 + k4.dw) * w6,
    }
}

/// Continuous-time `(A, B)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

/// The four decoupled hover linearizations.
///
/// * yaw: `(psi, psi_dot)`, input `tau_z`
/// * roll: `(e_y, v_y, phi, phi_dot)`, input `tau_x`
/// * pitch: `(e_x, v_x, theta, theta_dot)`, input `tau_y`
/// * vertical: `(e_z, v_z)`, input `T - M g`
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedModels {
    pub yaw: LinearModel,
    pub roll: LinearModel,
    pub pitch: LinearModel,
    pub vertical: LinearModel,
}

fn chain(n: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n - 1 {
        a[(i, i + 1)] = 1.0;
    }
    a
}

fn input(n: usize, gain: f64) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(n, 1);
    b[(n - 1, 0)] = gain;
    b
}

pub fn linearized_models(params: &VehicleParams) -> LinearizedModels {
    let [jx, jy, jz] = params.inertia;
    let mut roll_a = chain(4);
    roll_a[(1, 2)] = params.g;
    let mut pitch_a = chain(4);
    pitch_a[(1, 2)] = -params.g;
    LinearizedModels {
        yaw: LinearModel { a: chain(2), b: input(2, 1.0 / jz) },
        roll: LinearModel { a: roll_a, b: input(4, 1.0 / jx) },
        pitch: LinearModel { a: pitch_a, b: input(4, 1.0 / jy) },
        vertical: LinearModel { a: chain(2), b: input(2, -1.0 / params.mass) },
    }
}
