//! Bounded-update-rate extremum-seeking reference generator.
//!
//! The reference moves on the search plane at speed `sqrt(alpha * omega)`
//! with heading `omega * t + kappa * y`, so the measurement only enters
//! through the phase. `alpha` ramps from zero towards `alpha_max` through a
//! first-order lag discretized with the bilinear transform.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EsError {
    #[error("invalid ES parameter: {0}")]
    InvalidParams(String),
    #[error("history spans {have} s but one loiter period is {need} s")]
    InsufficientHistory { have: f64, need: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EsParams {
    /// Target value of the dither gain, m^2/s.
    pub alpha_max: f64,
    pub kappa: f64,
    /// Loiter frequency, rad/s.
    pub omega: f64,
    /// Time constant of the alpha ramp, s.
    pub lambda: f64,
    /// ES step, s.
    pub dt_es: f64,
}

impl Default for EsParams {
    fn default() -> Self {
        Self { alpha_max: 20.0, kappa: 0.07, omega: 0.65, lambda: 5.0, dt_es: 0.1 }
    }
}

impl EsParams {
    /// Checks positivity and, if given, that the steady speed fits the vehicle.
    pub fn validate(&self, max_speed: Option<f64>) -> Result<(), EsError> {
        for (name, v) in [
            ("alpha_max", self.alpha_max),
            ("kappa", self.kappa),
            ("omega", self.omega),
            ("lambda", self.lambda),
            ("dt_es", self.dt_es),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(EsError::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(vmax) = max_speed {
            if steady_speed(self) > vmax {
                return Err(EsError::InvalidParams(format!(
                    "steady speed {} exceeds vehicle limit {vmax}",
                    steady_speed(self)
                )));
            }
        }
        Ok(())
    }

    /// Period of one loiter circle, `2 pi / omega`.
    pub fn loiter_period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EsState {
    pub x_ref: f64,
    pub y_ref: f64,
    pub alpha: f64,
    pub t: f64,
}

impl EsState {
    /// Starts at the vehicle's current plane position with `alpha = 0`.
    pub fn start(x: f64, y: f64) -> Self {
        Self { x_ref: x, y_ref: y, alpha: 0.0, t: 0.0 }
    }
}

/// One forward-Euler step of the reference generator.
pub fn es_step(state: &EsState, y_t: f64, params: &EsParams) -> EsState {
    let speed = (state.alpha * params.omega).sqrt();
    let phase = params.omega * state.t + params.kappa * y_t;
    let (s, c) = phase.sin_cos();
    EsState {
        x_ref: state.x_ref + speed * c * params.dt_es,
        y_ref: state.y_ref + speed * s * params.dt_es,
        alpha: alpha_filter_step(state.alpha, params),
        t: state.t + params.dt_es,
    }
}

/// Bilinear discretization of `d alpha/dt = (alpha_max - alpha) / lambda`.
pub fn alpha_filter_step(alpha: f64, params: &EsParams) -> f64 {
    let a = params.dt_es / (2.0 * params.lambda);
    let next = ((1.0 - a) * alpha + 2.0 * a * params.alpha_max) / (1.0 + a);
    next.min(params.alpha_max)
}

/// Forward-Euler step of the averaged gradient flow. Validation only.
pub fn average_step(
    pos: (f64, f64),
    map_gradient: (f64, f64),
    kappa: f64,
    alpha: f64,
    dt: f64,
) -> (f64, f64) {
    let gain = 0.5 * kappa * alpha * dt;
    (pos.0 - gain * map_gradient.0, pos.1 - gain * map_gradient.1)
}

pub fn steady_speed(params: &EsParams) -> f64 {
    (params.alpha_max * params.omega).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CentreEstimate {
    pub cx: f64,
    pub cy: f64,
    pub window: f64,
}

/// A time-stamped plane reference sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

/// Mean of the reference samples over the trailing loiter period ending at `t`.
///
/// `history` must be sorted by time. Samples with `t - window < t_i <= t`
/// contribute.
pub fn centre_estimate(history: &[RefSample], omega: f64, t: f64) -> Result<CentreEstimate, EsError> {
    let window = 2.0 * std::f64::consts::PI / omega;
    let tol = 1e-9 * window.max(1.0);
    let have = history.first().map_or(0.0, |s| t - s.t);
    if history.is_empty() || have < window - tol {
        return Err(EsError::InsufficientHistory { have, need: window });
    }
    let start = t - window + tol;
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for s in history.iter().rev() {
        if s.t > t + tol {
            continue;
        }
        if s.t <= start {
            break;
        }
        sx += s.x;
        sy += s.y;
        n += 1;
    }
    if n == 0 {
        return Err(EsError::InsufficientHistory { have, need: window });
    }
    Ok(CentreEstimate { cx: sx / n as f64, cy: sy / n as f64, window })
}
