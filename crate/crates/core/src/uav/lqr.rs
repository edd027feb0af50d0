//! Discrete LQR synthesis for the four hover loops.

use nalgebra::{DMatrix, RowVector2, RowVector3, RowVector4};
use serde::{Deserialize, Serialize};

use super::control::{internal_model_matrices, InternalModel};
use super::dynamics::{linearized_models, LinearModel};
use super::{UavError, VehicleParams};

const DARE_TOL: f64 = 1e-10;
const DARE_MAX_ITER: usize = 200;

/// Diagonal state weights and a scalar input weight for one loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisWeights {
    pub q: Vec<f64>,
    pub r: f64,
}

/// Weights for the yaw loop (2 states) and the augmented roll, pitch (4 + 3)
/// and vertical (2 + 3) loops. Augmented state order is plant states
/// followed by the three internal-model states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LqrWeights {
    pub yaw: AxisWeights,
    pub roll: AxisWeights,
    pub pitch: AxisWeights,
    pub vertical: AxisWeights,
}

impl Default for LqrWeights {
    fn default() -> Self {
        let lateral = AxisWeights { q: vec![4.0, 0.025, 0.025, 10.0, 50.0, 15.0, 50.0], r: 1.5 };
        Self {
            yaw: AxisWeights { q: vec![10.0, 1.0], r: 100.0 },
            roll: lateral.clone(),
            pitch: lateral,
            vertical: AxisWeights { q: vec![0.065, 0.035, 40.0, 0.02, 10.0], r: 0.003 },
        }
    }
}

impl LqrWeights {
    /// Scales every input weight by `factor`. A factor above one penalizes
    /// control effort more and slows every loop down.
    pub fn detuned(&self, factor: f64) -> Self {
        let scale = |w: &AxisWeights| AxisWeights { q: w.q.clone(), r: w.r * factor };
        Self {
            yaw: scale(&self.yaw),
            roll: scale(&self.roll),
            pitch: scale(&self.pitch),
            vertical: scale(&self.vertical),
        }
    }

    fn check(&self) -> Result<(), UavError> {
        for (name, w, n) in [
            ("yaw", &self.yaw, 2),
            ("roll", &self.roll, 7),
            ("pitch", &self.pitch, 7),
            ("vertical", &self.vertical, 5),
        ] {
            if w.q.len() != n {
                return Err(UavError::InvalidWeights(format!(
                    "{name}: expected {n} state weights, got {}",
                    w.q.len()
                )));
            }
            if w.q.iter().any(|q| !(*q >= 0.0)) || !(w.r > 0.0) {
                return Err(UavError::InvalidWeights(format!(
                    "{name}: state weights must be >= 0 and input weight > 0"
                )));
            }
        }
        Ok(())
    }
}

/// Discrete feedback gains plus the discretized internal model they were
/// designed against.
#[derive(Debug, Clone, PartialEq)]
pub struct RegulatorGains {
    pub k_y: RowVector2<f64>,
    pub k_r: RowVector4<f64>,
    pub k_eta_r: RowVector3<f64>,
    pub k_p: RowVector4<f64>,
    pub k_eta_p: RowVector3<f64>,
    pub k_v: RowVector2<f64>,
    pub k_eta_v: RowVector3<f64>,
    pub internal_model: InternalModel,
    pub dt: f64,
    /// Closed-loop spectral radius of yaw, roll, pitch and vertical loops.
    pub spectral_radius: [f64; 4],
}

/// Zero-order-hold discretization through the block matrix exponential.
pub fn discretize_zoh(model: &LinearModel, dt: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = model.a.nrows();
    let m = model.b.ncols();
    let mut blk = DMatrix::zeros(n + m, n + m);
    blk.view_mut((0, 0), (n, n)).copy_from(&(&model.a * dt));
    blk.view_mut((0, n), (n, m)).copy_from(&(&model.b * dt));
    let e = blk.exp();
    (e.view((0, 0), (n, n)).into_owned(), e.view((0, n), (n, m)).into_owned())
}

/// Stabilizing solution of the discrete algebraic Riccati equation by the
/// structure-preserving doubling iteration.
pub fn solve_dare(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>, UavError> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let r_inv = r.clone().try_inverse().ok_or(UavError::Singular("input weight"))?;
    let mut ak = a.clone();
    let mut gk = b * r_inv * b.transpose();
    let mut hk = q.clone();
    for _ in 0..DARE_MAX_ITER {
        let w = (&eye + &gk * &hk).try_inverse().ok_or(UavError::Singular("doubling step"))?;
        let a_next = &ak * &w * &ak;
        let g_next = &gk + &ak * &w * &gk * ak.transpose();
        let h_next = &hk + ak.transpose() * &hk * &w * &ak;
        let delta = (&h_next - &hk).amax();
        let scale = h_next.amax().max(1.0);
        ak = a_next;
        gk = g_next;
        hk = h_next;
        if delta <= DARE_TOL * scale {
            let p = (&hk + hk.transpose()) * 0.5;
            return Ok(p);
        }
    }
    Err(UavError::RiccatiNoConvergence(DARE_MAX_ITER))
}

fn lqr_gain(a: &DMatrix<f64>, b: &DMatrix<f64>, w: &AxisWeights) -> Result<DMatrix<f64>, UavError> {
    let q = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(w.q.clone()));
    let r = DMatrix::from_element(1, 1, w.r);
    let p = solve_dare(a, b, &q, &r)?;
    let lhs = &r + b.transpose() * &p * b;
    let inv = lhs.try_inverse().ok_or(UavError::Singular("gain"))?;
    Ok(inv * b.transpose() * &p * a)
}

pub fn closed_loop_spectral_radius(a: &DMatrix<f64>, b: &DMatrix<f64>, k: &DMatrix<f64>) -> f64 {
    let acl = a - b * k;
    acl.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Plant discretized with ZOH and augmented with the bilinear internal model
/// driven by the first plant state (the position error).
fn augment(ad: &DMatrix<f64>, bd: &DMatrix<f64>, im: &InternalModel) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = ad.nrows();
    let mut a = DMatrix::zeros(n + 3, n + 3);
    a.view_mut((0, 0), (n, n)).copy_from(ad);
    for i in 0..3 {
        a[(n + i, 0)] = im.b[i];
        for j in 0..3 {
            a[(n + i, n + j)] = im.a[(i, j)];
        }
    }
    let mut b = DMatrix::zeros(n + 3, 1);
    b.view_mut((0, 0), (n, 1)).copy_from(bd);
    (a, b)
}

pub fn synthesize_gains(
    params: &VehicleParams,
    omega: f64,
    dt_ctrl: f64,
    weights: &LqrWeights,
) -> Result<RegulatorGains, UavError> {
    params.validate()?;
    weights.check()?;
    if !(dt_ctrl > 0.0) || !(omega > 0.0) {
        return Err(UavError::InvalidParams("omega and dt_ctrl must be positive".into()));
    }
    let models = linearized_models(params);
    let im = internal_model_matrices(omega, dt_ctrl);

    let (ay, by) = discretize_zoh(&models.yaw, dt_ctrl);
    let ky = lqr_gain(&ay, &by, &weights.yaw)?;

    let design = |lm: &LinearModel, w: &AxisWeights| -> Result<_, UavError> {
        let (ad, bd) = discretize_zoh(lm, dt_ctrl);
        let (a, b) = augment(&ad, &bd, &im);
        let k = lqr_gain(&a, &b, w)?;
        let rho = closed_loop_spectral_radius(&a, &b, &k);
        Ok((k, rho))
    };
    let (kr, rho_r) = design(&models.roll, &weights.roll)?;
    let (kp, rho_p) = design(&models.pitch, &weights.pitch)?;
    let (kv, rho_v) = design(&models.vertical, &weights.vertical)?;
    let rho_y = closed_loop_spectral_radius(&ay, &by, &ky);

    Ok(RegulatorGains {
        k_y: RowVector2::new(ky[(0, 0)], ky[(0, 1)]),
        k_r: RowVector4::new(kr[(0, 0)], kr[(0, 1)], kr[(0, 2)], kr[(0, 3)]),
        k_eta_r: RowVector3::new(kr[(0, 4)], kr[(0, 5)], kr[(0, 6)]),
        k_p: RowVector4::new(kp[(0, 0)], kp[(0, 1)], kp[(0, 2)], kp[(0, 3)]),
        k_eta_p: RowVector3::new(kp[(0, 4)], kp[(0, 5)], kp[(0, 6)]),
        k_v: RowVector2::new(kv[(0, 0)], kv[(0, 1)]),
        k_eta_v: RowVector3::new(kv[(0, 2)], kv[(0, 3)], kv[(0, 4)]),
        internal_model: im,
        dt: dt_ctrl,
        spectral_radius: [rho_y, rho_r, rho_p, rho_v],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Plain Riccati value iteration, used as an independent route.
    fn dare_by_iteration(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> DMatrix<f64> {
        let mut p = q.clone();
        for _ in 0..2_000_000 {
            let s = (r + b.transpose() * &p * b).try_inverse().unwrap();
            let next = a.transpose() * &p * a - a.transpose() * &p * b * s * b.transpose() * &p * a + q;
            if (&next - &p).amax() < 1e-12 * next.amax().max(1.0) {
                return next;
            }
            p = next;
        }
        panic!("value iteration did not converge");
    }

    #[test]
    fn zoh_of_double_integrator() {
        let lm = LinearModel {
            a: DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            b: DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        };
        let (ad, bd) = discretize_zoh(&lm, 0.1);
        let exp_a = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        let exp_b = DMatrix::from_row_slice(2, 1, &[0.005, 0.1]);
        assert!((ad - exp_a).amax() < 1e-14);
        assert!((bd - exp_b).amax() < 1e-14);
    }

    #[test]
    fn doubling_agrees_with_value_iteration() {
        let p = VehicleParams::default();
        let lm = linearized_models(&p);
        let (ad, bd) = discretize_zoh(&lm.vertical, 0.02);
        let im = internal_model_matrices(0.65, 0.02);
        let (a, b) = augment(&ad, &bd, &im);
        let q = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![10.0, 1.0, 1.0, 1.0, 1.0]));
        let r = DMatrix::from_element(1, 1, 0.1);
        let p1 = solve_dare(&a, &b, &q, &r).unwrap();
        let p2 = dare_by_iteration(&a, &b, &q, &r);
        assert!((&p1 - &p2).amax() / p2.amax() < 1e-8);
        // Riccati residual
        let s = (&r + b.transpose() * &p1 * &b).try_inverse().unwrap();
        let res = a.transpose() * &p1 * &a - a.transpose() * &p1 * &b * s * b.transpose() * &p1 * &a + &q - &p1;
        assert!(res.amax() / p1.amax() < 1e-9);
    }

    #[test]
    fn default_gains_stabilize_every_loop() {
        let g = synthesize_gains(&VehicleParams::default(), 0.65, 1.0 / 250.0, &LqrWeights::default()).unwrap();
        for rho in g.spectral_radius {
            assert!(rho < 0.998, "spectral radius {rho}");
        }
    }

    #[test]
    fn detuned_gains_are_stable_but_softer() {
        let p = VehicleParams::default();
        let w = LqrWeights::default();
        let g = synthesize_gains(&p, 0.65, 1.0 / 250.0, &w).unwrap();
        let d = synthesize_gains(&p, 0.65, 1.0 / 250.0, &w.detuned(100.0)).unwrap();
        for i in 0..4 {
            assert!(d.spectral_radius[i] < 1.0);
        }
        assert!(d.k_y.norm() < g.k_y.norm());
        assert!(d.k_r[0].abs() < g.k_r[0].abs() && d.k_eta_r.norm() < g.k_eta_r.norm());
        assert!(d.k_p[0].abs() < g.k_p[0].abs() && d.k_eta_p.norm() < g.k_eta_p.norm());
        assert!(d.k_v[0].abs() < g.k_v[0].abs() && d.k_eta_v.norm() < g.k_eta_v.norm());
    }

    #[test]
    fn malformed_weights_are_rejected() {
        let mut w = LqrWeights::default();
        w.roll.q.pop();
        assert!(matches!(
            synthesize_gains(&VehicleParams::default(), 0.65, 0.004, &w),
            Err(UavError::InvalidWeights(_))
        ));
        let mut w = LqrWeights::default();
        w.yaw.r = 0.0;
        assert!(synthesize_gains(&VehicleParams::default(), 0.65, 0.004, &w).is_err());
    }
}
