//! Closed-loop properties of the nonlinear plant under the discrete
//! internal-model regulators.

use proptest::prelude::*;

use arva_seek::geometry::Vec3;
use arva_seek::uav::{control_step, integrate_rk4, synthesize_gains, LqrWeights, QuadState, RegulatorState, VehicleParams};

const DT_PHYS: f64 = 1e-3;
const SUB: usize = 4;
const OMEGA: f64 = 0.65;

struct Trace {
    /// Largest per-axis error over the trailing window.
    tail_error: f64,
    final_thrust: f64,
    saturation_ok: bool,
}

fn closed_loop(start: Vec3, reference: impl Fn(f64) -> Vec3, duration: f64, window: f64) -> Trace {
    let params = VehicleParams::default();
    let dt_ctrl = DT_PHYS * SUB as f64;
    let gains = synthesize_gains(&params, OMEGA, dt_ctrl, &LqrWeights::default()).unwrap();
    let mut s = QuadState::at_rest(start);
    let mut reg = RegulatorState::default();
    let steps = (duration / dt_ctrl).round() as usize;
    let mut tail_error = 0.0f64;
    let mut saturation_ok = true;
    let mut final_thrust = f64::NAN;
    for k in 0..=steps {
        let t = k as f64 * dt_ctrl;
        let r = reference(t);
        if t >= duration - window - 1e-9 {
            tail_error = tail_error.max((s.p - r).amax());
        }
        let out = control_step(&s, &r, &reg, &gains, &params).unwrap();
        saturation_ok &= out.thrust >= params.t_min && out.thrust <= params.t_max;
        saturation_ok &= out.tau.amax() <= params.tau_max;
        final_thrust = out.thrust;
        reg = out.regulator;
        for _ in 0..SUB {
            s = integrate_rk4(&s, out.thrust, &out.tau, DT_PHYS, &params);
        }
    }
    Trace { tail_error, final_thrust, saturation_ok }
}

#[test]
fn hover_on_reference_stays_put() {
    let p = Vec3::new(3.0, -2.0, -6.0);
    let tr = closed_loop(p, |_| p, 5.0, 5.0);
    assert!(tr.tail_error < 1e-12, "{}", tr.tail_error);
}

#[test]
fn vertical_offset_settles_on_hover_thrust() {
    let start = Vec3::new(0.0, 0.0, -6.0);
    let target = Vec3::new(0.0, 0.0, -6.8);
    let tr = closed_loop(start, |_| target, 30.0, 1.0);
    let hover = VehicleParams::default().hover_thrust();
    assert!(tr.tail_error < 1e-4, "{}", tr.tail_error);
    assert!((tr.final_thrust - hover).abs() < 1e-3, "{} vs {hover}", tr.final_thrust);
    assert!(tr.saturation_ok);
}

#[test]
fn roll_loop_tracks_a_biased_sinusoid() {
    let start = Vec3::new(0.0, 0.0, -6.0);
    let reference = |t: f64| Vec3::new(0.0, 0.5 + 1.5 * (OMEGA * t).sin(), -6.0);
    let tr = closed_loop(start, reference, 150.0, 20.0);
    assert!(tr.tail_error < 1e-3, "{}", tr.tail_error);
    assert!(tr.saturation_ok);
}

#[test]
fn off_frequency_sinusoid_leaves_a_residual() {
    let start = Vec3::new(0.0, 0.0, -6.0);
    let reference = |t: f64| Vec3::new(1.5 * (1.2 * OMEGA * t).sin(), 0.0, -6.0);
    let tr = closed_loop(start, reference, 150.0, 20.0);
    assert!(tr.tail_error > 5e-2, "{}", tr.tail_error);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn static_reference_within_one_metre_converges(
        dir in prop::array::uniform3(-1.0f64..1.0),
        dist in 0.05f64..1.0,
    ) {
        let d = Vec3::from(dir);
        prop_assume!(d.norm() > 0.1);
        let start = Vec3::new(0.0, 0.0, -6.0);
        let target = start + d.normalize() * dist;
        let tr = closed_loop(start, |_| target, 20.0, 0.0);
        prop_assert!(tr.tail_error < 1e-3, "error {} for offset {:?}", tr.tail_error, target - start);
        prop_assert!(tr.saturation_ok);
    }
}
