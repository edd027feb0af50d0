//! Multirate closed-loop simulation, the averaged-system oracle and batch
//! sweeps.

use rayon::prelude::*;
use serde_json::Value;

use super::log::{Instrumentation, LogRecord, RunLog};
use super::metrics::Metrics;
use super::optimum::planar_optimum;
use super::scenario::{Scenario, World};
use super::SimError;
use crate::arva::{condition, field_intensity, measure, nominal_conditioned, nominal_gradient};
use crate::esrg::{alpha_filter_step, average_step, centre_estimate, es_step, EsState, RefSample};
use crate::geometry::Vec3;
use crate::uav::{control_step, integrate_rk4, synthesize_gains, QuadState, RegulatorState, UavError};

/// State magnitude beyond which a run is declared divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

pub type RunOutput = (RunLog, Metrics);

pub fn run(scenario: &Scenario) -> Result<RunOutput, SimError> {
    let world = scenario.validate()?;
    run_world(&world)
}

fn divergence(t: f64, e: UavError) -> SimError {
    SimError::Divergence { t, detail: e.to_string() }
}

pub fn run_world(world: &World) -> Result<RunOutput, SimError> {
    let sc = &world.scenario;
    let rates = sc.rates;
    let div_ctrl = (rates.physics_hz / rates.ctrl_hz) as u64;
    let div_es = (rates.physics_hz / rates.es_hz) as u64;
    let div_arva = (rates.physics_hz / rates.arva_hz) as u64;
    let dt_phys = 1.0 / rates.physics_hz as f64;
    let dt_ctrl = 1.0 / rates.ctrl_hz as f64;
    let n_ticks = (sc.duration * rates.physics_hz as f64).round() as u64;

    let gains = synthesize_gains(&sc.vehicle, sc.es.omega, dt_ctrl, &sc.lqr)
        .map_err(|e| SimError::InvalidScenario(e.to_string()))?;
    let tx = &world.transmitter;
    let p_star = planar_optimum(tx);
    let filter_gain = if sc.y_filter_tau > 0.0 { 1.0 - (-dt_ctrl / sc.y_filter_tau).exp() } else { 1.0 };

    let mut s = QuadState::at_rest(Vec3::from(sc.drone_start));
    let start_plane = world.plane.inertial_to_plane(&s.p);
    let mut es = EsState::start(start_plane.x, start_plane.y);
    let mut reference = world.plane.plane_to_inertial(&Vec3::new(es.x_ref, es.y_ref, 0.0));
    let mut reg = RegulatorState::default();
    let (mut thrust, mut tau) = (sc.vehicle.hover_thrust(), Vec3::zeros());

    let mut hm_norm = f64::NAN;
    let mut y_raw = f64::NAN;
    let mut y_filt = f64::NAN;
    let mut arva_sample_t = f64::NAN;
    let mut history: Vec<RefSample> = Vec::new();

    let n_rows = (n_ticks / div_ctrl + 1) as usize;
    let mut log = RunLog {
        records: Vec::with_capacity(n_rows),
        instrumentation: Vec::with_capacity(n_rows),
        es_trace: vec![es],
        es_inputs: Vec::new(),
    };

    for k in 0..=n_ticks {
        let t = k as f64 * dt_phys;
        if k % div_arva == 0 {
            let p_rel = tx.relative(&world.plane.inertial_to_plane(&s.p));
            hm_norm = measure(&p_rel, &tx.orientation_plane, &world.emi, t)?.norm();
            y_raw = condition(hm_norm)?;
            arva_sample_t = t;
        }
        if k % div_ctrl != 0 {
            s = integrate_rk4(&s, thrust, &tau, dt_phys, &sc.vehicle);
            check_state(&s, t + dt_phys)?;
            continue;
        }
        y_filt = if y_filt.is_nan() { y_raw } else { y_filt + filter_gain * (y_raw - y_filt) };
        if k % div_es == 0 {
            es = es_step(&es, y_filt, &sc.es);
            log.es_trace.push(es);
            log.es_inputs.push(y_filt);
            history.push(RefSample { t, x: es.x_ref, y: es.y_ref });
            reference = world.plane.plane_to_inertial(&Vec3::new(es.x_ref, es.y_ref, 0.0));
        }
        let out = control_step(&s, &reference, &reg, &gains, &sc.vehicle).map_err(|e| divergence(t, e))?;
        reg = out.regulator;
        thrust = out.thrust;
        tau = out.tau;

        let centre = centre_estimate(&history, sc.es.omega, t)
            .map(|c| [c.cx, c.cy])
            .unwrap_or([f64::NAN, f64::NAN]);
        log.records.push(LogRecord {
            t,
            p: s.p.into(),
            v: s.v.into(),
            ref_i: reference.into(),
            ref_p: [es.x_ref, es.y_ref],
            hm_norm,
            yt_raw: y_raw,
            yt_filt: y_filt,
            alpha: es.alpha,
            centre,
            dist_centre_opt: (centre[0] - p_star.x).hypot(centre[1] - p_star.y),
        });
        log.instrumentation.push(Instrumentation { arva_sample_t, thrust, tau: tau.into() });

        if k < n_ticks {
            s = integrate_rk4(&s, thrust, &tau, dt_phys, &sc.vehicle);
            check_state(&s, t + dt_phys)?;
        }
    }
    let metrics = Metrics::compute(&log, [p_star.x, p_star.y], sc.es.loiter_period())?;
    Ok((log, metrics))
}

fn check_state(s: &QuadState, t: f64) -> Result<(), SimError> {
    if !s.is_finite() {
        return Err(SimError::Divergence { t, detail: "non-finite vehicle state".into() });
    }
    if s.magnitude() > DIVERGENCE_LIMIT {
        return Err(SimError::Divergence { t, detail: format!("state magnitude {:e}", s.magnitude()) });
    }
    Ok(())
}

/// Averaged gradient flow of the noiseless conditioned map from the same
/// starting point, sampled at the reference-generator rate. The drone columns
/// hold the flow itself and its velocity.
pub fn oracle(scenario: &Scenario) -> Result<RunLog, SimError> {
    let world = scenario.validate()?;
    Ok(oracle_world(&world))
}

pub fn oracle_world(world: &World) -> RunLog {
    let sc = &world.scenario;
    let tx = &world.transmitter;
    let m = tx.alignment();
    let p_star = planar_optimum(tx);
    let dt = sc.es.dt_es;
    let n = (sc.duration / dt).round() as usize;
    let start = world.plane.inertial_to_plane(&Vec3::from(sc.drone_start));
    let (mut pos, mut alpha) = ((start.x, start.y), 0.0);
    let rot = world.plane.rotation;
    let mut log = RunLog::default();
    for k in 0..=n {
        let t = k as f64 * dt;
        let rel = tx.relative(&Vec3::new(pos.0, pos.1, 0.0));
        let g = nominal_gradient(&rel, &m);
        let y = nominal_conditioned(&rel, &m);
        let gain = 0.5 * sc.es.kappa * alpha;
        let vel = rot.apply(&Vec3::new(-gain * g.x, -gain * g.y, 0.0));
        let p = world.plane.plane_to_inertial(&Vec3::new(pos.0, pos.1, 0.0));
        log.records.push(LogRecord {
            t,
            p: p.into(),
            v: vel.into(),
            ref_i: p.into(),
            ref_p: [pos.0, pos.1],
            hm_norm: field_intensity(&rel, &m).unwrap_or(f64::NAN),
            yt_raw: y,
            yt_filt: y,
            alpha,
            centre: [pos.0, pos.1],
            dist_centre_opt: (pos.0 - p_star.x).hypot(pos.1 - p_star.y),
        });
        pos = average_step(pos, (g.x, g.y), sc.es.kappa, alpha, dt);
        alpha = alpha_filter_step(alpha, &sc.es);
    }
    log
}

/// Runs `base` patched by each override, in parallel. Results keep the order
/// of `overrides`; a failing scenario does not stop the others.
pub fn sweep(base: &Scenario, overrides: &[Value]) -> Vec<Result<RunOutput, SimError>> {
    overrides
        .par_iter()
        .map(|patch| base.with_override(patch).and_then(|s| run(&s)))
        .collect()
}
