//! Convergence and loiter metrics computed from a run log.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::log::{LogRecord, RunLog};
use super::SimError;

/// Share of the final `alpha` above which the loiter counts as steady.
const SETTLED_ALPHA_FRACTION: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// First time the centre estimate enters the 5 m x 5 m box around the
    /// planar optimum and stays for one loiter period.
    pub t_enter_5m_box: Option<f64>,
    /// Same for the 1 m x 1 m box.
    pub t_enter_1m_box: Option<f64>,
    /// Mean distance of the plane reference from its own mean over the last
    /// loiter period.
    pub steady_radius: f64,
    pub max_ref_speed: f64,
    /// Largest distance between drone and inertial reference during steady
    /// loiter: `alpha` settled and the centre inside the 1 m box (or `alpha`
    /// settled alone if the box is never entered).
    pub max_tracking_error: f64,
    pub final_dist_centre_opt: f64,
    pub settle_time: f64,
    /// Planar optimum used for the boxes, plane frame.
    pub p_star: [f64; 2],
    pub loiter_period: f64,
}

impl Metrics {
    pub fn compute(log: &RunLog, p_star: [f64; 2], loiter_period: f64) -> Result<Self, SimError> {
        let rows = &log.records;
        let last = rows.last().ok_or_else(|| SimError::InvalidLog("empty log".into()))?;
        let settle_time = settle_time(rows);
        let t_enter_1m_box = box_entry(rows, p_star, 0.5, loiter_period);
        let loiter_start = settle_time.max(t_enter_1m_box.unwrap_or(settle_time));
        let max_tracking_error = rows
            .iter()
            .filter(|r| r.t >= loiter_start)
            .map(LogRecord::tracking_error)
            .fold(0.0, f64::max);
        Ok(Self {
            t_enter_5m_box: box_entry(rows, p_star, 2.5, loiter_period),
            t_enter_1m_box,
            steady_radius: steady_radius(rows, loiter_period),
            max_ref_speed: max_ref_speed(rows),
            max_tracking_error,
            final_dist_centre_opt: last.dist_centre_opt,
            settle_time,
            p_star,
            loiter_period,
        })
    }

    /// Recomputes metrics from a log alone. The optimum is recovered from the
    /// centre and distance columns, the loiter period from the first valid
    /// centre estimate.
    pub fn from_log(log: &RunLog) -> Result<Self, SimError> {
        let window = log
            .records
            .iter()
            .find(|r| r.centre[0].is_finite())
            .map(|r| r.t)
            .ok_or_else(|| SimError::InvalidLog("no centre estimate in log".into()))?;
        let p_star = locate_optimum(&log.records)?;
        Self::compute(log, p_star, window)
    }
}

fn settle_time(rows: &[LogRecord]) -> f64 {
    let top = rows.iter().map(|r| r.alpha).fold(0.0, f64::max);
    rows.iter()
        .find(|r| r.alpha >= SETTLED_ALPHA_FRACTION * top)
        .map_or(f64::INFINITY, |r| r.t)
}

fn in_box(r: &LogRecord, p_star: [f64; 2], half: f64) -> bool {
    (r.centre[0] - p_star[0]).abs() <= half && (r.centre[1] - p_star[1]).abs() <= half
}

/// Start of the first run of in-box samples lasting at least `dwell`.
pub fn box_entry(rows: &[LogRecord], p_star: [f64; 2], half: f64, dwell: f64) -> Option<f64> {
    let eps = 1e-9 * dwell.max(1.0);
    let mut start: Option<f64> = None;
    for r in rows {
        if in_box(r, p_star, half) {
            let s = *start.get_or_insert(r.t);
            if r.t - s >= dwell - eps {
                return Some(s);
            }
        } else {
            start = None;
        }
    }
    None
}

fn steady_radius(rows: &[LogRecord], window: f64) -> f64 {
    let Some(end) = rows.last().map(|r| r.t) else { return f64::NAN };
    let tail: Vec<_> = rows.iter().filter(|r| r.t > end - window).collect();
    let n = tail.len() as f64;
    let cx = tail.iter().map(|r| r.ref_p[0]).sum::<f64>() / n;
    let cy = tail.iter().map(|r| r.ref_p[1]).sum::<f64>() / n;
    tail.iter().map(|r| (r.ref_p[0] - cx).hypot(r.ref_p[1] - cy)).sum::<f64>() / n
}

/// Largest plane-reference displacement between consecutive updates divided
/// by the time between them. The first update has no predecessor and is
/// skipped.
fn max_ref_speed(rows: &[LogRecord]) -> f64 {
    let mut prev_change: Option<(f64, [f64; 2])> = None;
    let mut best = 0.0f64;
    for w in rows.windows(2) {
        if w[1].ref_p != w[0].ref_p {
            if let Some((t0, p0)) = prev_change {
                let d = (w[1].ref_p[0] - p0[0]).hypot(w[1].ref_p[1] - p0[1]);
                best = best.max(d / (w[1].t - t0));
            }
            prev_change = Some((w[1].t, w[1].ref_p));
        }
    }
    best
}

/// Least-squares point whose distances to the logged centre estimates match
/// the logged distance column.
pub fn locate_optimum(rows: &[LogRecord]) -> Result<[f64; 2], SimError> {
    let pts: Vec<(f64, f64, f64)> = rows
        .iter()
        .filter(|r| r.centre[0].is_finite() && r.centre[1].is_finite() && r.dist_centre_opt.is_finite())
        .map(|r| (r.centre[0], r.centre[1], r.dist_centre_opt))
        .collect();
    if pts.len() < 3 {
        return Err(SimError::InvalidLog("too few centre estimates to locate the optimum".into()));
    }
    // |c_i|^2 - 2 c_i.p + |p|^2 = d_i^2, differenced against the mean row
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mk = pts.iter().map(|p| p.0 * p.0 + p.1 * p.1 - p.2 * p.2).sum::<f64>() / n;
    let a = DMatrix::from_fn(pts.len(), 2, |i, j| 2.0 * if j == 0 { pts[i].0 - mx } else { pts[i].1 - my });
    let b = DVector::from_fn(pts.len(), |i, _| pts[i].0 * pts[i].0 + pts[i].1 * pts[i].1 - pts[i].2 * pts[i].2 - mk);
    let sol = a
        .svd(true, true)
        .solve(&b, 1e-12)
        .map_err(|e| SimError::InvalidLog(format!("cannot locate optimum: {e}")))?;
    if !sol.iter().all(|x| x.is_finite()) {
        return Err(SimError::InvalidLog("centre estimates are degenerate".into()));
    }
    Ok([sol[0], sol[1]])
}
