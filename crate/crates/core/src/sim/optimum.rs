//! Ground truth on the search plane: the planar optimum of the conditioned
//! map and the transmitter attitude that pushes it furthest from the
//! transmitter's projection.

use nalgebra::Matrix3;

use crate::arva::{nominal_conditioned, DipoleAlignment, TransmitterConfig};
use crate::geometry::{Rot3, Vec3};

const GRID_HALF_WIDTH: f64 = 100.0;
const GRID_STEP: f64 = 1.0;
const REFINE_TOL: f64 = 1e-4;

/// Conditioned map restricted to the plane, as a function of plane (x, y).
fn plane_map(tx: &TransmitterConfig, m: &DipoleAlignment) -> impl Fn(f64, f64) -> f64 {
    let pt = tx.position_plane;
    let m = *m;
    move |x, y| nominal_conditioned(&Vec3::new(x - pt.x, y - pt.y, -pt.z), &m)
}

/// Compass search. Moves only on strict improvement and halves the step
/// until it falls below `tol`.
fn pattern_search(f: impl Fn(f64, f64) -> f64, start: (f64, f64), step: f64, tol: f64) -> (f64, f64) {
    let (mut x, mut y) = start;
    let mut best = f(x, y);
    let mut h = step;
    const DIRS: [(f64, f64); 8] = [
        (1.0, 0.0),
        (-1.0, 0.0),
        (0.0, 1.0),
        (0.0, -1.0),
        (1.0, 1.0),
        (1.0, -1.0),
        (-1.0, 1.0),
        (-1.0, -1.0),
    ];
    while h >= tol {
        let mut moved = false;
        for (dx, dy) in DIRS {
            let (cx, cy) = (x + dx * h, y + dy * h);
            let v = f(cx, cy);
            if v < best {
                best = v;
                x = cx;
                y = cy;
                moved = true;
                break;
            }
        }
        if !moved {
            h *= 0.5;
        }
    }
    (x, y)
}

/// Minimizer of the conditioned map over the plane `z = 0`: a 1 m grid over
/// a 200 m square centred on the transmitter projection, then pattern-search
/// refinement. Ties on the grid go to the smallest `(x, y)`.
pub fn planar_optimum(tx: &TransmitterConfig) -> Vec3 {
    if tx.depth() == 0.0 {
        return tx.projection();
    }
    let m = tx.alignment();
    let f = plane_map(tx, &m);
    let (px, py) = (tx.position_plane.x, tx.position_plane.y);
    let n = (2.0 * GRID_HALF_WIDTH / GRID_STEP).round() as i64;
    let mut best = (f64::INFINITY, px, py);
    for i in 0..=n {
        let x = px - GRID_HALF_WIDTH + i as f64 * GRID_STEP;
        for j in 0..=n {
            let y = py - GRID_HALF_WIDTH + j as f64 * GRID_STEP;
            let v = f(x, y);
            if v < best.0 {
                best = (v, x, y);
            }
        }
    }
    let (x, y) = pattern_search(&f, (best.1, best.2), GRID_STEP / 2.0, REFINE_TOL);
    Vec3::new(x, y, 0.0)
}

/// Offset of the planar optimum from the transmitter projection for a dipole
/// axis `axis` (plane frame) at depth `depth`. Translation invariant, so the
/// projection is placed at the origin.
pub fn optimum_offset(depth: f64, axis: &Vec3) -> f64 {
    if depth == 0.0 {
        return 0.0;
    }
    let m = DipoleAlignment::from_axis(axis);
    let f = |x: f64, y: f64| nominal_conditioned(&Vec3::new(x, y, -depth), &m);
    let (x, y) = pattern_search(f, (0.0, 0.0), depth / 4.0, depth * 1e-7);
    x.hypot(y)
}

fn axis_from_angles(polar: f64, azimuth: f64) -> Vec3 {
    Vec3::new(polar.sin() * azimuth.cos(), polar.sin() * azimuth.sin(), polar.cos())
}

/// A rotation whose first column is `axis` (normalized).
pub fn rotation_with_x_axis(axis: &Vec3) -> Rot3 {
    let x = axis.normalize();
    let helper = if x.z.abs() < 0.9 { Vec3::z() } else { Vec3::x() };
    let y = helper.cross(&x).normalize();
    let z = x.cross(&y);
    Rot3::orthonormalize(Matrix3::from_columns(&[x, y, z]))
}

/// Points spread evenly over the upper unit hemisphere. The map depends on
/// the dipole axis only up to sign, so the hemisphere covers every case.
pub fn fibonacci_hemisphere(n: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// Transmitter attitude (plane frame) that maximizes the distance between the
/// planar optimum and the transmitter projection at depth `depth`, with that
/// distance. Searches a 2000-point hemisphere grid, then refines the polar
/// and azimuth angles by pattern search.
pub fn worst_case_orientation(depth: f64) -> (Rot3, f64) {
    if depth <= 0.0 {
        return (Rot3::identity(), 0.0);
    }
    let mut best = (f64::NEG_INFINITY, Vec3::x());
    for axis in fibonacci_hemisphere(2000) {
        let off = optimum_offset(depth, &axis);
        if off > best.0 {
            best = (off, axis);
        }
    }
    let axis = best.1;
    let start = (axis.z.clamp(-1.0, 1.0).acos(), axis.y.atan2(axis.x));
    let neg = |a: f64, b: f64| -optimum_offset(depth, &axis_from_angles(a, b));
    let (polar, azimuth) = pattern_search(neg, start, 0.05, 1e-6);
    let axis = axis_from_angles(polar, azimuth);
    (rotation_with_x_axis(&axis), optimum_offset(depth, &axis))
}
