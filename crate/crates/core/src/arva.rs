//! Avalanche transceiver field model, noisy receiver measurement and the
//! inverse-cube-root measurement conditioning.
//!
//! All vectors here are expressed in the search-plane frame. `p` is always the
//! receiver position relative to the transmitter.

use std::f64::consts::PI;

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{Rot3, Vec3};

/// Radius below which the dipole model is considered singular, in meters.
pub const SINGULARITY_RADIUS: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArvaError {
    #[error("receiver is {0} m from the transmitter, inside the singular region")]
    Singularity(f64),
    #[error("dipole matrix A(p) is undefined at p = 0")]
    ZeroPosition,
    #[error("conditioning needs a positive intensity, got {0}")]
    NonPositiveIntensity(f64),
    #[error("transmitter depth below the search plane must be >= 0, got {0}")]
    TransmitterAbovePlane(f64),
    #[error("invalid EMI model: {0}")]
    InvalidEmi(String),
}

/// Transmitter pose in the search-plane frame, `[t_x, t_y, d_t]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmitterConfig {
    pub position_plane: Vec3,
    pub orientation_plane: Rot3,
}

impl TransmitterConfig {
    pub fn new(position_plane: Vec3, orientation_plane: Rot3) -> Result<Self, ArvaError> {
        if !(position_plane.z >= 0.0) {
            return Err(ArvaError::TransmitterAbovePlane(position_plane.z));
        }
        Ok(Self { position_plane, orientation_plane })
    }

    pub fn depth(&self) -> f64 {
        self.position_plane.z
    }

    /// Geometric projection of the transmitter onto the search plane.
    pub fn projection(&self) -> Vec3 {
        Vec3::new(self.position_plane.x, self.position_plane.y, 0.0)
    }

    pub fn alignment(&self) -> DipoleAlignment {
        m_matrix(&self.orientation_plane)
    }

    /// Receiver position relative to the transmitter for a plane-frame point.
    pub fn relative(&self, p_plane: &Vec3) -> Vec3 {
        p_plane - self.position_plane
    }
}

/// Rank-one projector `u u^T` onto the transmitter x axis expressed in the
/// plane frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipoleAlignment(Matrix3<f64>);

impl DipoleAlignment {
    /// Builds the projector from a dipole axis, which is normalized first.
    pub fn from_axis(axis: &Vec3) -> Self {
        let u = axis.normalize();
        Self(u * u.transpose())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// `p^T M p / |p|^2`, always in [0, 1].
    pub fn alignment_ratio(&self, p: &Vec3) -> f64 {
        let r2 = p.norm_squared();
        if r2 == 0.0 {
            return 0.0;
        }
        (p.dot(&(self.0 * p)) / r2).clamp(0.0, 1.0)
    }
}

pub fn a_matrix(p: &Vec3) -> Result<Matrix3<f64>, ArvaError> {
    if p.norm_squared() == 0.0 {
        return Err(ArvaError::ZeroPosition);
    }
    let (x, y, z) = (p.x, p.y, p.z);
    Ok(Matrix3::new(
        2.0 * x * x - y * y - z * z,
        3.0 * x * y,
        3.0 * x * z,
        3.0 * x * y,
        2.0 * y * y - x * x - z * z,
        3.0 * y * z,
        3.0 * x * z,
        3.0 * y * z,
        2.0 * z * z - x * x - y * y,
    ))
}

fn guard(p: &Vec3) -> Result<f64, ArvaError> {
    let r = p.norm();
    if !(r > SINGULARITY_RADIUS) {
        return Err(ArvaError::Singularity(r));
    }
    Ok(r)
}

/// Dipole field vector at `p` for a transmitter with plane-frame attitude `r_pt`.
pub fn dipole_field(p: &Vec3, r_pt: &Rot3) -> Result<Vec3, ArvaError> {
    let r = guard(p)?;
    let a = a_matrix(p)?;
    Ok(a * r_pt.apply(&Vec3::x()) / (4.0 * PI * r.powi(5)))
}

pub fn m_matrix(r_pt: &Rot3) -> DipoleAlignment {
    DipoleAlignment::from_axis(&r_pt.apply(&Vec3::x()))
}

/// Closed-form field intensity.
pub fn field_intensity(p: &Vec3, m: &DipoleAlignment) -> Result<f64, ArvaError> {
    let r = guard(p)?;
    Ok((1.0 + 3.0 * m.alignment_ratio(p)).sqrt() / (4.0 * PI * r.powi(3)))
}

/// Bounded, quasi-constant electromagnetic interference.
///
/// `w(t) = base + amplitude * sin(2 pi f t) * direction`, with
/// `|base| + amplitude <= bound` so that `|w(t)| <= bound` for every `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmiModel {
    pub bound: f64,
    pub base_vector: Vec3,
    pub drift_frequency: f64,
    pub drift_amplitude: f64,
    pub drift_direction: Vec3,
}

impl EmiModel {
    pub fn none() -> Self {
        Self {
            bound: 0.0,
            base_vector: Vec3::zeros(),
            drift_frequency: 0.0,
            drift_amplitude: 0.0,
            drift_direction: Vec3::x(),
        }
    }

    pub fn new(
        bound: f64,
        base_vector: Vec3,
        drift_frequency: f64,
        drift_amplitude: f64,
        drift_direction: Vec3,
    ) -> Result<Self, ArvaError> {
        if !(bound >= 0.0) || !bound.is_finite() {
            return Err(ArvaError::InvalidEmi(format!("bound {bound}")));
        }
        if !(drift_amplitude >= 0.0) || !drift_frequency.is_finite() {
            return Err(ArvaError::InvalidEmi("drift amplitude/frequency".into()));
        }
        let dir_norm = drift_direction.norm();
        if !(dir_norm > 0.0) {
            return Err(ArvaError::InvalidEmi("zero drift direction".into()));
        }
        if base_vector.norm() + drift_amplitude > bound * (1.0 + 1e-12) {
            return Err(ArvaError::InvalidEmi(format!(
                "|base| + drift = {} exceeds bound {bound}",
                base_vector.norm() + drift_amplitude
            )));
        }
        Ok(Self {
            bound,
            base_vector,
            drift_frequency,
            drift_amplitude,
            drift_direction: drift_direction / dir_norm,
        })
    }

    /// Draws base and drift directions from `seed`. `base_fraction` of the
    /// bound goes to the constant part, the rest to the sinusoidal drift.
    pub fn seeded(
        bound: f64,
        drift_frequency: f64,
        base_fraction: f64,
        seed: u64,
    ) -> Result<Self, ArvaError> {
        if !(0.0..=1.0).contains(&base_fraction) {
            return Err(ArvaError::InvalidEmi(format!("base fraction {base_fraction}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base_dir = random_unit(&mut rng);
        let drift_dir = random_unit(&mut rng);
        Self::new(
            bound,
            base_dir * bound * base_fraction,
            drift_frequency,
            bound * (1.0 - base_fraction),
            drift_dir,
        )
    }

    pub fn sample(&self, t: f64) -> Vec3 {
        let phase = 2.0 * PI * self.drift_frequency * t;
        self.base_vector + self.drift_direction * (self.drift_amplitude * phase.sin())
    }
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    let z: f64 = rng.random_range(-1.0..1.0);
    let phi: f64 = rng.random_range(0.0..2.0 * PI);
    let s = (1.0 - z * z).sqrt();
    Vec3::new(s * phi.cos(), s * phi.sin(), z)
}

/// Field sensed by the receiver at time `t`: dipole field plus interference.
pub fn measure(p_rel: &Vec3, r_pt: &Rot3, emi: &EmiModel, t: f64) -> Result<Vec3, ArvaError> {
    Ok(dipole_field(p_rel, r_pt)? + emi.sample(t))
}

/// Inverse cube root of the measured intensity.
pub fn condition(intensity: f64) -> Result<f64, ArvaError> {
    if !(intensity > 0.0) {
        return Err(ArvaError::NonPositiveIntensity(intensity));
    }
    Ok(1.0 / intensity.cbrt())
}

/// Conditioned intensity of the noiseless field; zero at the transmitter.
pub fn nominal_conditioned(p: &Vec3, m: &DipoleAlignment) -> f64 {
    let r = p.norm();
    if r == 0.0 {
        return 0.0;
    }
    let f = 1.0 + 3.0 * m.alignment_ratio(p);
    (4.0 * PI).cbrt() * r / f.powf(1.0 / 6.0)
}

/// Analytic gradient of [`nominal_conditioned`] with respect to `p`.
pub fn nominal_gradient(p: &Vec3, m: &DipoleAlignment) -> Vec3 {
    let r2 = p.norm_squared();
    if r2 == 0.0 {
        return Vec3::zeros();
    }
    let r = r2.sqrt();
    let mp = m.matrix() * p;
    let q = p.dot(&mp);
    let f = 1.0 + 3.0 * q / r2;
    // d(q/r^2)/dp = 2 M p / r^2 - 2 q p / r^4
    let dratio = (mp - p * (q / r2)) * (2.0 / r2);
    let c = (4.0 * PI).cbrt();
    (p / r - dratio * (r / (2.0 * f))) * (c * f.powf(-1.0 / 6.0))
}

/// Worst-case noise-to-signal ratio of the conditioned measurement.
///
/// The supremum of the conditioned output over admissible noise is reached
/// when `|w| = w_bar` is aligned against the field, which lowers the
/// intensity to `|h| - w_bar`. When the noise can cancel the field the
/// conditioned output is unbounded and the ratio saturates at one.
pub fn nsr(p: &Vec3, m: &DipoleAlignment, w_bar: f64) -> f64 {
    let r = p.norm();
    if r == 0.0 || w_bar <= 0.0 {
        return 0.0;
    }
    let h = (1.0 + 3.0 * m.alignment_ratio(p)).sqrt() / (4.0 * PI * r.powi(3));
    if h <= w_bar {
        return 1.0;
    }
    (1.0 - ((h - w_bar) / h).cbrt()).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rpy_to_rot;
    use proptest::prelude::*;

    fn e1() -> DipoleAlignment {
        DipoleAlignment::from_axis(&Vec3::x())
    }

    #[test]
    fn a_matrix_closed_forms() {
        let a = a_matrix(&Vec3::x()).unwrap();
        assert_eq!(a, Matrix3::from_diagonal(&Vec3::new(2.0, -1.0, -1.0)));
        let a = a_matrix(&Vec3::new(1.0, 1.0, 0.0)).unwrap();
        assert_eq!(a, Matrix3::new(1.0, 3.0, 0.0, 3.0, 1.0, 0.0, 0.0, 0.0, -2.0));
        assert_eq!(a_matrix(&Vec3::zeros()), Err(ArvaError::ZeroPosition));
    }

    #[test]
    fn on_axis_and_equatorial_fields() {
        let h = dipole_field(&Vec3::x(), &Rot3::identity()).unwrap();
        assert!((h - Vec3::new(2.0 / (4.0 * PI), 0.0, 0.0)).amax() < 1e-15);
        assert!((h.x - 0.159155).abs() < 1e-6);
        let h = dipole_field(&Vec3::y(), &Rot3::identity()).unwrap();
        assert!((h - Vec3::new(-1.0 / (4.0 * PI), 0.0, 0.0)).amax() < 1e-15);
        assert!((h.x + 0.079577).abs() < 1e-6);
    }

    #[test]
    fn singular_region_is_rejected() {
        let p = Vec3::new(1e-4, 0.0, 0.0);
        assert!(matches!(dipole_field(&p, &Rot3::identity()), Err(ArvaError::Singularity(_))));
        assert!(matches!(field_intensity(&p, &e1()), Err(ArvaError::Singularity(_))));
    }

    #[test]
    fn intensity_closed_forms() {
        assert!((field_intensity(&Vec3::x(), &e1()).unwrap() - 2.0 / (4.0 * PI)).abs() < 1e-15);
        assert!((field_intensity(&Vec3::y(), &e1()).unwrap() - 1.0 / (4.0 * PI)).abs() < 1e-15);
        let far = field_intensity(&Vec3::new(2.0, 0.0, 0.0), &e1()).unwrap();
        assert!((far - 2.0 / (32.0 * PI)).abs() < 1e-15);
        assert!((far - 0.0198944).abs() < 1e-7);
    }

    #[test]
    fn alignment_of_identity_attitude() {
        let m = m_matrix(&Rot3::identity());
        assert_eq!(m.matrix(), &(Vec3::x() * Vec3::x().transpose()));
    }

    #[test]
    fn conditioning_values() {
        assert_eq!(condition(1.0).unwrap(), 1.0);
        assert_eq!(condition(8.0).unwrap(), 0.5);
        let c = condition(2.0 / (4.0 * PI)).unwrap();
        assert!((c - (2.0 * PI).cbrt()).abs() < 1e-12);
        assert!((c - 1.84527).abs() < 1e-5);
        assert!(condition(0.0).is_err());
        assert!(condition(-1.0).is_err());
    }

    #[test]
    fn nominal_conditioned_values() {
        assert_eq!(nominal_conditioned(&Vec3::zeros(), &e1()), 0.0);
        let v = nominal_conditioned(&Vec3::x(), &e1());
        assert!((v - (2.0 * PI).cbrt()).abs() < 1e-12);
    }

    #[test]
    fn noiseless_measurement_is_the_dipole_field() {
        let p = Vec3::new(3.0, -4.0, 12.0);
        let r = rpy_to_rot(0.1, 0.2, 0.3);
        let emi = EmiModel::none();
        assert_eq!(measure(&p, &r, &emi, 12.5).unwrap(), dipole_field(&p, &r).unwrap());
    }

    #[test]
    fn seeded_emi_is_deterministic_and_bounded() {
        let a = EmiModel::seeded(1e-7, 0.01, 0.6, 42).unwrap();
        let b = EmiModel::seeded(1e-7, 0.01, 0.6, 42).unwrap();
        let c = EmiModel::seeded(1e-7, 0.01, 0.6, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let p = Vec3::new(10.0, 5.0, 15.0);
        let r = rpy_to_rot(0.0, 0.3, 1.0);
        let m1 = measure(&p, &r, &a, 17.3).unwrap();
        let m2 = measure(&p, &r, &b, 17.3).unwrap();
        assert_eq!(m1.as_slice(), m2.as_slice());
        for k in 0..10_000 {
            let t = k as f64 * 0.37;
            assert!(a.sample(t).norm() <= 1e-7 * (1.0 + 1e-12));
            let diff = measure(&p, &r, &a, t).unwrap() - dipole_field(&p, &r).unwrap();
            assert!(diff.norm() <= 1e-7 * (1.0 + 1e-9));
        }
    }

    #[test]
    fn emi_over_bound_is_rejected() {
        let e = EmiModel::new(1e-7, Vec3::new(1e-7, 0.0, 0.0), 0.01, 1e-8, Vec3::x());
        assert!(e.is_err());
        assert!(EmiModel::seeded(1e-7, 0.01, 1.5, 0).is_err());
    }

    #[test]
    fn transmitter_above_plane_is_rejected() {
        assert!(TransmitterConfig::new(Vec3::new(0.0, 0.0, -1.0), Rot3::identity()).is_err());
        assert!(TransmitterConfig::new(Vec3::new(0.0, 0.0, 0.0), Rot3::identity()).is_ok());
    }

    #[test]
    fn nsr_limits() {
        let m = m_matrix(&rpy_to_rot(0.2, -0.7, 1.1));
        let dir = Vec3::new(0.3, -0.5, 0.8).normalize();
        assert_eq!(nsr(&(dir * 5.0), &m, 0.0), 0.0);
        assert!(nsr(&(dir * 1e-3), &m, 1e-7) < 0.01);
        assert!(nsr(&(dir * 1e4), &m, 1e-7) > 0.99);
        let mut prev = 0.0;
        for k in 0..40 {
            let v = nsr(&(dir * 10f64.powf(-3.0 + k as f64 * 0.2)), &m, 1e-7);
            assert!((0.0..=1.0).contains(&v));
            assert!(v >= prev);
            prev = v;
        }
    }

    fn finite_diff_gradient(p: &Vec3, m: &DipoleAlignment, h: f64) -> Vec3 {
        let mut g = Vec3::zeros();
        for i in 0..3 {
            let mut e = Vec3::zeros();
            e[i] = h;
            g[i] = (nominal_conditioned(&(p + e), m) - nominal_conditioned(&(p - e), m)) / (2.0 * h);
        }
        g
    }

    fn rotate_about(axis: &Vec3, angle: f64, v: &Vec3) -> Vec3 {
        let k = axis.normalize();
        let (s, c) = angle.sin_cos();
        v * c + k.cross(v) * s + k * (k.dot(v) * (1.0 - c))
    }

    fn position() -> impl Strategy<Value = Vec3> {
        (prop::array::uniform3(-1.0f64..1.0), 0.1f64..100.0).prop_filter_map(
            "non-degenerate direction",
            |(d, s)| {
                let d = Vec3::from(d);
                (d.norm() > 1e-3).then(|| d.normalize() * s)
            },
        )
    }

    fn attitude() -> impl Strategy<Value = Rot3> {
        prop::array::uniform3(-PI..PI).prop_map(|[a, b, c]| rpy_to_rot(a, b, c))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn field_norm_matches_closed_form(p in position(), r in attitude()) {
            let h = dipole_field(&p, &r).unwrap().norm();
            let i = field_intensity(&p, &m_matrix(&r)).unwrap();
            prop_assert!(((h - i) / i).abs() < 1e-9);
        }

        #[test]
        fn alignment_is_rank_one_projector(r in attitude(), p in position()) {
            let m = m_matrix(&r);
            prop_assert!((m.matrix() - m.matrix().transpose()).amax() < 1e-15);
            let sv = m.matrix().singular_values();
            let max = sv.max();
            let min = sv.min();
            prop_assert!((max - 1.0).abs() < 1e-9 && min.abs() < 1e-9);
            let mut eig: Vec<f64> = m.matrix().symmetric_eigenvalues().iter().copied().collect();
            eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
            prop_assert!(eig[0].abs() < 1e-9 && eig[1].abs() < 1e-9 && (eig[2] - 1.0).abs() < 1e-9);
            let ratio = p.dot(&(m.matrix() * p)) / p.norm_squared();
            prop_assert!((-1e-15..=1.0 + 1e-15).contains(&ratio));
        }

        #[test]
        fn conditioning_matches_nominal_map(p in position(), r in attitude()) {
            let m = m_matrix(&r);
            let y = condition(field_intensity(&p, &m).unwrap()).unwrap();
            let n = nominal_conditioned(&p, &m);
            prop_assert!(((y - n) / n).abs() < 1e-9);
        }

        #[test]
        fn nominal_map_is_linear_along_rays(p in position(), r in attitude(), s in 0.01f64..100.0) {
            let m = m_matrix(&r);
            let d = p.normalize();
            let lhs = nominal_conditioned(&(d * s), &m);
            let rhs = s * nominal_conditioned(&d, &m);
            prop_assert!(((lhs - rhs) / rhs).abs() < 1e-12);
        }

        #[test]
        fn intensity_is_symmetric_about_dipole_axis(p in position(), r in attitude(), a in -PI..PI) {
            let m = m_matrix(&r);
            let axis = r.apply(&Vec3::x());
            let q = rotate_about(&axis, a, &p);
            let i0 = field_intensity(&p, &m).unwrap();
            let i1 = field_intensity(&q, &m).unwrap();
            prop_assert!(((i0 - i1) / i0).abs() < 1e-9);
        }

        #[test]
        fn intensity_decays_as_inverse_cube(p in position(), r in attitude(), s in 1.01f64..10.0) {
            let m = m_matrix(&r);
            let i0 = field_intensity(&p, &m).unwrap();
            let i1 = field_intensity(&(p * s), &m).unwrap();
            prop_assert!(i1 < i0);
            prop_assert!((i1 * s.powi(3) / i0 - 1.0).abs() < 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn analytic_gradient_matches_central_differences(p in position(), r in attitude()) {
            let p = if p.norm() < 1.0 { p.normalize() } else { p };
            let m = m_matrix(&r);
            let g = nominal_gradient(&p, &m);
            let fd = finite_diff_gradient(&p, &m, 1e-4);
            prop_assert!((g - fd).norm() / g.norm() < 1e-5);
        }
    }
}
