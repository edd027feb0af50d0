//! Scenario documents and their validated, ready-to-run form.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::SimError;
use crate::arva::{EmiModel, TransmitterConfig};
use crate::esrg::EsParams;
use crate::geometry::{rpy_to_rot, HomTransform, Vec3};
use crate::uav::{LqrWeights, VehicleParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Rates {
    pub physics_hz: u32,
    pub ctrl_hz: u32,
    pub es_hz: u32,
    pub arva_hz: u32,
}

impl Default for Rates {
    fn default() -> Self {
        Self { physics_hz: 1000, ctrl_hz: 250, es_hz: 10, arva_hz: 1 }
    }
}

impl Rates {
    pub fn validate(&self) -> Result<(), SimError> {
        let chain = [self.physics_hz, self.ctrl_hz, self.es_hz, self.arva_hz];
        if chain.contains(&0) {
            return Err(SimError::InvalidScenario("rates must be positive".into()));
        }
        for w in chain.windows(2) {
            if w[0] < w[1] || w[0] % w[1] != 0 {
                return Err(SimError::InvalidScenario(format!(
                    "rates must be non-increasing integer multiples, got {} Hz then {} Hz",
                    w[0], w[1]
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmiConfig {
    /// Bound on the interference magnitude, field units.
    pub bound: f64,
    pub drift_frequency: f64,
    /// Share of the bound given to the constant component.
    pub base_fraction: f64,
}

impl Default for EmiConfig {
    fn default() -> Self {
        Self { bound: 1e-7, drift_frequency: 0.01, base_fraction: 0.5 }
    }
}

/// How the transmitter attitude is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OrientationMode {
    /// Use `victim_rpy` as given.
    #[default]
    Configured,
    /// Replace the attitude with the one that maximizes the distance between
    /// the planar optimum and the transmitter projection.
    WorstCase,
}

/// Full description of one experiment. Every field has a default, so a
/// scenario file only needs the values it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    /// Victim (transmitter) position, inertial NED, m.
    pub victim_position: [f64; 3],
    /// Transmitter roll, pitch, yaw with respect to the inertial frame, rad.
    pub victim_rpy: [f64; 3],
    pub orientation: OrientationMode,
    /// Search-plane origin, inertial, m.
    pub plane_origin: [f64; 3],
    /// Search-plane roll, pitch, yaw with respect to the inertial frame, rad.
    pub plane_rpy: [f64; 3],
    pub drone_start: [f64; 3],
    pub emi: EmiConfig,
    pub es: EsParams,
    pub vehicle: VehicleParams,
    pub lqr: LqrWeights,
    pub rates: Rates,
    /// Simulated time, s.
    pub duration: f64,
    pub seed: u64,
    /// Time constant of the low-pass filter on the conditioned signal, s.
    pub y_filter_tau: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            victim_position: [24.0866, 34.0866, -16.8773],
            victim_rpy: [0.0, 0.1745, 2.7052],
            orientation: OrientationMode::Configured,
            plane_origin: [0.0, 0.0, -6.1268],
            plane_rpy: [0.0, 0.6162, std::f64::consts::FRAC_PI_4],
            drone_start: [0.0, 0.0, -6.0],
            emi: EmiConfig::default(),
            es: EsParams::default(),
            vehicle: VehicleParams::default(),
            lqr: LqrWeights::default(),
            rates: Rates::default(),
            duration: 300.0,
            seed: 1,
            y_filter_tau: 0.5,
        }
    }
}

/// Validated scenario with all derived frames.
#[derive(Debug, Clone)]
pub struct World {
    pub scenario: Scenario,
    pub plane: HomTransform,
    pub transmitter: TransmitterConfig,
    pub emi: EmiModel,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        serde_json::from_str(text).map_err(|e| SimError::InvalidScenario(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn noiseless(mut self) -> Self {
        self.emi.bound = 0.0;
        self
    }

    /// Applies a partial scenario document on top of this one. Objects merge
    /// recursively; every other value replaces the current one.
    pub fn with_override(&self, patch: &Value) -> Result<Self, SimError> {
        let mut base = serde_json::to_value(self).expect("scenario serializes");
        merge(&mut base, patch);
        serde_json::from_value(base).map_err(|e| SimError::InvalidScenario(e.to_string()))
    }

    pub fn plane_transform(&self) -> HomTransform {
        let [r, p, y] = self.plane_rpy;
        HomTransform::new(rpy_to_rot(r, p, y), Vec3::from(self.plane_origin))
    }

    /// Transmitter pose in the plane frame using `victim_rpy`.
    pub fn configured_transmitter(&self) -> Result<TransmitterConfig, SimError> {
        let h = self.plane_transform();
        let [r, p, y] = self.victim_rpy;
        let position = h.inertial_to_plane(&Vec3::from(self.victim_position));
        let attitude = h.rotation_to_plane(&rpy_to_rot(r, p, y));
        TransmitterConfig::new(position, attitude).map_err(|e| SimError::InvalidScenario(e.to_string()))
    }

    pub fn validate(&self) -> Result<World, SimError> {
        let bad = |m: String| Err(SimError::InvalidScenario(m));
        let finite3 = |v: &[f64; 3]| v.iter().all(|x| x.is_finite());
        for (name, v) in [
            ("victim_position", &self.victim_position),
            ("victim_rpy", &self.victim_rpy),
            ("plane_origin", &self.plane_origin),
            ("plane_rpy", &self.plane_rpy),
            ("drone_start", &self.drone_start),
        ] {
            if !finite3(v) {
                return bad(format!("{name} has non-finite components"));
            }
        }
        self.rates.validate()?;
        self.vehicle.validate().map_err(|e| SimError::InvalidScenario(e.to_string()))?;
        self.es
            .validate(Some(self.vehicle.max_speed))
            .map_err(|e| SimError::InvalidScenario(e.to_string()))?;
        let dt_es = 1.0 / self.rates.es_hz as f64;
        if (self.es.dt_es - dt_es).abs() > 1e-12 {
            return bad(format!("es.dt_es = {} does not match es_hz = {}", self.es.dt_es, self.rates.es_hz));
        }
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return bad(format!("duration {}", self.duration));
        }
        if !(self.y_filter_tau >= 0.0) {
            return bad(format!("y_filter_tau {}", self.y_filter_tau));
        }
        let mut transmitter = self.configured_transmitter()?;
        if self.orientation == OrientationMode::WorstCase {
            let (attitude, _) = super::optimum::worst_case_orientation(transmitter.depth());
            transmitter = TransmitterConfig::new(transmitter.position_plane, attitude)
                .map_err(|e| SimError::InvalidScenario(e.to_string()))?;
        }
        let plane = self.plane_transform();
        let start_rel = transmitter.relative(&plane.inertial_to_plane(&Vec3::from(self.drone_start)));
        if start_rel.norm() <= crate::arva::SINGULARITY_RADIUS {
            return bad("drone starts on top of the transmitter".into());
        }
        let emi = EmiModel::seeded(self.emi.bound, self.emi.drift_frequency, self.emi.base_fraction, self.seed)
            .map_err(|e| SimError::InvalidScenario(e.to_string()))?;
        Ok(World { scenario: self.clone(), plane, transmitter, emi })
    }
}

fn merge(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (slot, v) => *slot = v.clone(),
    }
}
