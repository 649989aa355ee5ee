//! Domain types shared by every stage of the pipeline, plus scenario file
//! loading and validation.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{EnergyConfig, PropulsionParams};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid(msg.into())
}

/// Brightness demand level. 1 is the brightest request and is served from
/// the lowest altitude band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Brightness(u8);

impl Brightness {
    pub const ALL: [Brightness; 3] = [Brightness(1), Brightness(2), Brightness(3)];

    pub fn new(level: u8) -> Result<Self, ScenarioError> {
        if (1..=3).contains(&level) {
            Ok(Brightness(level))
        } else {
            Err(invalid(format!("brightness level {level} outside {{1,2,3}}")))
        }
    }

    pub fn level(self) -> u8 {
        self.0
    }

    fn slot(self) -> usize {
        usize::from(self.0 - 1)
    }
}

impl TryFrom<u8> for Brightness {
    type Error = ScenarioError;
    fn try_from(v: u8) -> Result<Self, Self::Error> {
        Brightness::new(v)
    }
}

impl From<Brightness> for u8 {
    fn from(b: Brightness) -> u8 {
        b.0
    }
}

impl fmt::Display for Brightness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A ground user asking for light. The user's height is always zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserRequest {
    pub x: f64,
    pub y: f64,
    pub beta: Brightness,
    /// Seconds of lighting required.
    pub t_user: f64,
}

impl UserRequest {
    pub fn new(x: f64, y: f64, beta: u8, t_user: f64) -> Result<Self, ScenarioError> {
        let user = UserRequest { x, y, beta: Brightness::new(beta)?, t_user };
        user.validate()?;
        Ok(user)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !self.x.is_finite() || !self.y.is_finite() {
            return Err(invalid("user coordinates must be finite"));
        }
        if self.t_user <= 0.0 || !self.t_user.is_finite() {
            return Err(invalid(format!("t_user must be positive, got {}", self.t_user)));
        }
        Ok(())
    }

    pub fn ground(&self) -> (f64, f64) {
        (self.x, self.y)
    }
}

/// Altitude interval that serves one brightness level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrightnessBand {
    pub beta: Brightness,
    pub h_min: f64,
    pub h_max: f64,
}

impl BrightnessBand {
    pub fn new(beta: Brightness, h_min: f64, h_max: f64) -> Result<Self, ScenarioError> {
        let band = BrightnessBand { beta, h_min, h_max };
        band.validate()?;
        Ok(band)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.h_min > 0.0 && self.h_min < self.h_max && self.h_max.is_finite()) {
            return Err(invalid(format!(
                "band for beta={} needs 0 < h_min < h_max, got [{}, {}]",
                self.beta, self.h_min, self.h_max
            )));
        }
        Ok(())
    }
}

/// The three altitude bands, indexed by brightness level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bands([BrightnessBand; 3]);

impl Bands {
    pub fn new(bands: [BrightnessBand; 3]) -> Result<Self, ScenarioError> {
        for (slot, band) in bands.iter().enumerate() {
            band.validate()?;
            if band.beta.slot() != slot {
                return Err(invalid("bands must be listed for beta 1, 2, 3 in order"));
            }
        }
        for pair in bands.windows(2) {
            if pair[0].h_max > pair[1].h_min {
                return Err(invalid(format!(
                    "bands for beta={} and beta={} overlap or are out of order",
                    pair[0].beta, pair[1].beta
                )));
            }
        }
        Ok(Bands(bands))
    }

    pub fn get(&self, beta: Brightness) -> BrightnessBand {
        self.0[beta.slot()]
    }

    pub fn iter(&self) -> impl Iterator<Item = &BrightnessBand> {
        self.0.iter()
    }
}

impl Default for Bands {
    fn default() -> Self {
        let b = |level, lo, hi| BrightnessBand { beta: Brightness(level), h_min: lo, h_max: hi };
        Bands([b(1, 1.0, 1.5), b(2, 1.5, 2.2), b(3, 2.2, 3.0)])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UavPose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl UavPose {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        UavPose { x, y, z }
    }

    pub fn ground(&self) -> (f64, f64) {
        (self.x, self.y)
    }
}

/// Durations of the five phases of one service cycle, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ServiceCycle {
    pub t_off: f64,
    pub t_deploy: f64,
    pub t_light: f64,
    pub t_back: f64,
    pub t_land: f64,
}

impl ServiceCycle {
    pub fn total(&self) -> f64 {
        self.t_off + self.t_deploy + self.t_light + self.t_back + self.t_land
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Off,
    Deploy,
    Light,
    Back,
    Land,
}

/// One piece of the piecewise pose law: a displacement flown at constant
/// speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySegment {
    pub phase: Phase,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    pub speed: f64,
    pub duration: f64,
}

impl TrajectorySegment {
    pub fn hover(phase: Phase, duration: f64) -> Self {
        TrajectorySegment { phase, dx: 0.0, dy: 0.0, dz: 0.0, speed: 0.0, duration }
    }

    pub fn is_planar(&self) -> bool {
        self.dz == 0.0
    }

    pub fn is_vertical(&self) -> bool {
        self.dx == 0.0 && self.dy == 0.0
    }

    /// Checks the per-phase motion rules. Deploy and back legs move either
    /// in the ground plane or along Z, never both at once; the deploy phase
    /// ends with the vertical hover-height adjustment.
    pub fn validate(&self) -> Result<(), String> {
        if !(self.speed >= 0.0 && self.duration >= 0.0) {
            return Err(format!("{:?} segment has negative speed or duration", self.phase));
        }
        let ok = match self.phase {
            Phase::Off | Phase::Land => self.is_vertical(),
            Phase::Deploy | Phase::Back => self.is_planar() || self.is_vertical(),
            Phase::Light => self.is_vertical() && self.is_planar(),
        };
        if ok {
            Ok(())
        } else {
            Err(format!("{:?} segment moves along a forbidden axis", self.phase))
        }
    }
}

/// Horizontal/vertical cruise speeds and the height an automatic takeoff
/// climbs to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Kinematics {
    pub horizontal_speed: f64,
    pub vertical_speed: f64,
    pub takeoff_height: f64,
}

impl Default for Kinematics {
    fn default() -> Self {
        Kinematics { horizontal_speed: 1.0, vertical_speed: 0.7, takeoff_height: 0.8 }
    }
}

impl Kinematics {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let ok = [self.horizontal_speed, self.vertical_speed, self.takeoff_height]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(invalid("speeds and takeoff height must be positive"))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub users: Vec<UserRequest>,
    /// Home pose of each available UAV; the fleet size is its length.
    pub homes: Vec<UavPose>,
    pub light_angle_deg: f64,
    pub bands: Bands,
    pub battery_full_pct: f64,
    pub propulsion: PropulsionParams,
    pub energy: EnergyConfig,
    pub kinematics: Kinematics,
}

impl Scenario {
    pub fn new(users: Vec<UserRequest>, homes: Vec<UavPose>) -> Result<Self, ScenarioError> {
        let s = Scenario {
            users,
            homes,
            light_angle_deg: 30.0,
            bands: Bands::default(),
            battery_full_pct: 100.0,
            propulsion: PropulsionParams::default(),
            energy: EnergyConfig::default(),
            kinematics: Kinematics::default(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn fleet_size(&self) -> usize {
        self.homes.len()
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.users.is_empty() {
            return Err(invalid("scenario has no users"));
        }
        for (i, u) in self.users.iter().enumerate() {
            u.validate().map_err(|e| invalid(format!("user {i}: {e}")))?;
        }
        if self.homes.is_empty() {
            return Err(invalid("fleet must contain at least one UAV"));
        }
        for (i, h) in self.homes.iter().enumerate() {
            if !(h.x.is_finite() && h.y.is_finite() && h.z.is_finite() && h.z >= 0.0) {
                return Err(invalid(format!("fleet[{i}] home must be finite with z >= 0")));
            }
        }
        if !(self.light_angle_deg > 0.0 && self.light_angle_deg < 90.0) {
            return Err(invalid(format!(
                "light angle must lie in (0, 90) degrees, got {}",
                self.light_angle_deg
            )));
        }
        Bands::new(self.bands.0)?;
        if !(0.0..=100.0).contains(&self.battery_full_pct) {
            return Err(invalid("battery_full_pct must lie in [0, 100]"));
        }
        self.propulsion.validate().map_err(invalid)?;
        self.energy.validate().map_err(invalid)?;
        self.kinematics.validate()?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let file: ScenarioFile = serde_json::from_str(text)?;
        file.into_scenario()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ScenarioFile::from(self)).expect("scenario serializes")
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path)?;
    Scenario::from_json(&text)
}

/// On-disk JSON layout of a scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub users: Vec<UserEntry>,
    pub fleet: Vec<FleetEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub light_angle_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bands: Option<BTreeMap<String, [f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub battery_full_pct: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub propulsion: Option<PropulsionParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<EnergyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kinematics: Option<Kinematics>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserEntry {
    pub x: f64,
    pub y: f64,
    pub beta: u8,
    pub t_user: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetEntry {
    pub home: [f64; 3],
}

impl ScenarioFile {
    pub fn into_scenario(self) -> Result<Scenario, ScenarioError> {
        let users = self
            .users
            .iter()
            .enumerate()
            .map(|(i, u)| {
                UserRequest::new(u.x, u.y, u.beta, u.t_user)
                    .map_err(|e| invalid(format!("user {i}: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let homes = self.fleet.iter().map(|f| UavPose::new(f.home[0], f.home[1], f.home[2])).collect();

        let mut bands = Bands::default().0;
        if let Some(map) = &self.bands {
            for (key, [lo, hi]) in map {
                let level: u8 = key.parse().map_err(|_| invalid(format!("bad band key {key:?}")))?;
                let beta = Brightness::new(level)?;
                bands[beta.slot()] = BrightnessBand { beta, h_min: *lo, h_max: *hi };
            }
        }

        let scenario = Scenario {
            users,
            homes,
            light_angle_deg: self.light_angle_deg.unwrap_or(30.0),
            bands: Bands::new(bands)?,
            battery_full_pct: self.battery_full_pct.unwrap_or(100.0),
            propulsion: self.propulsion.unwrap_or_default(),
            energy: self.energy.unwrap_or_default(),
            kinematics: self.kinematics.unwrap_or_default(),
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

impl From<&Scenario> for ScenarioFile {
    fn from(s: &Scenario) -> Self {
        ScenarioFile {
            users: s
                .users
                .iter()
                .map(|u| UserEntry { x: u.x, y: u.y, beta: u.beta.level(), t_user: u.t_user })
                .collect(),
            fleet: s.homes.iter().map(|h| FleetEntry { home: [h.x, h.y, h.z] }).collect(),
            light_angle_deg: Some(s.light_angle_deg),
            bands: Some(
                s.bands.iter().map(|b| (b.beta.to_string(), [b.h_min, b.h_max])).collect(),
            ),
            battery_full_pct: Some(s.battery_full_pct),
            propulsion: Some(s.propulsion),
            energy: Some(s.energy),
            kinematics: Some(s.kinematics),
        }
    }
}
