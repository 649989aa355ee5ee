//! Rotary-wing propulsion power, lighting loss and battery budgeting.
//!
//! Power is modeled as blade-profile + induced + parasite terms:
//!
//! ```text
//! P(v) = P0 (1 + 3v²/U_tip²) + P1 (sqrt(1 + v⁴/(4 v0⁴)) - v²/(2 v0²))^½ + ½ d0 ρ s G v³
//! P0   = δ/8 · ρ s G Ω³ R³
//! P1   = (1 + k) W^{3/2} / sqrt(2 ρ G)
//! ```
//!
//! so hovering costs exactly `P0 + P1`. Lighting drains the battery linearly
//! at `μ` percent per second.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::TrajectorySegment;

#[derive(Debug, Error, PartialEq)]
pub enum EnergyError {
    #[error(
        "mission infeasible: {battery_now:.2}% battery cannot cover {fixed_pct:.2}% of flight and keep {reserve:.2}% reserve"
    )]
    Infeasible { battery_now: f64, fixed_pct: f64, reserve: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropulsionParams {
    /// Profile drag coefficient δ.
    pub profile_drag: f64,
    /// Air density ρ, kg/m³.
    pub rho: f64,
    /// Rotor solidity s.
    pub solidity: f64,
    /// Rotor disk area G, m².
    pub disk_area: f64,
    /// Blade angular velocity Ω, rad/s.
    pub blade_angular_velocity: f64,
    /// Rotor radius R, m.
    pub rotor_radius: f64,
    /// Induced power correction k.
    pub induced_correction: f64,
    /// Aircraft weight W, N.
    pub weight: f64,
    /// Blade tip speed U_tip, m/s.
    pub tip_speed: f64,
    /// Mean rotor induced velocity in hover v0, m/s.
    pub induced_velocity: f64,
    /// Fuselage drag ratio d0.
    pub fuselage_drag: f64,
}

impl Default for PropulsionParams {
    fn default() -> Self {
        PropulsionParams {
            profile_drag: 0.012,
            rho: 1.225,
            solidity: 0.05,
            disk_area: 0.503,
            blade_angular_velocity: 300.0,
            rotor_radius: 0.4,
            induced_correction: 0.1,
            weight: 20.0,
            tip_speed: 120.0,
            induced_velocity: 4.03,
            fuselage_drag: 0.6,
        }
    }
}

impl PropulsionParams {
    pub fn validate(&self) -> Result<(), String> {
        let all = [
            self.profile_drag,
            self.rho,
            self.solidity,
            self.disk_area,
            self.blade_angular_velocity,
            self.rotor_radius,
            self.induced_correction,
            self.weight,
            self.tip_speed,
            self.induced_velocity,
            self.fuselage_drag,
        ];
        if !all.iter().all(|v| *v > 0.0 && v.is_finite()) {
            return Err("propulsion parameters must all be positive".into());
        }
        let omega_r = self.blade_angular_velocity * self.rotor_radius;
        if ((self.tip_speed - omega_r) / omega_r).abs() > 1e-6 {
            return Err(format!(
                "tip speed {} inconsistent with blade angular velocity x radius = {}",
                self.tip_speed, omega_r
            ));
        }
        Ok(())
    }
}

/// Battery and lighting constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyConfig {
    /// Usable battery energy, joules.
    pub capacity_j: f64,
    /// Lighting loss μ, battery percent per second of lighting.
    pub lighting_loss_pct_per_s: f64,
    /// Battery left on landing below which a mission is unsafe, percent.
    pub reserve_floor_pct: f64,
}

pub const DEFAULT_LIGHTING_LOSS: f64 = 0.2;

impl Default for EnergyConfig {
    fn default() -> Self {
        EnergyConfig {
            capacity_j: 15_500.0,
            lighting_loss_pct_per_s: DEFAULT_LIGHTING_LOSS,
            reserve_floor_pct: 5.0,
        }
    }
}

impl EnergyConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.capacity_j > 0.0 && self.capacity_j.is_finite()) {
            return Err("battery capacity must be positive".into());
        }
        if self.lighting_loss_pct_per_s.is_nan() || self.lighting_loss_pct_per_s < 0.0 || !(0.0..100.0).contains(&self.reserve_floor_pct) {
            return Err("lighting loss must be >= 0 and reserve floor in [0, 100)".into());
        }
        Ok(())
    }

    pub fn joules_to_pct(&self, joules: f64) -> f64 {
        joules / self.capacity_j * 100.0
    }

    pub fn pct_to_joules(&self, pct: f64) -> f64 {
        pct / 100.0 * self.capacity_j
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub e_fly: f64,
    pub e_light: f64,
    pub e_total: f64,
    pub pct_fly: f64,
    pub pct_light: f64,
    pub pct_total: f64,
}

/// Blade-profile and induced power in hover, watts.
pub fn hover_powers(p: &PropulsionParams) -> (f64, f64) {
    let p0 = p.profile_drag / 8.0
        * p.rho
        * p.solidity
        * p.disk_area
        * p.blade_angular_velocity.powi(3)
        * p.rotor_radius.powi(3);
    let p1 = (1.0 + p.induced_correction) * p.weight.powf(1.5) / (2.0 * p.rho * p.disk_area).sqrt();
    (p0, p1)
}

pub fn hover_power(p: &PropulsionParams) -> f64 {
    let (p0, p1) = hover_powers(p);
    p0 + p1
}

/// Propulsion power at airspeed `v` (m/s), watts.
pub fn propulsion_power(v: f64, p: &PropulsionParams) -> f64 {
    let (p0, p1) = hover_powers(p);
    if v <= 0.0 {
        return p0 + p1;
    }
    let v2 = v * v;
    let blade = p0 * (1.0 + 3.0 * v2 / (p.tip_speed * p.tip_speed));
    let parasite = 0.5 * p.fuselage_drag * p.rho * p.solidity * p.disk_area * v2 * v;
    blade + induced_power(v, p1, p.induced_velocity) + parasite
}

fn induced_power(v: f64, p1: f64, v0: f64) -> f64 {
    let v2 = v * v;
    let v0_2 = v0 * v0;
    p1 * ((1.0 + v2 * v2 / (4.0 * v0_2 * v0_2)).sqrt() - v2 / (2.0 * v0_2)).sqrt()
}

/// Flight energy of a trajectory, joules.
pub fn flight_energy(segments: &[TrajectorySegment], p: &PropulsionParams) -> f64 {
    segments.iter().map(|s| propulsion_power(s.speed, p) * s.duration).sum()
}

/// Lighting loss for `t_light` seconds, battery percent.
pub fn lighting_energy(t_light: f64, mu_pct_per_s: f64) -> f64 {
    mu_pct_per_s * t_light.max(0.0)
}

pub fn mission_energy(
    segments: &[TrajectorySegment],
    t_light: f64,
    p: &PropulsionParams,
    cfg: &EnergyConfig,
) -> EnergyBreakdown {
    let e_fly = flight_energy(segments, p);
    let pct_light = lighting_energy(t_light, cfg.lighting_loss_pct_per_s);
    let e_light = cfg.pct_to_joules(pct_light);
    let pct_fly = cfg.joules_to_pct(e_fly);
    EnergyBreakdown {
        e_fly,
        e_light,
        e_total: e_fly + e_light,
        pct_fly,
        pct_light,
        pct_total: pct_fly + pct_light,
    }
}

/// Battery percent spent per second of hover lighting: hover power plus the
/// lighting loss.
pub fn lighting_rate_pct(p: &PropulsionParams, cfg: &EnergyConfig) -> f64 {
    cfg.joules_to_pct(hover_power(p)) + cfg.lighting_loss_pct_per_s
}

/// The lighting share of a mission, needed to shorten it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightingLoad {
    pub t_light: f64,
    /// Battery percent consumed per lighting second (hover and lamp).
    pub pct_per_second: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum Sufficiency {
    Sufficient,
    Insufficient { serviceable_light_s: f64 },
}

/// Decides whether `battery_now` covers the mission and still lands with
/// `reserve` percent. When it does not, returns how many lighting seconds
/// the battery can afford with the return leg included.
pub fn sufficiency_check(
    breakdown: &EnergyBreakdown,
    load: LightingLoad,
    battery_now: f64,
    reserve: f64,
) -> Result<Sufficiency, EnergyError> {
    if battery_now - breakdown.pct_total >= reserve {
        return Ok(Sufficiency::Sufficient);
    }
    let fixed_pct = breakdown.pct_total - load.t_light * load.pct_per_second;
    let spare = battery_now - reserve - fixed_pct;
    if spare < 0.0 || load.pct_per_second <= 0.0 {
        return Err(EnergyError::Infeasible { battery_now, fixed_pct, reserve });
    }
    let serviceable = (spare / load.pct_per_second).min(load.t_light);
    Ok(Sufficiency::Insufficient { serviceable_light_s: serviceable })
}
