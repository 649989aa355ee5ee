//! Lighting-disk geometry and hover-height selection.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{Bands, BrightnessBand, UavPose, UserRequest};

/// Absolute tolerance for coverage comparisons, in meters.
pub const COVERAGE_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("no users to measure against")]
    EmptyUsers,
    #[error("light angle {0} deg outside (0, 90)")]
    Angle(f64),
    #[error("users {d_max:.3} m away need height {required:.3} m, above band maximum {h_max:.3} m")]
    Infeasible { d_max: f64, required: f64, h_max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightingDisk {
    pub center: (f64, f64),
    pub radius: f64,
    pub area: f64,
}

impl LightingDisk {
    pub fn covers(&self, x: f64, y: f64) -> bool {
        (x - self.center.0).hypot(y - self.center.1) <= self.radius + COVERAGE_EPS
    }
}

pub fn horizontal_distance(p: &UavPose, u: &UserRequest) -> f64 {
    ground_distance(p.ground(), u.ground())
}

pub fn ground_distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Distance from the UAV to the farthest user.
pub fn max_distance(p: &UavPose, users: &[UserRequest]) -> Result<f64, GeometryError> {
    if users.is_empty() {
        return Err(GeometryError::EmptyUsers);
    }
    Ok(users.iter().map(|u| horizontal_distance(p, u)).fold(0.0, f64::max))
}

fn check_angle(alpha_deg: f64) -> Result<f64, GeometryError> {
    if alpha_deg > 0.0 && alpha_deg < 90.0 {
        Ok(alpha_deg.to_radians().tan())
    } else {
        Err(GeometryError::Angle(alpha_deg))
    }
}

/// The lit ground disk under a UAV hovering at `p`.
pub fn lighting_disk(p: &UavPose, alpha_deg: f64) -> Result<LightingDisk, GeometryError> {
    let tan = check_angle(alpha_deg)?;
    let radius = p.z.max(0.0) * tan;
    Ok(LightingDisk {
        center: p.ground(),
        radius,
        area: std::f64::consts::PI * radius * radius,
    })
}

/// Lowest height inside `band` whose disk reaches `d_max`.
pub fn adjust_height(alpha_deg: f64, d_max: f64, band: &BrightnessBand) -> Result<f64, GeometryError> {
    let tan = check_angle(alpha_deg)?;
    let required = d_max.max(0.0) / tan;
    if required > band.h_max {
        return Err(GeometryError::Infeasible { d_max, required, h_max: band.h_max });
    }
    Ok(required.max(band.h_min))
}

/// The strictest band among the users: the brightest request present
/// decides the hover altitude.
pub fn governing_band(bands: &Bands, users: &[UserRequest]) -> Option<BrightnessBand> {
    users.iter().map(|u| u.beta).min().map(|b| bands.get(b))
}

/// Largest disk radius reachable within a band.
pub fn max_radius(alpha_deg: f64, band: &BrightnessBand) -> Result<f64, GeometryError> {
    Ok(band.h_max * check_angle(alpha_deg)?)
}
