//! JSON request and response bodies shared by the HTTP service and its
//! clients.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::placement::{AnnealConfig, AnnealTrace};
use crate::planner::MissionPlan;
use crate::report::Report;
use crate::scenario::ScenarioFile;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanRequest {
    pub scenario: ScenarioFile,
    #[serde(default)]
    pub anneal: Option<AnnealConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResponse {
    pub plan: MissionPlan,
    pub traces: Vec<(usize, AnnealTrace)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidateRequest {
    pub scenario: ScenarioFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidateResponse {
    pub users: usize,
    pub fleet: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompileRequest {
    pub plan: MissionPlan,
    pub sn_codes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompileResponse {
    pub text: String,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParseRequest {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseResponse {
    /// The text re-rendered in canonical form.
    pub canonical: String,
    pub drones: u32,
    pub sn_map: Vec<(u32, String)>,
    pub commands: usize,
    pub battery_check: u32,
}

/// Fault injection settings for a simulated drone.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FaultProfile {
    /// Probability that a response datagram is silently dropped.
    pub drop_prob: f64,
    /// Extra response delay per command keyword, milliseconds.
    pub delay_ms: BTreeMap<String, u64>,
    /// (mission ms, percent): the battery is forced to the value once the
    /// mission clock passes the time.
    pub battery_script: Vec<(u64, f64)>,
    pub seed: u64,
    /// Number of leading responses to each command keyword to drop.
    pub drop_first: BTreeMap<String, u32>,
}

impl FaultProfile {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.drop_prob) {
            return Err(format!("drop_prob {} outside [0, 1]", self.drop_prob));
        }
        if self.battery_script.iter().any(|(_, p)| !(0.0..=100.0).contains(p)) {
            return Err("battery_script percentages must lie in [0, 100]".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FlyTarget {
    /// Spawn simulated drones; their SNs are taken from the flight text.
    Mock {
        #[serde(default)]
        faults: Vec<FaultProfile>,
    },
    /// Real or externally run drones at `host:port` addresses.
    Endpoints { addrs: Vec<String> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlyRequest {
    pub text: String,
    pub target: FlyTarget,
    /// Wall seconds per mission second; 1.0 is real time.
    #[serde(default = "one")]
    pub time_scale: f64,
    /// Battery each simulated drone starts with, percent.
    #[serde(default)]
    pub initial_battery: Option<f64>,
    /// Scenario constants used to drive the simulated drones.
    #[serde(default)]
    pub plan: Option<MissionPlan>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlyOutcome {
    Completed,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlyResponse {
    pub outcome: FlyOutcome,
    pub log: String,
    #[serde(default)]
    pub abort_reason: Option<String>,
    /// Final simulated state per drone (mock runs only): (sn, battery %).
    #[serde(default)]
    pub mock_final: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportRequest {
    pub log: String,
    pub plan: MissionPlan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportResponse {
    pub report: Report,
    pub csv: String,
    pub svg: String,
    pub summary: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    /// Bad input: malformed files, invalid scenarios, infeasible plans.
    Invalid,
    /// The mission was aborted in flight.
    Aborted,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub kind: ErrorKind,
    pub error: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
}
