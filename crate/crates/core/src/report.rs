//! Post-flight reporting: battery-versus-time per drone rebuilt from the
//! log's battery readings, with the energy model shaping the curve between
//! readings.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{hover_power, propulsion_power};
use crate::flight_log::{Direction, FlightLog};
use crate::planner::MissionPlan;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ReportError {
    #[error("log has no battery readings")]
    NoReadings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroneSeries {
    pub drone: u32,
    /// (seconds, battery percent)
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroneSummary {
    pub drone: u32,
    pub takeoff_s: Option<f64>,
    pub arrival_s: Option<f64>,
    pub return_s: Option<f64>,
    pub landed_s: Option<f64>,
    pub first_battery: Option<u32>,
    pub final_battery: Option<u32>,
    pub planned_landing_pct: Option<f64>,
    pub retries: usize,
    pub forced_landing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub series: Vec<DroneSeries>,
    pub summary: Vec<DroneSummary>,
}

impl Report {
    pub fn series_csv(&self) -> String {
        let mut out = String::from("drone,t_s,battery_pct\n");
        for s in &self.series {
            for (t, b) in &s.points {
                out.push_str(&format!("{},{:.3},{:.3}\n", s.drone, t, b));
            }
        }
        out
    }

    pub fn summary_text(&self) -> String {
        let fmt_t = |t: Option<f64>| t.map_or("-".to_string(), |t| format!("{t:.1}s"));
        let mut out = String::new();
        for d in &self.summary {
            out.push_str(&format!(
                "drone {}: takeoff {} arrive {} return {} landed {} battery {}% -> {}% (planned {}) retries {}{}\n",
                d.drone,
                fmt_t(d.takeoff_s),
                fmt_t(d.arrival_s),
                fmt_t(d.return_s),
                fmt_t(d.landed_s),
                d.first_battery.map_or("-".into(), |b| b.to_string()),
                d.final_battery.map_or("-".into(), |b| b.to_string()),
                d.planned_landing_pct.map_or("-".into(), |b| format!("{b:.1}%")),
                d.retries,
                if d.forced_landing { " FORCED LANDING" } else { "" },
            ));
        }
        out
    }
}

/// Piecewise-constant modeled drain, percent per second.
struct DrainModel {
    pieces: Vec<(f64, f64, f64)>,
}

impl DrainModel {
    /// Modeled drain accumulated from 0 to `t`.
    fn cumulative(&self, t: f64) -> f64 {
        self.pieces.iter().map(|&(a, b, r)| r * (t.min(b) - a).max(0.0)).sum()
    }
}

fn drain_model(log: &FlightLog, drone: u32, plan: &MissionPlan) -> DrainModel {
    let cap = |w: f64| w / plan.energy_config.capacity_j * 100.0;
    let hover = cap(hover_power(&plan.propulsion));
    let mu = plan.energy_config.lighting_loss_pct_per_s;
    let kin = &plan.kinematics;
    let end = log.entries.last().map_or(0.0, |e| e.ms as f64 / 1000.0);

    let mut pieces = Vec::new();
    let mut airborne_since: Option<f64> = None;
    let mut deployed = false;
    let mut cursor = 0.0;
    let mut sent: Option<(f64, String)> = None;
    let idle_rate = |deployed: bool| hover + if deployed { mu } else { 0.0 };

    for e in log.for_drone(drone) {
        let t = e.ms as f64 / 1000.0;
        match e.direction {
            Direction::Sent => sent = Some((t, e.text.clone())),
            Direction::Recv if e.text == "ok" => {
                let Some((t0, cmd)) = sent.take() else { continue };
                let verb = cmd.split_whitespace().next().unwrap_or("");
                let speed = match verb {
                    "forward" | "back" => Some(kin.horizontal_speed),
                    "up" | "down" | "takeoff" | "land" => Some(kin.vertical_speed),
                    _ => None,
                };
                if verb == "takeoff" {
                    airborne_since = Some(t0);
                    cursor = t0;
                }
                if airborne_since.is_some() {
                    if t0 > cursor {
                        pieces.push((cursor, t0, idle_rate(deployed)));
                    }
                    let rate = match speed {
                        Some(v) => cap(propulsion_power(v, &plan.propulsion)),
                        None => idle_rate(deployed),
                    };
                    pieces.push((t0.max(cursor), t, rate));
                    cursor = t;
                }
                match verb {
                    "forward" => deployed = true,
                    "back" => deployed = false,
                    "land" => {
                        airborne_since = None;
                        deployed = false;
                    }
                    _ => {}
                }
            }
            _ => {}
        }
    }
    if airborne_since.is_some() && end > cursor {
        pieces.push((cursor, end, idle_rate(deployed)));
    }
    DrainModel { pieces }
}

pub fn build_report(log: &FlightLog, plan: &MissionPlan) -> Result<Report, ReportError> {
    if log.entries.iter().all(|e| e.battery.is_none()) {
        return Err(ReportError::NoReadings);
    }
    let mut series = Vec::new();
    let mut summary = Vec::new();
    for drone in log.drones() {
        let readings: Vec<(f64, f64)> = log
            .for_drone(drone)
            .filter_map(|e| e.battery.map(|b| (e.ms as f64 / 1000.0, b as f64)))
            .collect();
        let model = drain_model(log, drone, plan);
        let points = if readings.is_empty() { Vec::new() } else { interpolate(&readings, &model, log) };
        series.push(DroneSeries { drone, points });
        summary.push(summarize(log, drone, plan));
    }
    Ok(Report { series, summary })
}

fn interpolate(readings: &[(f64, f64)], model: &DrainModel, log: &FlightLog) -> Vec<(f64, f64)> {
    let end = log.entries.last().map_or(0.0, |e| e.ms as f64 / 1000.0);
    let start = readings[0].0;
    let mut times: Vec<f64> = readings.iter().map(|r| r.0).collect();
    times.extend(model.pieces.iter().flat_map(|p| [p.0, p.1]).filter(|t| *t >= start));
    let mut t = start.ceil();
    while t < end {
        times.push(t);
        t += 1.0;
    }
    times.push(end);
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() < 1e-9);

    let value = |t: f64| -> f64 {
        let k = readings.partition_point(|r| r.0 <= t);
        let (ta, ra) = readings[k.saturating_sub(1).min(readings.len() - 1)];
        if k == 0 {
            return ra;
        }
        let fa = model.cumulative(ta);
        if k == readings.len() {
            return (ra - (model.cumulative(t) - fa)).max(0.0);
        }
        let (tb, rb) = readings[k];
        let span = model.cumulative(tb) - fa;
        if span > 1e-12 {
            ra - (ra - rb) * (model.cumulative(t) - fa) / span
        } else {
            ra + (rb - ra) * (t - ta) / (tb - ta)
        }
    };
    times.into_iter().map(|t| (t, value(t))).collect()
}

fn summarize(log: &FlightLog, drone: u32, plan: &MissionPlan) -> DroneSummary {
    let mut s = DroneSummary {
        drone,
        takeoff_s: None,
        arrival_s: None,
        return_s: None,
        landed_s: None,
        first_battery: None,
        final_battery: log.last_battery(drone),
        planned_landing_pct: plan.uavs.get(drone as usize - 1).map(|p| p.landing_battery_pct),
        retries: 0,
        forced_landing: false,
    };
    let mut sent = String::new();
    for e in log.for_drone(drone) {
        let t = e.ms as f64 / 1000.0;
        if s.first_battery.is_none() {
            s.first_battery = e.battery;
        }
        match e.direction {
            Direction::Sent => {
                if e.text == "takeoff" && s.takeoff_s.is_none() {
                    s.takeoff_s = Some(t);
                }
                if e.text.starts_with("back") && s.return_s.is_none() {
                    s.return_s = Some(t);
                }
                sent = e.text.clone();
            }
            Direction::Recv if e.text == "ok" => {
                if sent.starts_with("forward") || (sent.starts_with("down") && s.arrival_s.is_some()) {
                    s.arrival_s = Some(t);
                }
                if sent == "land" {
                    s.landed_s = Some(t);
                }
            }
            Direction::Event => {
                if e.text.starts_with("retry") {
                    s.retries += 1;
                }
                if e.text.starts_with("forced_land") {
                    s.forced_landing = true;
                }
            }
            _ => {}
        }
    }
    s
}
