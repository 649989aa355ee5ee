//! Mission planning: turns a scenario into per-UAV sorties with timing,
//! trajectory segments, energy budgets and relief flights.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{
    self, EnergyBreakdown, EnergyConfig, EnergyError, LightingLoad, PropulsionParams, Sufficiency,
};
use crate::geometry::{self, ground_distance, GeometryError};
use crate::placement::{self, AnnealConfig, AnnealTrace, PlacementError};
use crate::scenario::{
    BrightnessBand, Kinematics, Phase, Scenario, ServiceCycle, TrajectorySegment, UavPose, UserRequest,
};

/// Seconds a relief UAV should be on station before the incumbent leaves.
pub const HANDOVER_MARGIN_S: f64 = 2.0;

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error(transparent)]
    Placement(#[from] PlacementError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error("UAV {uav} needs relief but every UAV in the fleet is committed")]
    NoRelief { uav: usize },
}

/// What a UAV is told to do after takeoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlightParams {
    /// Clockwise turn from the home heading (+Y), degrees in [0, 360).
    pub rotate_cw: f64,
    pub forward: f64,
    /// Service height minus transit height; negative means descend.
    pub descend_or_climb: f64,
    pub t_light: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Primary,
    Relief,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavPlan {
    /// Fleet index of the UAV.
    pub uav: usize,
    pub role: Role,
    /// Scenario user indices this sortie lights.
    pub users: Vec<usize>,
    pub home: UavPose,
    pub target: (f64, f64),
    pub band: BrightnessBand,
    pub transit_height: f64,
    pub service_height: f64,
    pub flight_params: FlightParams,
    pub cycle: ServiceCycle,
    pub segments: Vec<TrajectorySegment>,
    pub energy: EnergyBreakdown,
    /// Mission time of takeoff, seconds.
    pub launch_time: f64,
    /// Lighting seconds the users asked this sortie for.
    pub demand_s: f64,
    pub landing_battery_pct: f64,
}

impl UavPlan {
    /// Mission time at which the UAV reaches its service pose.
    pub fn arrival_time(&self) -> f64 {
        self.launch_time + self.cycle.t_off + self.cycle.t_deploy
    }

    pub fn light_end_time(&self) -> f64 {
        self.arrival_time() + self.cycle.t_light
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Replacement {
    pub uav: usize,
    pub relief_uav: usize,
    /// Mission time the incumbent stops lighting and heads home.
    pub handover_time: f64,
    pub relief_launch_time: f64,
    /// Lighting seconds neither UAV can supply.
    pub unserved_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionPlan {
    pub users: Vec<UserRequest>,
    pub light_angle_deg: f64,
    pub battery_full_pct: f64,
    pub kinematics: Kinematics,
    pub propulsion: PropulsionParams,
    pub energy_config: EnergyConfig,
    /// Sorties; position k flies as drone number k + 1 in flight text.
    pub uavs: Vec<UavPlan>,
    pub replacements: Vec<Replacement>,
}

impl MissionPlan {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn sortie(&self, uav: usize) -> Option<&UavPlan> {
        self.uavs.iter().find(|p| p.uav == uav)
    }
}

/// A plan together with the annealing traces of its primary sorties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanOutcome {
    pub plan: MissionPlan,
    /// (fleet index, trace) per primary sortie.
    pub traces: Vec<(usize, AnnealTrace)>,
}

/// Clockwise bearing from +Y towards `to`, degrees in [0, 360).
pub fn bearing_cw(from: (f64, f64), to: (f64, f64)) -> f64 {
    let (dx, dy) = (to.0 - from.0, to.1 - from.1);
    if dx == 0.0 && dy == 0.0 {
        return 0.0;
    }
    let deg = dx.atan2(dy).to_degrees().rem_euclid(360.0);
    if deg >= 360.0 {
        0.0
    } else {
        deg
    }
}

pub fn derive_flight_params(
    home: &UavPose,
    target: (f64, f64),
    service_height: f64,
    transit_height: f64,
    t_light: f64,
) -> FlightParams {
    FlightParams {
        rotate_cw: bearing_cw(home.ground(), target),
        forward: ground_distance(home.ground(), target),
        descend_or_climb: service_height - transit_height,
        t_light,
    }
}

fn vertical(phase: Phase, dz: f64, kin: &Kinematics) -> TrajectorySegment {
    let speed = kin.vertical_speed;
    TrajectorySegment { phase, dx: 0.0, dy: 0.0, dz, speed, duration: dz.abs() / speed }
}

fn planar(phase: Phase, dx: f64, dy: f64, kin: &Kinematics) -> TrajectorySegment {
    let speed = kin.horizontal_speed;
    TrajectorySegment { phase, dx, dy, dz: 0.0, speed, duration: dx.hypot(dy) / speed }
}

/// Phase timings and the segments of one sortie. The UAV climbs from
/// `ground_z` to transit height, flies the leg, settles to service height,
/// hovers, flies back at service height and lands.
pub fn build_cycle(
    params: &FlightParams,
    ground_z: f64,
    transit_height: f64,
    kin: &Kinematics,
) -> (ServiceCycle, Vec<TrajectorySegment>) {
    let service = transit_height + params.descend_or_climb;
    let theta = params.rotate_cw.to_radians();
    let (dx, dy) = (params.forward * theta.sin(), params.forward * theta.cos());
    let segments = vec![
        vertical(Phase::Off, transit_height - ground_z, kin),
        planar(Phase::Deploy, dx, dy, kin),
        vertical(Phase::Deploy, params.descend_or_climb, kin),
        TrajectorySegment::hover(Phase::Light, params.t_light),
        planar(Phase::Back, -dx, -dy, kin),
        vertical(Phase::Land, ground_z - service, kin),
    ];
    let sum = |phase| segments.iter().filter(|s| s.phase == phase).map(|s| s.duration).sum();
    let cycle = ServiceCycle {
        t_off: sum(Phase::Off),
        t_deploy: sum(Phase::Deploy),
        t_light: sum(Phase::Light),
        t_back: sum(Phase::Back),
        t_land: sum(Phase::Land),
    };
    (cycle, segments)
}

/// Poses at each segment boundary, starting with `home`.
pub fn replay(home: &UavPose, segments: &[TrajectorySegment]) -> Vec<UavPose> {
    let mut poses = vec![*home];
    let mut p = *home;
    for s in segments {
        p = UavPose::new(p.x + s.dx, p.y + s.dy, p.z + s.dz);
        poses.push(p);
    }
    poses
}

struct Sortie<'a> {
    scenario: &'a Scenario,
    uav: usize,
    role: Role,
    users: Vec<usize>,
    target: (f64, f64),
    band: BrightnessBand,
    service_height: f64,
    launch_time: f64,
    demand_s: f64,
}

impl Sortie<'_> {
    fn plan(&self, t_light: f64) -> UavPlan {
        let s = self.scenario;
        let home = s.homes[self.uav];
        let forward = ground_distance(home.ground(), self.target);
        let transit = if forward == 0.0 { self.service_height } else { self.band.h_max.max(self.service_height) };
        let params = derive_flight_params(&home, self.target, self.service_height, transit, t_light);
        let (cycle, segments) = build_cycle(&params, home.z, transit, &s.kinematics);
        let energy = energy::mission_energy(&segments, t_light, &s.propulsion, &s.energy);
        UavPlan {
            uav: self.uav,
            role: self.role,
            users: self.users.clone(),
            home,
            target: self.target,
            band: self.band,
            transit_height: transit,
            service_height: self.service_height,
            flight_params: params,
            cycle,
            segments,
            energy,
            launch_time: self.launch_time,
            demand_s: self.demand_s,
            landing_battery_pct: s.battery_full_pct - energy.pct_total,
        }
    }

    /// Plans the sortie for `t_light` seconds, shortened to what the battery
    /// allows. Returns the plan and the seconds cut.
    fn plan_within_battery(&self, t_light: f64) -> Result<(UavPlan, f64), PlanError> {
        let s = self.scenario;
        let full = self.plan(t_light);
        let return_leg: Vec<_> = full
            .segments
            .iter()
            .filter(|seg| matches!(seg.phase, Phase::Back | Phase::Land))
            .copied()
            .collect();
        let reserve =
            s.energy.reserve_floor_pct + s.energy.joules_to_pct(energy::flight_energy(&return_leg, &s.propulsion));
        let load = LightingLoad { t_light, pct_per_second: energy::lighting_rate_pct(&s.propulsion, &s.energy) };
        match energy::sufficiency_check(&full.energy, load, s.battery_full_pct, reserve)? {
            Sufficiency::Sufficient => Ok((full, 0.0)),
            Sufficiency::Insufficient { serviceable_light_s } => {
                Ok((self.plan(serviceable_light_s), t_light - serviceable_light_s))
            }
        }
    }
}

pub fn plan_mission(scenario: &Scenario) -> Result<MissionPlan, PlanError> {
    Ok(plan_mission_with(scenario, &AnnealConfig::default())?.plan)
}

/// Full planning pipeline. Cluster k anneals with seed `cfg.rng_seed + k`.
pub fn plan_mission_with(scenario: &Scenario, cfg: &AnnealConfig) -> Result<PlanOutcome, PlanError> {
    let s = scenario;
    let assignment = placement::partition_users(s)?;
    let mut uavs = Vec::new();
    let mut traces = Vec::new();
    let mut shortfalls = Vec::new();

    for (k, cluster) in assignment.clusters.iter().enumerate() {
        let users: Vec<UserRequest> = cluster.users.iter().map(|&i| s.users[i]).collect();
        let trace = placement::anneal(&users, &cfg.with_seed(cfg.rng_seed.wrapping_add(k as u64)))?;
        let (target, service_height) =
            match geometry::adjust_height(s.light_angle_deg, trace.final_f, &cluster.band) {
                Ok(h) => (trace.final_point, h),
                Err(GeometryError::Infeasible { .. }) => {
                    let exact = placement::exact_one_center(&users)?;
                    (exact.center, geometry::adjust_height(s.light_angle_deg, exact.radius, &cluster.band)?)
                }
                Err(e) => return Err(e.into()),
            };
        let demand_s = users.iter().map(|u| u.t_user).fold(0.0, f64::max);
        let sortie = Sortie {
            scenario: s,
            uav: cluster.uav,
            role: Role::Primary,
            users: cluster.users.clone(),
            target,
            band: cluster.band,
            service_height,
            launch_time: 0.0,
            demand_s,
        };
        let (plan, cut) = sortie.plan_within_battery(demand_s)?;
        if cut > 0.0 {
            shortfalls.push((uavs.len(), cut));
        }
        uavs.push(plan);
        traces.push((cluster.uav, trace));
    }

    let mut busy: Vec<bool> = vec![false; s.fleet_size()];
    for p in &uavs {
        busy[p.uav] = true;
    }
    let mut replacements = Vec::new();
    for (slot, remaining) in shortfalls {
        let incumbent = uavs[slot].clone();
        let relief = (0..s.fleet_size())
            .filter(|&k| !busy[k])
            .min_by(|&a, &b| {
                let da = ground_distance(s.homes[a].ground(), incumbent.target);
                let db = ground_distance(s.homes[b].ground(), incumbent.target);
                da.total_cmp(&db)
            })
            .ok_or(PlanError::NoRelief { uav: incumbent.uav })?;
        busy[relief] = true;

        let handover = incumbent.light_end_time();
        let mut sortie = Sortie {
            scenario: s,
            uav: relief,
            role: Role::Relief,
            users: incumbent.users.clone(),
            target: incumbent.target,
            band: incumbent.band,
            service_height: incumbent.service_height,
            launch_time: 0.0,
            demand_s: remaining,
        };
        let probe = sortie.plan(remaining);
        let transfer = probe.cycle.t_off + probe.cycle.t_deploy;
        sortie.launch_time = (handover - transfer - HANDOVER_MARGIN_S).max(0.0);
        let early = (handover - (sortie.launch_time + transfer)).max(0.0);
        let (plan, cut) = sortie.plan_within_battery(early + remaining)?;
        replacements.push(Replacement {
            uav: incumbent.uav,
            relief_uav: relief,
            handover_time: handover,
            relief_launch_time: plan.launch_time,
            unserved_s: cut.min(remaining),
        });
        uavs.push(plan);
    }

    let plan = MissionPlan {
        users: s.users.clone(),
        light_angle_deg: s.light_angle_deg,
        battery_full_pct: s.battery_full_pct,
        kinematics: s.kinematics,
        propulsion: s.propulsion,
        energy_config: s.energy,
        uavs,
        replacements,
    };
    Ok(PlanOutcome { plan, traces })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::lighting_disk;
    use proptest::prelude::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn flight_params_cases() {
        let home = UavPose::default();
        let p = derive_flight_params(&home, (0.0, 3.0), 1.5, 2.2, 10.0);
        assert_eq!((p.rotate_cw, p.forward), (0.0, 3.0));
        assert_close(p.descend_or_climb, -0.7, 1e-12);
        let p = derive_flight_params(&home, (4.0, 0.0), 1.5, 1.5, 10.0);
        assert_eq!((p.rotate_cw, p.forward, p.descend_or_climb), (90.0, 4.0, 0.0));
        let p = derive_flight_params(&UavPose::new(2.0, 2.0, 0.0), (2.0, 2.0), 1.0, 1.0, 0.0);
        assert_eq!((p.rotate_cw, p.forward), (0.0, 0.0));
        assert_eq!(bearing_cw((0.0, 0.0), (0.0, -1.0)), 180.0);
        assert_eq!(bearing_cw((0.0, 0.0), (-1.0, 0.0)), 270.0);
        assert_close(bearing_cw((0.0, 0.0), (-1.0, 1.0)), 315.0, 1e-12);
    }

    #[test]
    fn cycle_without_travel_or_light() {
        let kin = Kinematics::default();
        let params = FlightParams { rotate_cw: 0.0, forward: 0.0, descend_or_climb: 0.0, t_light: 0.0 };
        let (c, segs) = build_cycle(&params, 0.0, 1.4, &kin);
        assert_close(c.t_off, 2.0, 1e-12);
        assert_close(c.t_land, 2.0, 1e-12);
        assert_eq!((c.t_deploy, c.t_light, c.t_back), (0.0, 0.0, 0.0));
        assert!(segs.iter().all(|s| s.validate().is_ok()));
    }

    #[test]
    fn cycle_ten_meter_leg() {
        let kin = Kinematics::default();
        let params = FlightParams { rotate_cw: 30.0, forward: 10.0, descend_or_climb: 0.0, t_light: 5.0 };
        let (c, _) = build_cycle(&params, 0.0, 2.0, &kin);
        assert_close(c.t_deploy, 10.0, 1e-12);
        assert_close(c.t_back, 10.0, 1e-12);
        assert_close(c.total(), c.t_off + 10.0 + 5.0 + 10.0 + c.t_land, 1e-12);
    }

    fn dense_scenario(t_user: f64) -> Scenario {
        let users = (0..5).map(|k| UserRequest::new(3.0 + 0.1 * k as f64, 4.0 - 0.08 * k as f64, 2, t_user).unwrap()).collect();
        Scenario::new(users, vec![UavPose::default(), UavPose::new(1.0, 0.0, 0.0)]).unwrap()
    }

    fn check_plan_invariants(s: &Scenario, plan: &MissionPlan) {
        for p in &plan.uavs {
            let poses = replay(&p.home, &p.segments);
            let end = poses.last().unwrap();
            assert_close(end.x, p.home.x, 1e-9);
            assert_close(end.y, p.home.y, 1e-9);
            assert_close(end.z, p.home.z, 1e-9);
            let hover = poses[3];
            assert_close(hover.x, p.target.0, 1e-9);
            assert_close(hover.y, p.target.1, 1e-9);
            assert_close(hover.z, p.service_height, 1e-9);
            let seg_total: f64 = p.segments.iter().map(|s| s.duration).sum();
            assert_close(seg_total, p.cycle.total(), 1e-9);
            let deploy_planar = p.segments.iter().find(|s| s.phase == Phase::Deploy && s.is_planar()).unwrap();
            assert_close(deploy_planar.dx.hypot(deploy_planar.dy), p.flight_params.forward, 1e-9);
            for seg in &p.segments {
                seg.validate().unwrap();
            }
            let disk = lighting_disk(&UavPose::new(p.target.0, p.target.1, p.service_height), s.light_angle_deg).unwrap();
            for &u in &p.users {
                assert!(disk.covers(s.users[u].x, s.users[u].y));
            }
            assert!(p.service_height >= p.band.h_min - 1e-12 && p.service_height <= p.band.h_max + 1e-12);
        }
        for r in &plan.replacements {
            let relief = plan.sortie(r.relief_uav).unwrap();
            assert!(relief.arrival_time() <= r.handover_time + 1e-9);
            let incumbent = plan.sortie(r.uav).unwrap();
            assert_close(incumbent.light_end_time(), r.handover_time, 1e-9);
        }
    }

    #[test]
    fn dense_short_mission_needs_no_relief() {
        let s = dense_scenario(20.0);
        let plan = plan_mission(&s).unwrap();
        assert_eq!(plan.uavs.len(), 1);
        assert!(plan.replacements.is_empty());
        assert_eq!(plan.uavs[0].cycle.t_light, 20.0);
        assert!(plan.uavs[0].landing_battery_pct > s.energy.reserve_floor_pct);
        check_plan_invariants(&s, &plan);
    }

    #[test]
    fn long_demand_schedules_relief() {
        let s = dense_scenario(600.0);
        // the lamp alone would need 120 % of a full battery
        assert!(600.0 * s.energy.lighting_loss_pct_per_s > 100.0 - s.energy.reserve_floor_pct);
        let plan = plan_mission(&s).unwrap();
        assert_eq!(plan.replacements.len(), 1);
        let r = plan.replacements[0];
        let incumbent = plan.sortie(r.uav).unwrap();
        assert!(incumbent.cycle.t_light < 600.0);
        assert!(incumbent.landing_battery_pct >= s.energy.reserve_floor_pct);
        assert_eq!(r.relief_uav, 1 - r.uav);
        let relief = plan.sortie(r.relief_uav).unwrap();
        assert_eq!(relief.role, Role::Relief);
        assert!(relief.landing_battery_pct >= s.energy.reserve_floor_pct);
        assert!(r.unserved_s > 0.0);
        check_plan_invariants(&s, &plan);
    }

    #[test]
    fn relief_needs_a_free_uav() {
        let mut s = dense_scenario(600.0);
        s.homes.truncate(1);
        assert_eq!(plan_mission(&s), Err(PlanError::NoRelief { uav: 0 }));
    }

    #[test]
    fn sparse_groups_fly_separately() {
        let mut users: Vec<_> = (0..3).map(|k| UserRequest::new(k as f64 * 0.3, 2.0, 1, 15.0).unwrap()).collect();
        users.extend((0..3).map(|k| UserRequest::new(100.0 + k as f64 * 0.3, 2.0, 3, 15.0).unwrap()));
        let homes = vec![UavPose::default(), UavPose::new(98.0, 0.0, 0.0)];
        let s = Scenario::new(users, homes).unwrap();
        let out = plan_mission_with(&s, &AnnealConfig::default()).unwrap();
        assert_eq!(out.plan.uavs.len(), 2);
        assert_eq!(out.traces.len(), 2);
        check_plan_invariants(&s, &out.plan);
    }

    #[test]
    fn plan_json_round_trips() {
        let plan = plan_mission(&dense_scenario(600.0)).unwrap();
        assert_eq!(MissionPlan::from_json(&plan.to_json()).unwrap(), plan);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn generated_plans_replay_home(
            pts in prop::collection::vec((-3.0..3.0f64, -3.0..3.0f64, 1u8..=3, 1.0..200.0f64), 1..6),
            hx in -5.0..5.0f64,
            hy in -5.0..5.0f64,
        ) {
            let users = pts.iter().map(|&(x, y, b, t)| UserRequest::new(x, y, b, t).unwrap()).collect();
            let homes = (0..8).map(|k| UavPose::new(hx + k as f64, hy, 0.0)).collect();
            let s = Scenario::new(users, homes).unwrap();
            let cfg = AnnealConfig { cooling: 0.95, ..AnnealConfig::default() };
            match plan_mission_with(&s, &cfg) {
                Ok(out) => check_plan_invariants(&s, &out.plan),
                Err(PlanError::Placement(PlacementError::FleetExhausted { .. })) | Err(PlanError::NoRelief { .. }) => {}
                Err(e) => prop_assert!(false, "{e}"),
            }
        }
    }
}
