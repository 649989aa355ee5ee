//! Deployment-point search: simulated annealing over the minimax
//! ground distance, an exact minimum-enclosing-circle solver used to check
//! it, and the user partitioning that decides how many UAVs fly.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, ground_distance, GeometryError};
use crate::scenario::{BrightnessBand, Scenario, UserRequest};

#[derive(Debug, Error, PartialEq)]
pub enum PlacementError {
    #[error("cluster has no users")]
    EmptyCluster,
    #[error("covering all users needs at least {needed} UAVs but the fleet has {fleet}")]
    FleetExhausted { needed: usize, fleet: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnealConfig {
    pub t_init: f64,
    pub t_end: f64,
    /// Temperature multiplier applied after each inner loop.
    pub cooling: f64,
    pub inner_iters: usize,
    /// Initial neighbor step in meters; half the users' bounding-box
    /// diagonal when unset.
    pub step_scale: Option<f64>,
    pub rng_seed: u64,
    /// Start from a uniform random point in the search box instead of the
    /// users' centroid.
    pub random_start: bool,
    /// Objective units per meter used in the acceptance test.
    pub objective_unit: f64,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        AnnealConfig {
            t_init: 100.0,
            t_end: 0.01,
            cooling: 0.99,
            inner_iters: 100,
            step_scale: None,
            rng_seed: 0,
            random_start: false,
            objective_unit: 1.0,
        }
    }
}

impl AnnealConfig {
    pub fn with_seed(self, rng_seed: u64) -> Self {
        AnnealConfig { rng_seed, ..self }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.t_end > 0.0 && self.t_end < self.t_init) {
            return Err("need 0 < t_end < t_init".into());
        }
        if !(self.cooling > 0.0 && self.cooling < 1.0) {
            return Err("cooling factor must lie in (0, 1)".into());
        }
        if self.inner_iters == 0 || self.objective_unit.is_nan() || self.objective_unit <= 0.0 {
            return Err("inner_iters and objective_unit must be positive".into());
        }
        Ok(())
    }

    /// Number of temperature levels the schedule visits.
    pub fn outer_steps(&self) -> usize {
        let mut t = self.t_init;
        let mut n = 0;
        while t > self.t_end {
            n += 1;
            t *= self.cooling;
        }
        n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub temperature: f64,
    pub best_f: f64,
    pub current_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealTrace {
    pub entries: Vec<TraceEntry>,
    pub final_point: (f64, f64),
    pub final_f: f64,
}

impl AnnealTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("temperature,best_f,current_f\n");
        for e in &self.entries {
            out.push_str(&format!("{},{},{}\n", e.temperature, e.best_f, e.current_f));
        }
        out
    }
}

/// Maximum ground distance from `candidate` to any user.
pub fn objective(candidate: (f64, f64), users: &[UserRequest]) -> Result<f64, PlacementError> {
    if users.is_empty() {
        return Err(PlacementError::EmptyCluster);
    }
    Ok(max_ground_distance(candidate, users))
}

fn max_ground_distance(c: (f64, f64), users: &[UserRequest]) -> f64 {
    users.iter().map(|u| ground_distance(c, u.ground())).fold(0.0, f64::max)
}

/// Metropolis acceptance: improvements and ties always pass, a worse move
/// passes with probability `exp(-delta_f / temperature)`.
pub fn metropolis_accept(delta_f: f64, temperature: f64, rand_u: f64) -> bool {
    delta_f <= 0.0 || rand_u < (-delta_f / temperature).exp()
}

struct SearchBox {
    min: (f64, f64),
    max: (f64, f64),
}

impl SearchBox {
    fn around(users: &[UserRequest]) -> Self {
        let (mut lo, mut hi) = ((f64::INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::NEG_INFINITY));
        for u in users {
            lo = (lo.0.min(u.x), lo.1.min(u.y));
            hi = (hi.0.max(u.x), hi.1.max(u.y));
        }
        let margin = 0.1 * (hi.0 - lo.0).max(hi.1 - lo.1);
        SearchBox { min: (lo.0 - margin, lo.1 - margin), max: (hi.0 + margin, hi.1 + margin) }
    }

    fn clamp(&self, p: (f64, f64)) -> (f64, f64) {
        (p.0.clamp(self.min.0, self.max.0), p.1.clamp(self.min.1, self.max.1))
    }
}

fn bbox_diagonal(users: &[UserRequest]) -> f64 {
    let b = SearchBox::around(users);
    // undo the 10% margin on both sides
    ground_distance(b.min, b.max) / 1.2
}

fn centroid(users: &[UserRequest]) -> (f64, f64) {
    let n = users.len() as f64;
    let (sx, sy) = users.iter().fold((0.0, 0.0), |acc, u| (acc.0 + u.x, acc.1 + u.y));
    (sx / n, sy / n)
}

/// Searches for the ground point minimizing the distance to the farthest
/// user. Deterministic for a fixed seed.
pub fn anneal(users: &[UserRequest], cfg: &AnnealConfig) -> Result<AnnealTrace, PlacementError> {
    if users.is_empty() {
        return Err(PlacementError::EmptyCluster);
    }
    let bounds = SearchBox::around(users);
    let step = cfg.step_scale.unwrap_or_else(|| 0.5 * bbox_diagonal(users));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);

    let mut current = if cfg.random_start {
        (
            rng.random_range(bounds.min.0..=bounds.max.0),
            rng.random_range(bounds.min.1..=bounds.max.1),
        )
    } else {
        centroid(users)
    };
    let mut current_f = max_ground_distance(current, users);
    let (mut best, mut best_f) = (current, current_f);

    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut entries = Vec::with_capacity(cfg.outer_steps());
    let mut t = cfg.t_init;
    while t > cfg.t_end {
        let sigma = step * (t / cfg.t_init);
        for _ in 0..cfg.inner_iters {
            let proposal = bounds.clamp((
                current.0 + sigma * unit.sample(&mut rng),
                current.1 + sigma * unit.sample(&mut rng),
            ));
            let f = max_ground_distance(proposal, users);
            let u: f64 = rng.random();
            if metropolis_accept((f - current_f) * cfg.objective_unit, t, u) {
                current = proposal;
                current_f = f;
                if f < best_f {
                    best = proposal;
                    best_f = f;
                }
            }
        }
        entries.push(TraceEntry { temperature: t, best_f, current_f });
        t *= cfg.cooling;
    }
    Ok(AnnealTrace { entries, final_point: best, final_f: best_f })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: (f64, f64),
    pub radius: f64,
}

impl Circle {
    fn contains(&self, p: (f64, f64)) -> bool {
        ground_distance(self.center, p) <= self.radius * (1.0 + 1e-12) + 1e-12
    }

    fn from_two(a: (f64, f64), b: (f64, f64)) -> Circle {
        let center = ((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0);
        Circle { center, radius: ground_distance(a, b) / 2.0 }
    }

    fn from_three(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> Circle {
        let (bx, by) = (b.0 - a.0, b.1 - a.1);
        let (cx, cy) = (c.0 - a.0, c.1 - a.1);
        let d = 2.0 * (bx * cy - by * cx);
        if d.abs() < 1e-18 {
            // collinear: the widest pair spans the others
            return [Circle::from_two(a, b), Circle::from_two(a, c), Circle::from_two(b, c)]
                .into_iter()
                .max_by(|x, y| x.radius.total_cmp(&y.radius))
                .unwrap();
        }
        let b2 = bx * bx + by * by;
        let c2 = cx * cx + cy * cy;
        let ux = (cy * b2 - by * c2) / d;
        let uy = (bx * c2 - cx * b2) / d;
        let center = (a.0 + ux, a.1 + uy);
        let radius = [a, b, c].iter().map(|p| ground_distance(center, *p)).fold(0.0, f64::max);
        Circle { center, radius }
    }
}

/// Minimum enclosing circle of the users' ground positions (Welzl's
/// incremental algorithm over a shuffled order, expected linear time).
pub fn exact_one_center(users: &[UserRequest]) -> Result<Circle, PlacementError> {
    if users.is_empty() {
        return Err(PlacementError::EmptyCluster);
    }
    let mut pts: Vec<(f64, f64)> = users.iter().map(|u| u.ground()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for i in (1..pts.len()).rev() {
        pts.swap(i, rng.random_range(0..=i));
    }
    let mut c = Circle { center: pts[0], radius: 0.0 };
    for i in 1..pts.len() {
        if c.contains(pts[i]) {
            continue;
        }
        c = Circle { center: pts[i], radius: 0.0 };
        for j in 0..i {
            if c.contains(pts[j]) {
                continue;
            }
            c = Circle::from_two(pts[i], pts[j]);
            for k in 0..j {
                if !c.contains(pts[k]) {
                    c = Circle::from_three(pts[i], pts[j], pts[k]);
                }
            }
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// Indices into the scenario's user list, ascending.
    pub users: Vec<usize>,
    /// Index of the UAV (into the fleet) that serves the cluster.
    pub uav: usize,
    pub band: BrightnessBand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub clusters: Vec<Cluster>,
}

impl Assignment {
    /// One UAV serves everyone.
    pub fn is_dense(&self) -> bool {
        self.clusters.len() == 1
    }
}

fn pick(users: &[UserRequest], idx: &[usize]) -> Vec<UserRequest> {
    idx.iter().map(|&i| users[i]).collect()
}

/// Groups users into clusters that one UAV can light, then gives each
/// cluster the nearest free UAV.
pub fn partition_users(scenario: &Scenario) -> Result<Assignment, PlacementError> {
    let fleet = scenario.fleet_size();
    let users = &scenario.users;
    let alpha = scenario.light_angle_deg;

    let band_of = |idx: &[usize]| {
        geometry::governing_band(&scenario.bands, &pick(users, idx)).expect("non-empty cluster")
    };
    let feasible = |idx: &[usize]| -> Result<bool, PlacementError> {
        let limit = geometry::max_radius(alpha, &band_of(idx))?;
        Ok(exact_one_center(&pick(users, idx))?.radius <= limit + geometry::COVERAGE_EPS)
    };

    let everyone: Vec<usize> = (0..users.len()).collect();
    let groups = if feasible(&everyone)? {
        vec![everyone]
    } else {
        let mut by_beta: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
        for (i, u) in users.iter().enumerate() {
            by_beta.entry(u.beta.level()).or_default().push(i);
        }
        let mut pending: Vec<Vec<usize>> = by_beta.into_values().collect();
        pending.reverse();
        let mut done = Vec::new();
        while let Some(group) = pending.pop() {
            if done.len() + pending.len() + 1 > fleet {
                return Err(PlacementError::FleetExhausted { needed: done.len() + pending.len() + 1, fleet });
            }
            if feasible(&group)? {
                done.push(group);
            } else {
                let (a, b) = bisect(users, &group);
                pending.push(b);
                pending.push(a);
            }
        }
        done
    };
    if groups.len() > fleet {
        return Err(PlacementError::FleetExhausted { needed: groups.len(), fleet });
    }

    let mut free: Vec<bool> = vec![true; fleet];
    let mut clusters = Vec::with_capacity(groups.len());
    for mut idx in groups {
        idx.sort_unstable();
        let center = exact_one_center(&pick(users, &idx))?.center;
        let uav = (0..fleet)
            .filter(|&k| free[k])
            .min_by(|&a, &b| {
                let da = ground_distance(scenario.homes[a].ground(), center);
                let db = ground_distance(scenario.homes[b].ground(), center);
                da.total_cmp(&db)
            })
            .expect("fleet size checked above");
        free[uav] = false;
        let band = band_of(&idx);
        clusters.push(Cluster { users: idx, uav, band });
    }
    Ok(Assignment { clusters })
}

/// Splits a group in two with a few rounds of 2-means, seeded by a cut
/// through the mean of the coordinate with the larger variance.
fn bisect(users: &[UserRequest], group: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let pts: Vec<(f64, f64)> = group.iter().map(|&i| users[i].ground()).collect();
    let n = pts.len() as f64;
    let mean = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0 / n, a.1 + p.1 / n));
    let var = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + (p.0 - mean.0).powi(2), a.1 + (p.1 - mean.1).powi(2)));
    let along_x = var.0 >= var.1;
    let coord = |p: (f64, f64)| if along_x { p.0 } else { p.1 };

    let mut side: Vec<bool> = pts.iter().map(|&p| coord(p) <= coord(mean)).collect();
    for _ in 0..50 {
        let centroid_of = |flag: bool| {
            let members: Vec<_> = pts.iter().zip(&side).filter(|(_, s)| **s == flag).map(|(p, _)| *p).collect();
            let m = members.len() as f64;
            (m > 0.0).then(|| members.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0 / m, a.1 + p.1 / m)))
        };
        let (Some(ca), Some(cb)) = (centroid_of(true), centroid_of(false)) else { break };
        let next: Vec<bool> = pts.iter().map(|&p| ground_distance(p, ca) <= ground_distance(p, cb)).collect();
        if next == side {
            break;
        }
        side = next;
    }
    if side.iter().all(|s| *s) || side.iter().all(|s| !*s) {
        // degenerate split: fall back to a median cut
        let mut order: Vec<usize> = (0..pts.len()).collect();
        order.sort_by(|&a, &b| coord(pts[a]).total_cmp(&coord(pts[b])));
        side = vec![false; pts.len()];
        for &k in &order[..pts.len() / 2] {
            side[k] = true;
        }
    }
    let a = group.iter().zip(&side).filter(|(_, s)| **s).map(|(i, _)| *i).collect();
    let b = group.iter().zip(&side).filter(|(_, s)| !**s).map(|(i, _)| *i).collect();
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::UavPose;
    use proptest::prelude::*;
    use rand::Rng;

    fn user(x: f64, y: f64) -> UserRequest {
        UserRequest::new(x, y, 2, 60.0).unwrap()
    }

    fn brute_max(c: (f64, f64), users: &[UserRequest]) -> f64 {
        let mut best = 0.0f64;
        for u in users {
            let d = ((c.0 - u.x).powi(2) + (c.1 - u.y).powi(2)).sqrt();
            if d > best {
                best = d;
            }
        }
        best
    }

    /// Exhaustive minimum enclosing circle: the best circle through 2 or 3
    /// of the points that contains all of them.
    fn brute_enclosing(users: &[UserRequest]) -> f64 {
        let p: Vec<(f64, f64)> = users.iter().map(|u| (u.x, u.y)).collect();
        if p.len() == 1 {
            return 0.0;
        }
        let covers = |c: (f64, f64), r: f64| p.iter().all(|q| ((q.0 - c.0).powi(2) + (q.1 - c.1).powi(2)).sqrt() <= r + 1e-9);
        let mut best = f64::INFINITY;
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                let c = ((p[i].0 + p[j].0) / 2.0, (p[i].1 + p[j].1) / 2.0);
                let r = ((p[i].0 - c.0).powi(2) + (p[i].1 - c.1).powi(2)).sqrt();
                if covers(c, r) {
                    best = best.min(r);
                }
                for k in j + 1..p.len() {
                    let (ax, ay, bx, by, cx, cy) = (p[i].0, p[i].1, p[j].0, p[j].1, p[k].0, p[k].1);
                    let d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by));
                    if d.abs() < 1e-12 {
                        continue;
                    }
                    let a2 = ax * ax + ay * ay;
                    let b2 = bx * bx + by * by;
                    let c2 = cx * cx + cy * cy;
                    let ux = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d;
                    let uy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d;
                    let r = ((ax - ux).powi(2) + (ay - uy).powi(2)).sqrt();
                    if covers((ux, uy), r) {
                        best = best.min(r);
                    }
                }
            }
        }
        best
    }

    fn random_users(seed: u64, n: usize, side: f64) -> Vec<UserRequest> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| user(rng.random_range(0.0..side), rng.random_range(0.0..side))).collect()
    }

    #[test]
    fn objective_cases() {
        assert_eq!(objective((3.0, 4.0), &[user(3.0, 4.0)]).unwrap(), 0.0);
        assert_eq!(objective((1.0, 0.0), &[user(0.0, 0.0), user(2.0, 0.0)]).unwrap(), 1.0);
        let users = random_users(7, 8, 10.0);
        assert_eq!(objective((4.0, 6.0), &users).unwrap(), brute_max((4.0, 6.0), &users));
        assert_eq!(objective((0.0, 0.0), &[]), Err(PlacementError::EmptyCluster));
    }

    #[test]
    fn metropolis_cases() {
        assert!(metropolis_accept(-1.0, 5.0, 0.999));
        let t = 3.0;
        let d = t * 2f64.ln();
        assert!(metropolis_accept(d, t, 0.49));
        assert!(!metropolis_accept(d, t, 0.51));
        assert!(metropolis_accept(0.0, t, 0.999_999));
    }

    #[test]
    fn acceptance_rate_follows_boltzmann() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (delta, t) in [(1.0, 1.0), (0.5, 2.0), (3.0, 10.0)] {
            let trials = 100_000;
            let hits = (0..trials).filter(|_| metropolis_accept(delta, t, rng.random())).count();
            let rate = hits as f64 / trials as f64;
            assert!((rate - (-delta / t).exp()).abs() < 0.01, "{rate}");
        }
    }

    #[test]
    fn schedule_has_917_levels() {
        // ceil(ln(0.01 / 100) / ln 0.99)
        let expected = ((0.01f64 / 100.0).ln() / 0.99f64.ln()).ceil() as usize;
        assert_eq!(expected, 917);
        assert_eq!(AnnealConfig::default().outer_steps(), 917);
        let trace = anneal(&[user(1.0, 1.0), user(2.0, 0.5)], &AnnealConfig::default()).unwrap();
        assert_eq!(trace.entries.len(), 917);
        for w in trace.entries.windows(2) {
            assert!((w[1].temperature - w[0].temperature * 0.99).abs() < 1e-12);
            assert!(w[1].best_f <= w[0].best_f);
        }
    }

    #[test]
    fn anneal_single_user() {
        let trace = anneal(&[user(2.5, -1.0)], &AnnealConfig::default()).unwrap();
        assert!(trace.final_f <= 0.05);
        let trace = anneal(&[user(2.5, -1.0)], &AnnealConfig { random_start: true, ..Default::default() }).unwrap();
        assert!(trace.final_f <= 0.05);
    }

    #[test]
    fn anneal_pair_finds_midpoint() {
        let trace = anneal(&[user(0.0, 0.0), user(10.0, 0.0)], &AnnealConfig::default()).unwrap();
        assert!((trace.final_f - 5.0).abs() <= 0.02 * 5.0, "{}", trace.final_f);
    }

    #[test]
    fn anneal_is_deterministic_per_seed() {
        let users = random_users(3, 12, 5.0);
        let cfg = AnnealConfig::default().with_seed(99);
        assert_eq!(anneal(&users, &cfg).unwrap(), anneal(&users, &cfg).unwrap());
    }

    #[test]
    fn anneal_tracks_welzl_on_random_sets() {
        let mut within = 0;
        for seed in 0..100 {
            let users = random_users(1000 + seed, 20, 5.0);
            let exact = exact_one_center(&users).unwrap().radius;
            let trace = anneal(&users, &AnnealConfig::default().with_seed(seed)).unwrap();
            assert!(trace.final_f >= exact - 1e-9);
            if trace.final_f <= exact * 1.02 {
                within += 1;
            }
        }
        assert!(within >= 95, "only {within}/100 within 2%");
    }

    #[test]
    fn one_center_small_cases() {
        let c = exact_one_center(&[user(1.0, 2.0)]).unwrap();
        assert_eq!((c.center, c.radius), ((1.0, 2.0), 0.0));
        let r = 3.0;
        let on_circle: Vec<_> = [0.3f64, 2.1, 4.4].iter().map(|a| user(1.0 + r * a.cos(), -2.0 + r * a.sin())).collect();
        let c = exact_one_center(&on_circle).unwrap();
        assert!((c.radius - r).abs() < 1e-9);
        assert!((c.center.0 - 1.0).abs() < 1e-9 && (c.center.1 + 2.0).abs() < 1e-9);
        let collinear = [user(0.0, 0.0), user(1.0, 0.0), user(4.0, 0.0)];
        assert!((exact_one_center(&collinear).unwrap().radius - 2.0).abs() < 1e-12);
    }

    #[test]
    fn one_center_matches_exhaustive_search() {
        for seed in 0..40 {
            let users = random_users(seed, 2 + (seed as usize % 9), 10.0);
            let c = exact_one_center(&users).unwrap();
            assert!((c.radius - brute_enclosing(&users)).abs() < 1e-9, "seed {seed}");
        }
    }

    proptest! {
        #[test]
        fn one_center_is_tight(pts in prop::collection::vec((-20.0..20.0f64, -20.0..20.0f64), 1..25)) {
            let users: Vec<_> = pts.iter().map(|&(x, y)| user(x, y)).collect();
            let c = exact_one_center(&users).unwrap();
            for u in &users {
                prop_assert!(ground_distance(c.center, u.ground()) <= c.radius + 1e-9);
            }
            // dropping the points on the boundary shrinks the circle
            let inner: Vec<_> = users
                .iter()
                .filter(|u| ground_distance(c.center, u.ground()) < c.radius - 1e-9)
                .copied()
                .collect();
            if !inner.is_empty() {
                prop_assert!(exact_one_center(&inner).unwrap().radius < c.radius);
            }
        }

        #[test]
        fn anneal_never_beats_the_exact_radius(pts in prop::collection::vec((0.0..5.0f64, 0.0..5.0f64), 1..10), seed in 0u64..1000) {
            let users: Vec<_> = pts.iter().map(|&(x, y)| user(x, y)).collect();
            let cfg = AnnealConfig { cooling: 0.9, ..AnnealConfig::default().with_seed(seed) };
            let trace = anneal(&users, &cfg).unwrap();
            prop_assert!(trace.final_f >= exact_one_center(&users).unwrap().radius - 1e-9);
        }

        #[test]
        fn metropolis_monotone_in_u(delta in 0.0..10.0f64, t in 0.01..100.0f64, u in 0.0..1.0f64, du in 0.0..1.0f64) {
            if !metropolis_accept(delta, t, u) {
                prop_assert!(!metropolis_accept(delta, t, (u + du).min(0.999_999_999)));
            }
        }
    }

    fn scenario(users: Vec<UserRequest>, fleet: usize) -> Scenario {
        let homes = (0..fleet).map(|k| UavPose::new(k as f64 * 50.0, -2.0, 0.0)).collect();
        Scenario::new(users, homes).unwrap()
    }

    #[test]
    fn dense_cluster_gets_one_uav() {
        let users: Vec<_> = (0..5).map(|k| user(10.0 + 0.1 * k as f64, 5.0 + 0.05 * k as f64)).collect();
        let a = partition_users(&scenario(users, 3)).unwrap();
        assert!(a.is_dense());
        assert_eq!(a.clusters[0].users, vec![0, 1, 2, 3, 4]);
        assert_eq!(a.clusters[0].band.beta.level(), 2);
    }

    #[test]
    fn brightness_groups_split_first() {
        let mut users: Vec<_> = (0..3).map(|k| UserRequest::new(k as f64 * 0.2, 0.0, 1, 30.0).unwrap()).collect();
        users.extend((0..3).map(|k| UserRequest::new(100.0 + k as f64 * 0.2, 0.0, 3, 30.0).unwrap()));
        let a = partition_users(&scenario(users, 2)).unwrap();
        assert_eq!(a.clusters.len(), 2);
        assert_eq!(a.clusters[0].users, vec![0, 1, 2]);
        assert_eq!(a.clusters[1].users, vec![3, 4, 5]);
        // nearest homes: (0,-2) for the first group, (50,-2) for the second
        assert_eq!((a.clusters[0].uav, a.clusters[1].uav), (0, 1));
        assert_eq!(a.clusters[1].band.beta.level(), 3);
    }

    #[test]
    fn only_uav_takes_the_only_cluster() {
        let a = partition_users(&scenario(vec![user(1.0, 1.0), user(1.2, 1.1)], 1)).unwrap();
        assert_eq!(a.clusters.len(), 1);
        assert_eq!(a.clusters[0].uav, 0);
    }

    #[test]
    fn spread_users_need_more_uavs() {
        // beta 2 reaches 2.2 * tan 30 = 1.27 m; four corners of a 6 m square
        let users = vec![user(0.0, 0.0), user(6.0, 0.0), user(0.0, 6.0), user(6.0, 6.0)];
        assert_eq!(
            partition_users(&scenario(users.clone(), 2)),
            Err(PlacementError::FleetExhausted { needed: 3, fleet: 2 })
        );
        let a = partition_users(&scenario(users, 4)).unwrap();
        assert_eq!(a.clusters.len(), 4);
    }

    proptest! {
        #[test]
        fn assignment_partitions_users(pts in prop::collection::vec((0.0..30.0f64, 0.0..30.0f64, 1u8..=3), 1..30)) {
            let users: Vec<_> = pts.iter().map(|&(x, y, b)| UserRequest::new(x, y, b, 10.0).unwrap()).collect();
            let s = scenario(users.clone(), 40);
            let a = partition_users(&s).unwrap();
            let mut seen: Vec<usize> = a.clusters.iter().flat_map(|c| c.users.iter().copied()).collect();
            seen.sort_unstable();
            prop_assert_eq!(seen, (0..users.len()).collect::<Vec<_>>());
            let mut uavs: Vec<usize> = a.clusters.iter().map(|c| c.uav).collect();
            uavs.sort_unstable();
            uavs.dedup();
            prop_assert_eq!(uavs.len(), a.clusters.len());
            for c in &a.clusters {
                let r = exact_one_center(&pick(&users, &c.users)).unwrap().radius;
                prop_assert!(r <= geometry::max_radius(30.0, &c.band).unwrap() + 1e-9);
            }
        }
    }
}
