use std::collections::BTreeMap;
use std::net::SocketAddr;

use lumen_core::flight_log::{Direction, FlightLog};
use lumen_core::flight_text::parse;
use lumen_core::wire::FaultProfile;
use lumen_link::{fly, run_endpoint, AbortKind, MissionClock, MockConfig, MockDrone, RetryPolicy, Session};

const SCALE: f64 = 0.02;

async fn fleet(clock: MissionClock, faults: &[FaultProfile]) -> Vec<MockDrone> {
    let mut out = Vec::new();
    for (k, f) in faults.iter().enumerate() {
        let mut cfg = MockConfig::new(format!("SN{}", k + 1));
        cfg.faults = f.clone();
        out.push(run_endpoint(cfg, "127.0.0.1:0".parse().unwrap(), clock).await.unwrap());
    }
    out
}

fn addrs(drones: &[MockDrone]) -> Vec<SocketAddr> {
    drones.iter().map(|d| d.addr).collect()
}

const TWO: &str = "\
scan 2
correct_ip
1=SN1,2=SN2
*>battery?
*>takeoff
battery_check 5
1>cw 90
2>cw 270
1>forward 200
2>forward 200
sync 2
1>back 200
2>back 200
*>land
";

const ONE: &str = "\
scan 1
correct_ip
1=SN1
*>battery?
*>takeoff
battery_check 5
1>forward 100
sync 1
1>back 100
1>land
";

fn count(log: &FlightLog, drone: u32, dir: Direction, prefix: &str) -> usize {
    log.for_drone(drone).filter(|e| e.direction == dir && e.text.starts_with(prefix)).count()
}

fn retries(log: &FlightLog) -> usize {
    log.events().filter(|e| e.text.starts_with("retry")).count()
}

fn fault(f: impl FnOnce(&mut FaultProfile)) -> FaultProfile {
    let mut p = FaultProfile::default();
    f(&mut p);
    p
}

#[tokio::test]
async fn happy_path_two_drones() {
    let clock = MissionClock::new(SCALE);
    let drones = fleet(clock, &[FaultProfile::default(), FaultProfile::default()]).await;
    let text = parse(TWO).unwrap();
    let log = fly(&text, &addrs(&drones), &RetryPolicy::default(), clock, 5.0).await.unwrap();
    assert_eq!(retries(&log), 0);
    assert!(log.is_time_ordered());
    for d in [1, 2] {
        assert_eq!(count(&log, d, Direction::Sent, "forward"), 1);
        assert_eq!(count(&log, d, Direction::Sent, "land"), 1);
        assert_eq!(log.acknowledged(d).last().map(String::as_str), Some("land"));
    }
    for d in &drones {
        let s = d.state();
        assert!(!s.airborne && s.pose.z == 0.0);
        assert!(s.pose.x.abs() < 1e-9 && s.pose.y.abs() < 1e-9);
        assert!(s.battery < 100.0);
    }
    // Both forwards leave before either answer arrives.
    let fwd: Vec<_> = log.entries.iter().enumerate().filter(|(_, e)| e.text.starts_with("forward")).map(|(i, _)| i).collect();
    let first_ack = log
        .entries
        .iter()
        .enumerate()
        .position(|(i, e)| i > fwd[0] && e.direction == Direction::Recv && e.text == "ok")
        .unwrap();
    assert!(fwd[1] < first_ack);
}

#[tokio::test]
async fn dropped_forward_answer_costs_one_retry() {
    let clock = MissionClock::new(SCALE);
    let f = fault(|p| p.drop_first = BTreeMap::from([("forward".to_string(), 1)]));
    let drones = fleet(clock, &[f]).await;
    let log = fly(&parse(ONE).unwrap(), &addrs(&drones), &RetryPolicy::default(), clock, 5.0).await.unwrap();
    assert_eq!(retries(&log), 1);
    assert_eq!(count(&log, 1, Direction::Sent, "forward"), 2);
}

#[tokio::test]
async fn two_timeouts_then_ok() {
    let clock = MissionClock::new(SCALE);
    let f = fault(|p| p.drop_first = BTreeMap::from([("takeoff".to_string(), 2)]));
    let drones = fleet(clock, &[f]).await;
    let log = fly(&parse(ONE).unwrap(), &addrs(&drones), &RetryPolicy::default(), clock, 5.0).await.unwrap();
    assert_eq!(log.events().filter(|e| e.text.starts_with("retry takeoff")).count(), 2);
    assert_eq!(retries(&log), 2);
}

#[tokio::test]
async fn slow_motion_answer_is_retried() {
    let clock = MissionClock::new(SCALE);
    let f = fault(|p| p.delay_ms = BTreeMap::from([("forward".to_string(), 8000)]));
    let drones = fleet(clock, &[f]).await;
    let log = fly(&parse(ONE).unwrap(), &addrs(&drones), &RetryPolicy::default(), clock, 5.0).await.unwrap();
    let retry = log.events().find(|e| e.text.starts_with("retry forward")).expect("retry logged");
    let sent = log.entries.iter().find(|e| e.text.starts_with("forward")).unwrap();
    assert!(retry.ms - sent.ms >= 7000);
}

#[tokio::test]
async fn persistent_silence_aborts() {
    let clock = MissionClock::new(SCALE);
    let f = fault(|p| p.drop_first = BTreeMap::from([("forward".to_string(), 99)]));
    let drones = fleet(clock, &[f]).await;
    let abort = fly(&parse(ONE).unwrap(), &addrs(&drones), &RetryPolicy::default(), clock, 5.0).await.unwrap_err();
    assert_eq!(abort.kind, AbortKind::LostDrone);
    assert_eq!(count(&abort.log, 1, Direction::Sent, "forward"), 4);
    assert_eq!(abort.log.events().filter(|e| e.text.starts_with("retry")).count(), 3);
    assert!(abort.log.events().any(|e| e.text.starts_with("lost")));
}

#[tokio::test]
async fn low_battery_forces_landing() {
    let clock = MissionClock::new(SCALE);
    let text = "\
scan 1
correct_ip
1=SN1
*>battery?
*>takeoff
battery_check 5
1>forward 100
1>forward 100
1>cw 90
1>forward 100
1>back 100
1>land
";
    // Drops to 4 % during the first forward.
    let f = fault(|p| p.battery_script = vec![(1000, 4.0)]);
    let drones = fleet(clock, &[f]).await;
    let log = fly(&parse(text).unwrap(), &addrs(&drones), &RetryPolicy::default(), clock, 5.0).await.unwrap();
    let forced = log.events().position(|e| e.text.starts_with("forced_land")).expect("forced landing");
    let forced_ms = log.events().nth(forced).unwrap().ms;
    let later_motion = log
        .for_drone(1)
        .filter(|e| e.direction == Direction::Sent && e.ms > forced_ms)
        .any(|e| ["cw", "forward", "back", "up", "down"].iter().any(|m| e.text.starts_with(m)));
    assert!(!later_motion);
    assert!(!drones[0].state().airborne);
}

#[tokio::test]
async fn discovery_times_out_with_missing_drone() {
    let clock = MissionClock::new(SCALE);
    let drones = fleet(clock, &[FaultProfile::default()]).await;
    let abort = fly(&parse(TWO).unwrap(), &addrs(&drones), &RetryPolicy::default(), clock, 2.0).await.unwrap_err();
    assert_eq!(abort.kind, AbortKind::Discovery);
    assert!(abort.reason.contains("1 of 2"));
}

#[tokio::test]
async fn unknown_sn_aborts_numbering() {
    let clock = MissionClock::new(SCALE);
    let drones = fleet(clock, &[FaultProfile::default()]).await;
    let text = ONE.replace("1=SN1", "1=OTHER");
    let abort = fly(&parse(&text).unwrap(), &addrs(&drones), &RetryPolicy::default(), clock, 2.0).await.unwrap_err();
    assert_eq!(abort.kind, AbortKind::Numbering);
    assert!(abort.reason.contains("OTHER"));
}

#[tokio::test]
async fn discovery_numbers_by_sn() {
    let clock = MissionClock::new(SCALE);
    let drones = fleet(clock, &[FaultProfile::default(), FaultProfile::default()]).await;
    let mut session = Session::bind_for(&addrs(&drones), clock).await.unwrap();
    // Reverse order: numbering must follow SNs, not discovery order.
    let cands: Vec<_> = addrs(&drones).into_iter().rev().collect();
    let links = session.discover(&cands, 2, 2.0, &RetryPolicy::default()).await.unwrap();
    let map = vec![(1, "SN2".to_string()), (2, "SN1".to_string())];
    let links = lumen_link::engine::number_by_sn(links, &map).unwrap();
    assert_eq!(links[0].sn, "SN2");
    assert_eq!(links[0].addr, drones[1].addr);
    assert_eq!(links[1].index, 2);
}

#[tokio::test]
async fn total_loss_is_only_timeouts() {
    let clock = MissionClock::new(SCALE);
    let f = fault(|p| p.drop_prob = 1.0);
    let drones = fleet(clock, &[f]).await;
    let abort = fly(&parse(ONE).unwrap(), &addrs(&drones), &RetryPolicy::default(), clock, 1.0).await.unwrap_err();
    assert_eq!(abort.kind, AbortKind::Discovery);
    assert!(abort.log.entries.iter().all(|e| e.direction != Direction::Recv));
}

#[tokio::test]
async fn log_round_trips() {
    let clock = MissionClock::new(SCALE);
    let drones = fleet(clock, &[FaultProfile::default()]).await;
    let log = fly(&parse(ONE).unwrap(), &addrs(&drones), &RetryPolicy::default(), clock, 2.0).await.unwrap();
    let back: FlightLog = log.render().parse().unwrap();
    assert_eq!(back, log);
}
