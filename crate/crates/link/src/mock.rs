//! Simulated Tello-class drone speaking the text datagram protocol.
//!
//! Battery drains from the propulsion model: motions at the power of their
//! speed, idle airborne time at hover power, plus the lamp's loss while the
//! drone is deployed (between `forward` and `back`).

use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use lumen_core::energy::{hover_power, propulsion_power, EnergyConfig, PropulsionParams};
use lumen_core::scenario::{Kinematics, UavPose};
use lumen_core::wire::FaultProfile;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tokio::net::UdpSocket;
use tokio::task::JoinHandle;

use crate::clock::MissionClock;

#[derive(Debug, Clone, PartialEq)]
pub struct MockConfig {
    pub sn: String,
    pub initial_battery: f64,
    pub propulsion: PropulsionParams,
    pub energy: EnergyConfig,
    pub kinematics: Kinematics,
    pub faults: FaultProfile,
}

impl MockConfig {
    pub fn new(sn: impl Into<String>) -> Self {
        MockConfig {
            sn: sn.into(),
            initial_battery: 100.0,
            propulsion: PropulsionParams::default(),
            energy: EnergyConfig::default(),
            kinematics: Kinematics::default(),
            faults: FaultProfile::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MockState {
    pub config: MockConfig,
    pub pose: UavPose,
    /// Clockwise from the takeoff heading, degrees.
    pub heading: f64,
    pub battery: f64,
    pub airborne: bool,
    pub deployed: bool,
    idle_from: f64,
    script_next: usize,
}

/// A handled command: the response and how long (mission seconds) the
/// drone takes before sending it.
#[derive(Debug, Clone, PartialEq)]
pub struct Reply {
    pub text: String,
    pub delay_s: f64,
}

impl Reply {
    fn now(text: impl Into<String>) -> Self {
        Reply { text: text.into(), delay_s: 0.0 }
    }
}

impl MockState {
    pub fn new(config: MockConfig) -> Self {
        let battery = config.initial_battery.clamp(0.0, 100.0);
        MockState {
            config,
            pose: UavPose::default(),
            heading: 0.0,
            battery,
            airborne: false,
            deployed: false,
            idle_from: 0.0,
            script_next: 0,
        }
    }

    fn pct(&self, joules: f64) -> f64 {
        self.config.energy.joules_to_pct(joules)
    }

    fn drain(&mut self, pct: f64) {
        self.battery = (self.battery - pct).max(0.0);
    }

    /// Brings the battery up to `now_s`: idle hover (and lamp) drain and any
    /// scripted overrides that have come due.
    pub fn advance(&mut self, now_s: f64) {
        if self.airborne && now_s > self.idle_from {
            let dt = now_s - self.idle_from;
            let mut pct = self.pct(hover_power(&self.config.propulsion) * dt);
            if self.deployed {
                pct += self.config.energy.lighting_loss_pct_per_s * dt;
            }
            self.drain(pct);
        }
        self.idle_from = self.idle_from.max(now_s);
        while let Some(&(t_ms, pct)) = self.config.faults.battery_script.get(self.script_next) {
            if t_ms as f64 / 1000.0 > now_s {
                break;
            }
            self.battery = pct.clamp(0.0, 100.0);
            self.script_next += 1;
        }
        if self.airborne && self.battery <= 0.0 {
            self.touch_down();
        }
    }

    /// Restarts idle accounting, e.g. once a delayed response went out.
    pub fn resume_idle(&mut self, now_s: f64) {
        self.idle_from = now_s;
    }

    fn touch_down(&mut self) {
        self.pose.z = 0.0;
        self.airborne = false;
        self.deployed = false;
    }

    fn fly(&mut self, meters: f64, speed: f64) -> f64 {
        let duration = meters / speed;
        let pct = self.pct(propulsion_power(speed, &self.config.propulsion) * duration);
        self.drain(pct);
        duration
    }

    /// Applies one command received at mission time `now_s`.
    pub fn handle(&mut self, command: &str, now_s: f64) -> Reply {
        self.advance(now_s);
        let tokens: Vec<&str> = command.split_whitespace().collect();
        let kin = self.config.kinematics;
        let reply = match tokens.as_slice() {
            ["command"] => Reply::now("ok"),
            ["sn?"] => Reply::now(self.config.sn.clone()),
            ["battery?"] => Reply::now(format!("{}", self.battery.round() as i64)),
            ["takeoff"] if self.airborne => Reply::now("ok"),
            ["takeoff"] if self.battery <= 0.0 => Reply::now("error"),
            ["takeoff"] => {
                self.airborne = true;
                self.pose.z = kin.takeoff_height;
                let delay_s = self.fly(kin.takeoff_height, kin.vertical_speed);
                Reply { text: "ok".into(), delay_s }
            }
            ["land"] if !self.airborne => Reply::now("ok"),
            ["land"] => {
                let delay_s = self.fly(self.pose.z, kin.vertical_speed);
                self.touch_down();
                Reply { text: "ok".into(), delay_s }
            }
            [verb, arg] => match (self.airborne, arg.parse::<u32>()) {
                (true, Ok(x)) => self.motion(verb, x),
                _ => Reply::now("error"),
            },
            _ => Reply::now("error"),
        };
        self.idle_from = self.idle_from.max(now_s + reply.delay_s);
        if self.airborne && self.battery <= 0.0 {
            self.touch_down();
            return Reply { text: "error".into(), delay_s: reply.delay_s };
        }
        reply
    }

    fn motion(&mut self, verb: &str, x: u32) -> Reply {
        let kin = self.config.kinematics;
        let meters = x as f64 / 100.0;
        let heading = self.heading.to_radians();
        let delay_s = match verb {
            "cw" | "ccw" if (1..=360).contains(&x) => {
                let sign = if verb == "cw" { 1.0 } else { -1.0 };
                self.heading = (self.heading + sign * x as f64).rem_euclid(360.0);
                0.0
            }
            "forward" | "back" if (20..=500).contains(&x) => {
                let sign = if verb == "forward" { 1.0 } else { -1.0 };
                self.pose.x += sign * meters * heading.sin();
                self.pose.y += sign * meters * heading.cos();
                self.deployed = verb == "forward";
                self.fly(meters, kin.horizontal_speed)
            }
            "up" if (20..=500).contains(&x) => {
                self.pose.z += meters;
                self.fly(meters, kin.vertical_speed)
            }
            "down" if (20..=500).contains(&x) && self.pose.z - meters >= 0.0 => {
                self.pose.z -= meters;
                self.fly(meters, kin.vertical_speed)
            }
            _ => return Reply::now("error"),
        };
        Reply { text: "ok".into(), delay_s }
    }
}

/// A running simulated drone.
pub struct MockDrone {
    pub addr: SocketAddr,
    state: Arc<Mutex<MockState>>,
    task: JoinHandle<()>,
}

impl MockDrone {
    pub fn state(&self) -> MockState {
        self.state.lock().expect("mock state").clone()
    }

    pub fn sn(&self) -> String {
        self.state.lock().expect("mock state").config.sn.clone()
    }

    pub fn stop(&self) {
        self.task.abort();
    }
}

impl Drop for MockDrone {
    fn drop(&mut self) {
        self.task.abort();
    }
}

/// Binds `bind` and answers datagrams one at a time, applying the fault
/// profile's delays and drops.
pub async fn run_endpoint(config: MockConfig, bind: SocketAddr, clock: MissionClock) -> std::io::Result<MockDrone> {
    let socket = UdpSocket::bind(bind).await?;
    let addr = socket.local_addr()?;
    let faults = config.faults.clone();
    let state = Arc::new(Mutex::new(MockState::new(config)));
    let shared = state.clone();
    let task = tokio::spawn(async move {
        let mut rng = ChaCha8Rng::seed_from_u64(faults.seed);
        let mut drop_first = faults.drop_first.clone();
        let mut buf = [0u8; 1024];
        loop {
            let Ok((n, peer)) = socket.recv_from(&mut buf).await else { return };
            let command = String::from_utf8_lossy(&buf[..n]).trim().to_string();
            let reply = shared.lock().expect("mock state").handle(&command, clock.now_s());
            let keyword = command.split_whitespace().next().unwrap_or("").to_string();
            let extra = faults.delay_ms.get(&keyword).copied().unwrap_or(0) as f64 / 1000.0;
            clock.sleep(reply.delay_s + extra).await;
            shared.lock().expect("mock state").resume_idle(clock.now_s());
            let scripted_drop = match drop_first.get_mut(&keyword) {
                Some(k) if *k > 0 => {
                    *k -= 1;
                    true
                }
                _ => false,
            };
            let random_drop = faults.drop_prob > 0.0 && rng.random::<f64>() < faults.drop_prob;
            if scripted_drop || random_drop {
                continue;
            }
            let _ = socket.send_to(reply.text.as_bytes(), peer).await;
        }
    });
    Ok(MockDrone { addr, state, task })
}
