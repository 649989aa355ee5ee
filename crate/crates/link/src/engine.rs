//! Flight-control engine: discovery, SN numbering, the command pool with
//! retries, concurrent dispatch blocks, sync holds and the battery guard.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use futures::future::join_all;
use lumen_core::flight_log::{Direction, FlightLog, LogEntry};
use lumen_core::flight_text::{Command, FlightText, Target};
use thiserror::Error;
use tokio::net::UdpSocket;
use tokio::sync::mpsc;
use tokio::task::JoinHandle;

use crate::clock::MissionClock;

/// Standard command port of Tello-class drones.
pub const DRONE_PORT: u16 = 8889;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    /// Resends after the first attempt.
    pub max_retries: u32,
    pub motion_timeout_s: f64,
    pub takeoff_land_timeout_s: f64,
    pub query_timeout_s: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_retries: 3, motion_timeout_s: 7.0, takeoff_land_timeout_s: 10.0, query_timeout_s: 3.0 }
    }
}

impl RetryPolicy {
    pub fn timeout_for(&self, command: &str) -> f64 {
        match command.split_whitespace().next().unwrap_or("") {
            "takeoff" | "land" => self.takeoff_land_timeout_s,
            "cw" | "ccw" | "forward" | "back" | "up" | "down" => self.motion_timeout_s,
            _ => self.query_timeout_s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkState {
    Discovered,
    Numbered,
    Airborne,
    Landed,
    Lost,
}

#[derive(Debug)]
pub struct DroneLink {
    /// Number from the SN map; 0 until numbered.
    pub index: u32,
    pub sn: String,
    pub addr: SocketAddr,
    pub last_battery: Option<u32>,
    pub state: LinkState,
    /// Set once a `back` or `land` is acknowledged.
    pub returning: bool,
    pub forced_down: bool,
    rx: mpsc::UnboundedReceiver<String>,
}

impl DroneLink {
    fn log_id(&self) -> Option<u32> {
        (self.index > 0).then_some(self.index)
    }
}

#[derive(Debug, Error)]
pub enum LinkError {
    #[error("found {found} of {wanted} drones before the discovery timeout")]
    DiscoveryTimeout { found: usize, wanted: usize },
    #[error("SN {0} in the flight text was not discovered")]
    UnknownSn(String),
    #[error("discovered drone {0} has no number in the SN map")]
    UnmappedDrone(String),
    #[error("drone {drone} did not acknowledge `{command}` after {attempts} attempts")]
    RetryExhausted { drone: String, command: String, attempts: u32 },
    #[error("response channel closed")]
    Closed,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbortKind {
    Discovery,
    Numbering,
    Preamble,
    LostDrone,
}

#[derive(Debug, Error)]
#[error("mission aborted: {reason}")]
pub struct Abort {
    pub kind: AbortKind,
    pub reason: String,
    pub log: FlightLog,
}

type Routes = Arc<Mutex<HashMap<SocketAddr, mpsc::UnboundedSender<String>>>>;

/// One UDP socket shared by every link. A router task forwards each
/// datagram to the link that owns its source address.
pub struct Session {
    socket: Arc<UdpSocket>,
    clock: MissionClock,
    log: Arc<Mutex<FlightLog>>,
    routes: Routes,
    unrouted: mpsc::UnboundedReceiver<(SocketAddr, String)>,
    router: JoinHandle<()>,
}

impl Drop for Session {
    fn drop(&mut self) {
        self.router.abort();
    }
}

fn accepted(command: &str, response: &str) -> bool {
    match command {
        "battery?" => response.parse::<u32>().is_ok_and(|b| b <= 100),
        "sn?" => !response.is_empty() && response != "error" && response != "ok",
        _ => response == "ok",
    }
}

impl Session {
    pub async fn bind(bind: SocketAddr, clock: MissionClock) -> std::io::Result<Session> {
        let socket = Arc::new(UdpSocket::bind(bind).await?);
        socket.set_broadcast(true)?;
        let routes: Routes = Arc::default();
        let (tx, unrouted) = mpsc::unbounded_channel();
        let router = {
            let socket = socket.clone();
            let routes = routes.clone();
            tokio::spawn(async move {
                let mut buf = [0u8; 2048];
                loop {
                    let Ok((n, from)) = socket.recv_from(&mut buf).await else { continue };
                    let text = String::from_utf8_lossy(&buf[..n]).trim().to_string();
                    let route = routes.lock().expect("routes").get(&from).cloned();
                    match route {
                        Some(link) => {
                            let _ = link.send(text);
                        }
                        None => {
                            let _ = tx.send((from, text));
                        }
                    }
                }
            })
        };
        Ok(Session { socket, clock, log: Arc::default(), routes, unrouted, router })
    }

    /// Binds on loopback when every candidate is local, otherwise on all
    /// interfaces.
    pub async fn bind_for(candidates: &[SocketAddr], clock: MissionClock) -> std::io::Result<Session> {
        let local = candidates.iter().all(|a| a.ip().is_loopback());
        let bind: SocketAddr = if local { "127.0.0.1:0" } else { "0.0.0.0:0" }.parse().expect("literal address");
        Session::bind(bind, clock).await
    }

    pub fn clock(&self) -> MissionClock {
        self.clock
    }

    pub fn log(&self) -> FlightLog {
        self.log.lock().expect("log").clone()
    }

    pub fn record(&self, drone: Option<u32>, direction: Direction, text: impl Into<String>, battery: Option<u32>) {
        let mut log = self.log.lock().expect("log");
        let ms = self.clock.now_ms().max(log.entries.last().map_or(0, |e| e.ms));
        log.push(LogEntry { ms, drone, direction, text: text.into(), battery });
    }

    fn event(&self, drone: Option<u32>, text: impl Into<String>) {
        self.record(drone, Direction::Event, text, None);
    }

    /// Sends "command" to each candidate (a broadcast address works too)
    /// until `n` distinct endpoints answer "ok", then asks each for its SN.
    pub async fn discover(
        &mut self,
        candidates: &[SocketAddr],
        n: usize,
        timeout_s: f64,
        policy: &RetryPolicy,
    ) -> Result<Vec<DroneLink>, LinkError> {
        let deadline = self.clock.now_s() + timeout_s;
        let mut found: Vec<SocketAddr> = Vec::new();
        'outer: while found.len() < n {
            for addr in candidates.iter().filter(|a| !found.contains(a)) {
                self.socket.send_to(b"command", addr).await?;
                self.record(None, Direction::Sent, "command", None);
            }
            let round_end = (self.clock.now_s() + 1.0).min(deadline);
            loop {
                let left = round_end - self.clock.now_s();
                if left <= 0.0 {
                    break;
                }
                match self.clock.timeout(left, self.unrouted.recv()).await {
                    Ok(Some((from, text))) => {
                        self.record(None, Direction::Recv, text.clone(), None);
                        if text == "ok" && !found.contains(&from) {
                            found.push(from);
                            if found.len() == n {
                                break 'outer;
                            }
                        }
                    }
                    Ok(None) => return Err(LinkError::Closed),
                    Err(_) => break,
                }
            }
            if self.clock.now_s() >= deadline {
                break;
            }
        }
        if found.len() < n {
            self.event(None, format!("discovery found {} of {n}", found.len()));
            return Err(LinkError::DiscoveryTimeout { found: found.len(), wanted: n });
        }

        let mut links: Vec<DroneLink> = found
            .into_iter()
            .map(|addr| {
                let (tx, rx) = mpsc::unbounded_channel();
                self.routes.lock().expect("routes").insert(addr, tx);
                DroneLink {
                    index: 0,
                    sn: String::new(),
                    addr,
                    last_battery: None,
                    state: LinkState::Discovered,
                    returning: false,
                    forced_down: false,
                    rx,
                }
            })
            .collect();
        let this = &*self;
        let sns = join_all(links.iter_mut().map(|l| this.send_with_retry(l, "sn?", policy))).await;
        for (link, sn) in links.iter_mut().zip(sns) {
            link.sn = sn?;
            self.event(None, format!("discovered {} at {}", link.sn, link.addr));
        }
        Ok(links)
    }

    async fn transmit(&self, link: &mut DroneLink, command: &str) -> Result<(), LinkError> {
        while let Ok(stale) = link.rx.try_recv() {
            self.record(link.log_id(), Direction::Recv, stale, None);
            self.event(link.log_id(), "stale response discarded");
        }
        self.socket.send_to(command.as_bytes(), link.addr).await?;
        self.record(link.log_id(), Direction::Sent, command, None);
        Ok(())
    }

    /// Waits for the answer to an already transmitted command, resending on
    /// timeouts and bad answers.
    async fn finish(&self, link: &mut DroneLink, command: &str, policy: &RetryPolicy) -> Result<String, LinkError> {
        let attempts = policy.max_retries + 1;
        let timeout = policy.timeout_for(command);
        for attempt in 1..=attempts {
            if attempt > 1 {
                self.transmit(link, command).await?;
            }
            let reason = match self.clock.timeout(timeout, link.rx.recv()).await {
                Ok(Some(resp)) => {
                    let battery = (command == "battery?").then(|| resp.parse::<u32>().ok()).flatten();
                    self.record(link.log_id(), Direction::Recv, resp.clone(), battery);
                    if accepted(command, &resp) {
                        if battery.is_some() {
                            link.last_battery = battery;
                        }
                        return Ok(resp);
                    }
                    "bad response"
                }
                Ok(None) => return Err(LinkError::Closed),
                Err(_) => "timeout",
            };
            if attempt < attempts {
                self.event(link.log_id(), format!("retry {command} attempt {} ({reason})", attempt + 1));
            }
        }
        link.state = LinkState::Lost;
        self.event(link.log_id(), format!("lost: no answer to {command} after {attempts} attempts"));
        Err(LinkError::RetryExhausted { drone: link.sn.clone(), command: command.into(), attempts })
    }

    pub async fn send_with_retry(
        &self,
        link: &mut DroneLink,
        command: &str,
        policy: &RetryPolicy,
    ) -> Result<String, LinkError> {
        self.transmit(link, command).await?;
        self.finish(link, command, policy).await
    }

    /// Runs the flight text against numbered links.
    pub async fn execute(&mut self, text: &FlightText, links: Vec<DroneLink>, policy: &RetryPolicy) -> Result<FlightLog, Abort> {
        let mut run = Run { session: self, links, policy: *policy, threshold: text.battery_threshold(), launched: false };
        let commands = text.preamble.iter().chain(&text.body).filter(|c| {
            !matches!(c, Command::Scan { .. } | Command::CorrectIp | Command::SnMap { .. })
        });
        let mut block: Vec<(u32, Command)> = Vec::new();
        for cmd in commands {
            if let Some(d) = cmd.drone() {
                if block.iter().any(|(b, _)| *b == d) {
                    run.flush(std::mem::take(&mut block)).await?;
                }
                block.push((d, cmd.clone()));
                continue;
            }
            run.flush(std::mem::take(&mut block)).await?;
            match cmd {
                Command::BatteryQuery { target: Target::All } => run.fleet_battery(!run.launched).await?,
                Command::Takeoff { target: Target::All } => {
                    let all = run.links.iter().map(|l| (l.index, Command::Takeoff { target: Target::Drone(l.index) })).collect();
                    run.flush(all).await?;
                }
                Command::Land { target: Target::All } => {
                    let airborne = run
                        .links
                        .iter()
                        .filter(|l| l.state == LinkState::Airborne)
                        .map(|l| (l.index, Command::Land { target: Target::Drone(l.index) }))
                        .collect();
                    run.flush(airborne).await?;
                }
                Command::Sync { millis } => {
                    let secs = *millis as f64 / 1000.0;
                    run.session.event(None, format!("sync {secs}"));
                    run.session.clock.sleep(secs).await;
                    run.guard().await;
                }
                Command::BatteryCheck { pct } => run.threshold = *pct,
                _ => {}
            }
        }
        run.flush(block).await?;
        run.final_readings().await;
        Ok(run.session.log())
    }
}

struct Run<'a> {
    session: &'a Session,
    links: Vec<DroneLink>,
    policy: RetryPolicy,
    threshold: u32,
    launched: bool,
}

impl Run<'_> {
    fn link(&self, drone: u32) -> &DroneLink {
        self.links.iter().find(|l| l.index == drone).expect("indices validated by the parser")
    }

    fn abort(&self, kind: AbortKind, reason: String) -> Abort {
        self.session.event(None, format!("abort: {reason}"));
        Abort { kind, reason, log: self.session.log() }
    }

    /// Queries every reachable drone. Before launch a low or missing
    /// reading stops the mission.
    async fn fleet_battery(&mut self, launch_check: bool) -> Result<(), Abort> {
        let (s, p) = (self.session, self.policy);
        let live = self.links.iter_mut().filter(|l| l.state != LinkState::Lost);
        let results = join_all(live.map(|l| async move {
            let r = s.send_with_retry(l, "battery?", &p).await;
            (l.index, r)
        }))
        .await;
        if !launch_check {
            return Ok(());
        }
        for (drone, r) in results {
            if let Err(e) = r {
                return Err(self.abort(AbortKind::Preamble, format!("drone {drone}: {e}")));
            }
        }
        for l in &self.links {
            let b = l.last_battery.unwrap_or(0);
            if b < self.threshold {
                let reason = format!("drone {} battery {b}% is below the launch threshold {}%", l.index, self.threshold);
                return Err(self.abort(AbortKind::Preamble, reason));
            }
        }
        Ok(())
    }

    fn admit(&mut self, drone: u32, cmd: &Command) -> bool {
        let threshold = self.threshold;
        let s = self.session;
        let l = self.links.iter_mut().find(|l| l.index == drone).expect("indices validated by the parser");
        let wire = cmd.wire_text().unwrap_or_default();
        let skip = |why: &str| {
            s.event(Some(drone), format!("skip {wire} ({why})"));
            false
        };
        if l.state == LinkState::Lost {
            return skip("drone lost");
        }
        match cmd {
            Command::BatteryQuery { .. } => true,
            Command::Takeoff { .. } => {
                if l.state == LinkState::Airborne {
                    return skip("already airborne");
                }
                if l.forced_down {
                    return skip("grounded by battery guard");
                }
                if let Some(b) = l.last_battery.filter(|b| *b < threshold) {
                    l.forced_down = true;
                    return skip(&format!("battery {b}% below {threshold}%"));
                }
                true
            }
            _ if l.state != LinkState::Airborne => skip("not airborne"),
            Command::Move { .. } if l.last_battery.is_some_and(|b| b < threshold) => skip("battery below threshold"),
            _ => true,
        }
    }

    /// Dispatches one block: every datagram goes out before any answer is
    /// awaited.
    async fn flush(&mut self, block: Vec<(u32, Command)>) -> Result<(), Abort> {
        if block.is_empty() {
            return Ok(());
        }
        let mut items: Vec<(u32, String)> = Vec::new();
        for (drone, cmd) in &block {
            if self.admit(*drone, cmd) {
                items.push((*drone, cmd.wire_text().expect("drone command")));
            }
        }
        if items.is_empty() {
            return Ok(());
        }
        let (s, p) = (self.session, self.policy);
        let mut picked: Vec<(&mut DroneLink, String)> = Vec::new();
        for l in self.links.iter_mut() {
            if let Some((_, w)) = items.iter().find(|(d, _)| *d == l.index) {
                picked.push((l, w.clone()));
            }
        }
        let mut sent = Vec::new();
        for (l, w) in picked {
            if let Err(e) = s.transmit(l, &w).await {
                return Err(self.abort(AbortKind::LostDrone, e.to_string()));
            }
            sent.push((l, w));
        }
        let results = join_all(sent.into_iter().map(|(l, w)| async move {
            let r = s.finish(l, &w, &p).await;
            (l.index, w, r)
        }))
        .await;

        let mut lost = Vec::new();
        for (drone, wire, r) in results {
            let verb = wire.split_whitespace().next().unwrap_or("").to_string();
            let l = self.links.iter_mut().find(|l| l.index == drone).expect("drone in block");
            match r {
                Ok(_) => match verb.as_str() {
                    "takeoff" => {
                        l.state = LinkState::Airborne;
                        self.launched = true;
                    }
                    "land" => {
                        l.state = LinkState::Landed;
                        l.returning = true;
                    }
                    "back" => l.returning = true,
                    _ => {}
                },
                Err(e) => lost.push((drone, e)),
            }
        }
        for (drone, e) in lost {
            if !self.link(drone).returning {
                let reason = format!("drone {drone} lost before returning: {e}");
                self.land_all().await;
                return Err(self.abort(AbortKind::LostDrone, reason));
            }
            s.event(Some(drone), "lost after starting its return; mission continues");
        }
        if items.iter().any(|(_, w)| w != "battery?") {
            self.poll().await;
        }
        self.guard().await;
        Ok(())
    }

    /// Battery readings of airborne drones. A failed poll is reported but
    /// does not count against the drone.
    async fn poll(&mut self) {
        let (s, p) = (self.session, self.policy);
        let airborne = self.links.iter_mut().filter(|l| l.state == LinkState::Airborne);
        let results = join_all(airborne.map(|l| async move {
            let before = l.state;
            let r = s.send_with_retry(l, "battery?", &p).await;
            if r.is_err() {
                l.state = before;
                s.event(l.log_id(), "battery poll failed");
            }
        }))
        .await;
        drop(results);
    }

    /// Lands every airborne drone whose last reading is under the threshold.
    async fn guard(&mut self) {
        let (s, p, threshold) = (self.session, self.policy, self.threshold);
        let low = self
            .links
            .iter_mut()
            .filter(|l| l.state == LinkState::Airborne && l.last_battery.is_some_and(|b| b < threshold));
        join_all(low.map(|l| async move {
            let b = l.last_battery.unwrap_or(0);
            s.event(l.log_id(), format!("forced_land battery {b}% below {threshold}%"));
            l.forced_down = true;
            l.returning = true;
            if s.send_with_retry(l, "land", &p).await.is_ok() {
                l.state = LinkState::Landed;
            }
        }))
        .await;
    }

    async fn land_all(&mut self) {
        let (s, p) = (self.session, self.policy);
        let airborne = self.links.iter_mut().filter(|l| l.state == LinkState::Airborne);
        join_all(airborne.map(|l| async move {
            if s.send_with_retry(l, "land", &p).await.is_ok() {
                l.state = LinkState::Landed;
            }
        }))
        .await;
    }

    async fn final_readings(&mut self) {
        let (s, p) = (self.session, self.policy);
        let live = self.links.iter_mut().filter(|l| l.state != LinkState::Lost);
        join_all(live.map(|l| async move {
            let _ = s.send_with_retry(l, "battery?", &p).await;
        }))
        .await;
    }
}

/// Assigns each link the number its SN has in the flight text.
pub fn number_by_sn(mut links: Vec<DroneLink>, sn_map: &[(u32, String)]) -> Result<Vec<DroneLink>, LinkError> {
    for (index, sn) in sn_map {
        let link = links.iter_mut().find(|l| &l.sn == sn).ok_or_else(|| LinkError::UnknownSn(sn.clone()))?;
        link.index = *index;
        link.state = LinkState::Numbered;
    }
    if let Some(l) = links.iter().find(|l| l.state != LinkState::Numbered) {
        return Err(LinkError::UnmappedDrone(l.sn.clone()));
    }
    links.sort_by_key(|l| l.index);
    Ok(links)
}

/// Discovery, numbering and execution in one call.
pub async fn fly(
    text: &FlightText,
    candidates: &[SocketAddr],
    policy: &RetryPolicy,
    clock: MissionClock,
    discovery_timeout_s: f64,
) -> Result<FlightLog, Abort> {
    let mut session = Session::bind_for(candidates, clock).await.map_err(|e| Abort {
        kind: AbortKind::Discovery,
        reason: e.to_string(),
        log: FlightLog::default(),
    })?;
    let n = text.drone_count() as usize;
    session.event(None, format!("scan {n}"));
    let links = match session.discover(candidates, n, discovery_timeout_s, policy).await {
        Ok(l) => l,
        Err(e) => {
            session.event(None, format!("abort: {e}"));
            return Err(Abort { kind: AbortKind::Discovery, reason: e.to_string(), log: session.log() });
        }
    };
    session.event(None, "correct_ip");
    let links = match number_by_sn(links, text.sn_map()) {
        Ok(l) => l,
        Err(e) => {
            session.event(None, format!("abort: {e}"));
            return Err(Abort { kind: AbortKind::Numbering, reason: e.to_string(), log: session.log() });
        }
    };
    for l in &links {
        session.event(Some(l.index), format!("numbered {}", l.sn));
    }
    session.execute(text, links, policy).await
}
