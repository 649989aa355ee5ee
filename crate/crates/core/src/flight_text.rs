//! The flight-text command language: compilation from a mission plan,
//! parsing and rendering.
//!
//! A text starts with a fixed preamble (`scan`, `correct_ip`, the SN map,
//! a fleet battery query and takeoff) followed by the body, one command per
//! line. Runs of commands for distinct drones are dispatched together;
//! `sync` waits for outstanding commands and then holds for its argument.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::planner::{MissionPlan, UavPlan};

pub const MIN_MOVE_CM: u32 = 20;
pub const MAX_MOVE_CM: u32 = 500;
pub const DEFAULT_BATTERY_CHECK: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    All,
    Drone(u32),
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::All => f.write_str("*"),
            Target::Drone(i) => write!(f, "{i}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Motion {
    Cw,
    Forward,
    Back,
    Up,
    Down,
}

impl Motion {
    pub fn keyword(self) -> &'static str {
        match self {
            Motion::Cw => "cw",
            Motion::Forward => "forward",
            Motion::Back => "back",
            Motion::Up => "up",
            Motion::Down => "down",
        }
    }

    fn from_keyword(s: &str) -> Option<Motion> {
        Some(match s {
            "cw" => Motion::Cw,
            "forward" => Motion::Forward,
            "back" => Motion::Back,
            "up" => Motion::Up,
            "down" => Motion::Down,
            _ => return None,
        })
    }

    fn range(self) -> (u32, u32) {
        match self {
            Motion::Cw => (1, 360),
            _ => (MIN_MOVE_CM, MAX_MOVE_CM),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "op")]
pub enum Command {
    Scan { n: u32 },
    CorrectIp,
    SnMap { entries: Vec<(u32, String)> },
    BatteryQuery { target: Target },
    Takeoff { target: Target },
    Land { target: Target },
    /// Degrees for `cw`, centimeters otherwise.
    Move { drone: u32, motion: Motion, amount: u32 },
    Sync { millis: u64 },
    BatteryCheck { pct: u32 },
}

impl Command {
    /// The single drone this command addresses, if any.
    pub fn drone(&self) -> Option<u32> {
        match self {
            Command::BatteryQuery { target: Target::Drone(i) }
            | Command::Takeoff { target: Target::Drone(i) }
            | Command::Land { target: Target::Drone(i) }
            | Command::Move { drone: i, .. } => Some(*i),
            _ => None,
        }
    }

    /// The datagram payload sent to a drone for this command.
    pub fn wire_text(&self) -> Option<String> {
        match self {
            Command::BatteryQuery { .. } => Some("battery?".into()),
            Command::Takeoff { .. } => Some("takeoff".into()),
            Command::Land { .. } => Some("land".into()),
            Command::Move { motion, amount, .. } => Some(format!("{} {amount}", motion.keyword())),
            _ => None,
        }
    }
}

fn fmt_seconds(millis: u64) -> String {
    let (s, ms) = (millis / 1000, millis % 1000);
    if ms == 0 {
        return s.to_string();
    }
    let frac = format!("{ms:03}");
    format!("{s}.{}", frac.trim_end_matches('0'))
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Command::Scan { n } => write!(f, "scan {n}"),
            Command::CorrectIp => f.write_str("correct_ip"),
            Command::SnMap { entries } => {
                let parts: Vec<String> = entries.iter().map(|(i, sn)| format!("{i}={sn}")).collect();
                f.write_str(&parts.join(","))
            }
            Command::BatteryQuery { target } => write!(f, "{target}>battery?"),
            Command::Takeoff { target } => write!(f, "{target}>takeoff"),
            Command::Land { target } => write!(f, "{target}>land"),
            Command::Move { drone, motion, amount } => write!(f, "{drone}>{} {amount}", motion.keyword()),
            Command::Sync { millis } => write!(f, "sync {}", fmt_seconds(*millis)),
            Command::BatteryCheck { pct } => write!(f, "battery_check {pct}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightText {
    pub preamble: Vec<Command>,
    pub body: Vec<Command>,
    /// The text as written or parsed.
    pub raw: String,
}

impl FlightText {
    fn from_parts(preamble: Vec<Command>, body: Vec<Command>) -> Self {
        let mut ft = FlightText { preamble, body, raw: String::new() };
        ft.raw = ft.render();
        ft
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in self.preamble.iter().chain(&self.body) {
            out.push_str(&c.to_string());
            out.push('\n');
        }
        out
    }

    pub fn drone_count(&self) -> u32 {
        match self.preamble.first() {
            Some(Command::Scan { n }) => *n,
            _ => 0,
        }
    }

    pub fn sn_map(&self) -> &[(u32, String)] {
        self.preamble
            .iter()
            .find_map(|c| match c {
                Command::SnMap { entries } => Some(entries.as_slice()),
                _ => None,
            })
            .unwrap_or(&[])
    }

    /// The launch battery threshold: the first `battery_check`, else 5 %.
    pub fn battery_threshold(&self) -> u32 {
        self.preamble
            .iter()
            .chain(&self.body)
            .find_map(|c| match c {
                Command::BatteryCheck { pct } => Some(*pct),
                _ => None,
            })
            .unwrap_or(DEFAULT_BATTERY_CHECK)
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FlightTextError {
    #[error("line {line}: syntax error near {token:?}")]
    Syntax { line: usize, token: String },
    #[error("line {line}: {msg}")]
    Range { line: usize, msg: String },
    #[error("line {line}: {msg}")]
    Ordering { line: usize, msg: String },
    #[error("line {line}: drone {index} is not among the {count} scanned")]
    UnknownIndex { line: usize, index: u32, count: u32 },
    #[error("line {line}: {msg}")]
    Invalid { line: usize, msg: String },
    /// No commands at all; `line` is the last line of the text.
    #[error("line {line}: flight text has no commands, expected scan")]
    Empty { line: usize },
}

impl FlightTextError {
    pub fn line(&self) -> usize {
        match self {
            FlightTextError::Syntax { line, .. }
            | FlightTextError::Range { line, .. }
            | FlightTextError::Ordering { line, .. }
            | FlightTextError::UnknownIndex { line, .. }
            | FlightTextError::Invalid { line, .. }
            | FlightTextError::Empty { line } => *line,
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CompileError {
    #[error("plan has {uavs} sorties but {sns} SN codes were given")]
    SnCount { uavs: usize, sns: usize },
    #[error("SN code {0:?} must be non-empty printable ASCII without spaces or any of ,=#>")]
    BadSn(String),
    #[error("SN code {0:?} is listed twice")]
    DuplicateSn(String),
    #[error("plan has no sorties")]
    EmptyPlan,
}

fn valid_sn(sn: &str) -> bool {
    !sn.is_empty() && sn.chars().all(|c| c.is_ascii_graphic() && !matches!(c, ',' | '=' | '#' | '>'))
}

fn parse_u32(line: usize, token: &str) -> Result<u32, FlightTextError> {
    if token.is_empty() || !token.bytes().all(|b| b.is_ascii_digit()) {
        return Err(FlightTextError::Syntax { line, token: token.into() });
    }
    token.parse().map_err(|_| FlightTextError::Range { line, msg: format!("{token} is out of range") })
}

fn parse_seconds(line: usize, token: &str) -> Result<u64, FlightTextError> {
    let syntax = || FlightTextError::Syntax { line, token: token.into() };
    let (whole, frac) = token.split_once('.').unwrap_or((token, ""));
    let digits = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
    if whole.is_empty() || !digits(whole) || !digits(frac) || frac.len() > 3 || token.ends_with('.') {
        return Err(syntax());
    }
    let secs: u64 = whole
        .parse()
        .ok()
        .filter(|s: &u64| *s <= 10_000_000)
        .ok_or_else(|| FlightTextError::Range { line, msg: format!("sync {token} s is too long") })?;
    let ms: u64 = if frac.is_empty() { 0 } else { format!("{frac:0<3}").parse().map_err(|_| syntax())? };
    Ok(secs * 1000 + ms)
}

fn expect_args(line: usize, tokens: &[&str], n: usize) -> Result<(), FlightTextError> {
    if tokens.len() > n {
        return Err(FlightTextError::Syntax { line, token: tokens[n].into() });
    }
    if tokens.len() < n {
        return Err(FlightTextError::Syntax { line, token: tokens.join(" ") });
    }
    Ok(())
}

/// Parses one non-comment line.
pub fn parse_line(line: usize, text: &str) -> Result<Command, FlightTextError> {
    let text = text.trim();
    let syntax = |t: &str| FlightTextError::Syntax { line, token: t.into() };

    if let Some((head, rest)) = text.split_once('>') {
        let target = if head == "*" {
            Target::All
        } else {
            let i = parse_u32(line, head)?;
            if i == 0 {
                return Err(FlightTextError::Range { line, msg: "drone numbers start at 1".into() });
            }
            Target::Drone(i)
        };
        let tokens: Vec<&str> = rest.split_whitespace().collect();
        let Some(&verb) = tokens.first() else { return Err(syntax(text)) };
        return match verb {
            "battery?" => expect_args(line, &tokens, 1).map(|_| Command::BatteryQuery { target }),
            "takeoff" => expect_args(line, &tokens, 1).map(|_| Command::Takeoff { target }),
            "land" => expect_args(line, &tokens, 1).map(|_| Command::Land { target }),
            _ => {
                let motion = Motion::from_keyword(verb).ok_or_else(|| syntax(verb))?;
                let Target::Drone(drone) = target else { return Err(syntax(head)) };
                expect_args(line, &tokens, 2)?;
                let amount = parse_u32(line, tokens[1])?;
                let (lo, hi) = motion.range();
                if !(lo..=hi).contains(&amount) {
                    return Err(FlightTextError::Range {
                        line,
                        msg: format!("{verb} {amount} outside [{lo}, {hi}]"),
                    });
                }
                Ok(Command::Move { drone, motion, amount })
            }
        };
    }

    if text.contains('=') {
        let mut entries = Vec::new();
        for part in text.split(',') {
            let part = part.trim();
            let (i, sn) = part.split_once('=').ok_or_else(|| syntax(part))?;
            let i = parse_u32(line, i.trim())?;
            let sn = sn.trim();
            if !valid_sn(sn) {
                return Err(syntax(sn));
            }
            entries.push((i, sn.to_string()));
        }
        return Ok(Command::SnMap { entries });
    }

    let tokens: Vec<&str> = text.split_whitespace().collect();
    let Some(&verb) = tokens.first() else { return Err(syntax(text)) };
    match verb {
        "scan" => {
            expect_args(line, &tokens, 2)?;
            Ok(Command::Scan { n: parse_u32(line, tokens[1])? })
        }
        v if v.starts_with("scan") && tokens.len() == 1 => Ok(Command::Scan { n: parse_u32(line, &v[4..])? }),
        v if v.eq_ignore_ascii_case("correct_ip") => expect_args(line, &tokens, 1).map(|_| Command::CorrectIp),
        "sync" => {
            expect_args(line, &tokens, 2)?;
            Ok(Command::Sync { millis: parse_seconds(line, tokens[1])? })
        }
        "battery_check" => {
            expect_args(line, &tokens, 2)?;
            let pct = parse_u32(line, tokens[1])?;
            if !(1..=100).contains(&pct) {
                return Err(FlightTextError::Range { line, msg: format!("battery_check {pct} outside [1, 100]") });
            }
            Ok(Command::BatteryCheck { pct })
        }
        _ => Err(syntax(verb)),
    }
}

/// Parses and validates a flight text.
pub fn parse(text: &str) -> Result<FlightText, FlightTextError> {
    let mut cmds = Vec::new();
    for (k, raw_line) in text.lines().enumerate() {
        let l = raw_line.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        cmds.push((k + 1, parse_line(k + 1, l)?));
    }
    let end_line = text.lines().count().max(1);
    if cmds.is_empty() {
        return Err(FlightTextError::Empty { line: end_line });
    }

    let ordering = |line: usize, msg: &str| FlightTextError::Ordering { line, msg: msg.into() };
    let mut it = cmds.into_iter().peekable();
    let mut preamble = Vec::new();
    let next_required = |it: &mut std::iter::Peekable<std::vec::IntoIter<(usize, Command)>>,
                             preamble: &mut Vec<Command>,
                             want: &str,
                             ok: &dyn Fn(&Command) -> bool|
     -> Result<usize, FlightTextError> {
        while let Some((_, Command::BatteryCheck { .. })) = it.peek() {
            preamble.push(it.next().unwrap().1);
        }
        match it.next() {
            Some((line, c)) if ok(&c) => {
                preamble.push(c);
                Ok(line)
            }
            Some((line, c)) => Err(ordering(line, &format!("expected {want}, found `{c}`"))),
            None => Err(ordering(end_line, &format!("text ends before {want}"))),
        }
    };

    let scan_line = next_required(&mut it, &mut preamble, "scan", &|c| matches!(c, Command::Scan { .. }))?;
    let n = match preamble.last() {
        Some(Command::Scan { n }) => *n,
        _ => unreachable!(),
    };
    if n == 0 {
        return Err(FlightTextError::Range { line: scan_line, msg: "scan needs at least one drone".into() });
    }
    next_required(&mut it, &mut preamble, "correct_ip", &|c| matches!(c, Command::CorrectIp))?;
    let sn_line = next_required(&mut it, &mut preamble, "the SN map", &|c| matches!(c, Command::SnMap { .. }))?;
    if let Some(Command::SnMap { entries }) = preamble.last() {
        check_sn_map(sn_line, entries, n)?;
    }
    next_required(&mut it, &mut preamble, "*>battery?", &|c| {
        matches!(c, Command::BatteryQuery { target: Target::All })
    })?;
    let first = next_required(&mut it, &mut preamble, "takeoff", &|c| matches!(c, Command::Takeoff { .. }))?;
    if let Some(Command::Takeoff { target: Target::Drone(i) }) = preamble.last() {
        check_index(first, *i, n)?;
        let mut seen = vec![*i];
        while let Some((line, Command::Takeoff { target })) = it.peek() {
            let line = *line;
            let Target::Drone(i) = *target else {
                return Err(ordering(line, "`*>takeoff` cannot follow per-drone takeoffs"));
            };
            check_index(line, i, n)?;
            if seen.contains(&i) {
                break;
            }
            seen.push(i);
            preamble.push(it.next().unwrap().1);
        }
    }

    let mut body = Vec::new();
    for (line, c) in it {
        match &c {
            Command::Scan { .. } | Command::CorrectIp | Command::SnMap { .. } => {
                return Err(ordering(line, &format!("`{c}` belongs in the preamble")));
            }
            Command::Takeoff { target: Target::All } => {
                return Err(ordering(line, "`*>takeoff` belongs in the preamble"));
            }
            _ => {}
        }
        if let Some(i) = c.drone() {
            check_index(line, i, n)?;
        }
        body.push(c);
    }
    Ok(FlightText { preamble, body, raw: text.to_string() })
}

fn check_index(line: usize, index: u32, count: u32) -> Result<(), FlightTextError> {
    if index > count {
        Err(FlightTextError::UnknownIndex { line, index, count })
    } else {
        Ok(())
    }
}

fn check_sn_map(line: usize, entries: &[(u32, String)], n: u32) -> Result<(), FlightTextError> {
    let mut seen = vec![false; n as usize];
    for (i, sn) in entries {
        check_index(line, *i, n)?;
        if *i == 0 {
            return Err(FlightTextError::Range { line, msg: "drone numbers start at 1".into() });
        }
        if std::mem::replace(&mut seen[*i as usize - 1], true) {
            return Err(FlightTextError::Invalid { line, msg: format!("drone {i} mapped twice") });
        }
        if entries.iter().filter(|(_, other)| other == sn).count() > 1 {
            return Err(FlightTextError::Invalid { line, msg: format!("SN {sn} mapped twice") });
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(FlightTextError::Invalid { line, msg: format!("drone {} has no SN", missing + 1) });
    }
    Ok(())
}

/// Splits `cm` into motion amounts within [20, 500]. Totals under 20 cm
/// cannot be flown and yield no pieces.
pub fn segment_cm(cm: u32) -> Vec<u32> {
    if cm < MIN_MOVE_CM {
        return Vec::new();
    }
    let (q, r) = (cm / MAX_MOVE_CM, cm % MAX_MOVE_CM);
    let mut parts = vec![MAX_MOVE_CM; q as usize];
    if r >= MIN_MOVE_CM {
        parts.push(r);
    } else if r > 0 {
        // rebalance the last full piece with the short remainder
        parts.pop();
        let both = MAX_MOVE_CM + r;
        parts.push(both.div_ceil(2));
        parts.push(both / 2);
    }
    parts
}

pub fn to_cm(meters: f64) -> u32 {
    (meters.abs() * 100.0).round() as u32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Compiled {
    pub text: FlightText,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
enum Step {
    Go(Command, f64),
    Hold(f64),
    NotBefore(f64),
}

struct DroneQueue {
    steps: std::collections::VecDeque<Step>,
    free_at: f64,
}

impl DroneQueue {
    /// Absorbs holds at the head of the queue. Returns true when a command
    /// is next.
    fn settle(&mut self, now: f64) -> bool {
        loop {
            match self.steps.front() {
                Some(Step::Hold(d)) => {
                    self.free_at = self.free_at.max(now) + d;
                    self.steps.pop_front();
                }
                Some(Step::NotBefore(t)) => {
                    self.free_at = self.free_at.max(*t);
                    self.steps.pop_front();
                }
                Some(Step::Go(..)) => return true,
                None => return false,
            }
        }
    }
}

fn vertical_moves(drone: u32, dz: f64, out: &mut Vec<Step>, warnings: &mut Vec<String>, what: &str, v: f64) {
    let cm = to_cm(dz);
    let motion = if dz >= 0.0 { Motion::Up } else { Motion::Down };
    moves(drone, motion, cm, v, out, warnings, what);
}

fn moves(drone: u32, motion: Motion, cm: u32, v: f64, out: &mut Vec<Step>, warnings: &mut Vec<String>, what: &str) {
    if cm > 0 && cm < MIN_MOVE_CM {
        warnings.push(format!("drone {drone}: {what} of {cm} cm is below {MIN_MOVE_CM} cm and was dropped"));
    }
    for amount in segment_cm(cm) {
        out.push(Step::Go(Command::Move { drone, motion, amount }, amount as f64 / 100.0 / v));
    }
}

fn sortie_steps(drone: u32, p: &UavPlan, plan: &MissionPlan, warnings: &mut Vec<String>) -> Vec<Step> {
    let kin = &plan.kinematics;
    let mut steps = Vec::new();
    if p.launch_time > 0.0 {
        steps.push(Step::NotBefore(p.launch_time));
        steps.push(Step::Go(Command::Takeoff { target: Target::Drone(drone) }, kin.takeoff_height / kin.vertical_speed));
    }
    let turn = p.flight_params.rotate_cw.round() as u32 % 360;
    if turn > 0 && to_cm(p.flight_params.forward) >= MIN_MOVE_CM {
        steps.push(Step::Go(Command::Move { drone, motion: Motion::Cw, amount: turn }, 0.0));
    }
    let climb = p.transit_height - p.home.z - kin.takeoff_height;
    vertical_moves(drone, climb, &mut steps, warnings, "climb to transit height", kin.vertical_speed);
    let fwd = to_cm(p.flight_params.forward);
    moves(drone, Motion::Forward, fwd, kin.horizontal_speed, &mut steps, warnings, "forward leg");
    vertical_moves(drone, p.flight_params.descend_or_climb, &mut steps, warnings, "height adjustment", kin.vertical_speed);
    steps.push(Step::Hold(p.flight_params.t_light));
    moves(drone, Motion::Back, fwd, kin.horizontal_speed, &mut steps, warnings, "return leg");
    steps.push(Step::Go(
        Command::Land { target: Target::Drone(drone) },
        (p.service_height - p.home.z).max(0.0) / kin.vertical_speed,
    ));
    steps
}

/// Compiles a plan into flight text. Drone k + 1 flies `plan.uavs[k]` and
/// carries `sn_codes[k]`.
pub fn compile(plan: &MissionPlan, sn_codes: &[String]) -> Result<Compiled, CompileError> {
    if plan.uavs.is_empty() {
        return Err(CompileError::EmptyPlan);
    }
    if sn_codes.len() != plan.uavs.len() {
        return Err(CompileError::SnCount { uavs: plan.uavs.len(), sns: sn_codes.len() });
    }
    for (k, sn) in sn_codes.iter().enumerate() {
        if !valid_sn(sn) {
            return Err(CompileError::BadSn(sn.clone()));
        }
        if sn_codes[..k].contains(sn) {
            return Err(CompileError::DuplicateSn(sn.clone()));
        }
    }
    let n = plan.uavs.len() as u32;
    let mut warnings = Vec::new();

    let mut preamble = vec![
        Command::Scan { n },
        Command::CorrectIp,
        Command::SnMap { entries: sn_codes.iter().enumerate().map(|(k, sn)| (k as u32 + 1, sn.clone())).collect() },
        Command::BatteryQuery { target: Target::All },
    ];
    let immediate: Vec<u32> = (1..=n).filter(|&d| plan.uavs[d as usize - 1].launch_time <= 0.0).collect();
    if immediate.len() == n as usize {
        preamble.push(Command::Takeoff { target: Target::All });
    } else {
        preamble.extend(immediate.iter().map(|&d| Command::Takeoff { target: Target::Drone(d) }));
    }

    let mut queues: Vec<DroneQueue> = plan
        .uavs
        .iter()
        .enumerate()
        .map(|(k, p)| DroneQueue { steps: sortie_steps(k as u32 + 1, p, plan, &mut warnings).into(), free_at: 0.0 })
        .collect();

    let kin = &plan.kinematics;
    let mut now = if immediate.is_empty() { 0.0 } else { kin.takeoff_height / kin.vertical_speed };
    for q in &mut queues {
        q.free_at = now;
    }
    let mut body = vec![Command::BatteryCheck { pct: DEFAULT_BATTERY_CHECK }];
    let mut last_block: Vec<u32> = Vec::new();
    const EPS: f64 = 1e-9;
    loop {
        let mut ready = Vec::new();
        let mut next_free = f64::INFINITY;
        for (k, q) in queues.iter_mut().enumerate() {
            if q.settle(now) {
                if q.free_at <= now + EPS {
                    ready.push(k);
                } else {
                    next_free = next_free.min(q.free_at);
                }
            }
        }
        if !ready.is_empty() {
            let drones: Vec<u32> = ready.iter().map(|&k| k as u32 + 1).collect();
            if !last_block.is_empty() && drones.iter().all(|d| !last_block.contains(d)) {
                body.push(Command::Sync { millis: 0 });
            }
            let mut span: f64 = 0.0;
            for &k in &ready {
                let Some(Step::Go(cmd, d)) = queues[k].steps.pop_front() else { unreachable!() };
                span = span.max(d);
                body.push(cmd);
            }
            now += span;
            for &k in &ready {
                queues[k].free_at = now;
            }
            last_block = drones;
        } else if next_free.is_finite() {
            let millis = ((next_free - now) * 1000.0 - 1e-6).ceil().max(0.0) as u64;
            body.push(Command::Sync { millis });
            now += millis as f64 / 1000.0;
            last_block.clear();
        } else {
            break;
        }
    }

    Ok(Compiled { text: FlightText::from_parts(preamble, body), warnings })
}
