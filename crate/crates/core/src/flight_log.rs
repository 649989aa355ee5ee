//! Flight logs: one line per datagram or engine event.
//!
//! `<ms> <drone|-> <SENT|RECV|EVENT> <text> [battery=<n>]`

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Direction {
    Sent,
    Recv,
    Event,
}

impl Direction {
    fn as_str(self) -> &'static str {
        match self {
            Direction::Sent => "SENT",
            Direction::Recv => "RECV",
            Direction::Event => "EVENT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    /// Milliseconds of mission time since the session started.
    pub ms: u64,
    pub drone: Option<u32>,
    pub direction: Direction,
    pub text: String,
    pub battery: Option<u32>,
}

impl fmt::Display for LogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ", self.ms)?;
        match self.drone {
            Some(d) => write!(f, "{d}")?,
            None => f.write_str("-")?,
        }
        write!(f, " {}", self.direction.as_str())?;
        if !self.text.is_empty() {
            write!(f, " {}", self.text)?;
        }
        if let Some(b) = self.battery {
            write!(f, " battery={b}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LogError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("flight log is empty")]
    Empty,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FlightLog {
    pub entries: Vec<LogEntry>,
}

impl FlightLog {
    pub fn push(&mut self, entry: LogEntry) {
        self.entries.push(entry);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        out
    }

    pub fn for_drone(&self, drone: u32) -> impl Iterator<Item = &LogEntry> {
        self.entries.iter().filter(move |e| e.drone == Some(drone))
    }

    /// Drone numbers that appear in the log, ascending.
    pub fn drones(&self) -> Vec<u32> {
        let mut ds: Vec<u32> = self.entries.iter().filter_map(|e| e.drone).collect();
        ds.sort_unstable();
        ds.dedup();
        ds
    }

    /// Commands the drone acknowledged with "ok", in order.
    pub fn acknowledged(&self, drone: u32) -> Vec<String> {
        let mut pending: Option<&str> = None;
        let mut acked = Vec::new();
        for e in self.for_drone(drone) {
            match e.direction {
                Direction::Sent => pending = Some(&e.text),
                Direction::Recv if e.text == "ok" => {
                    if let Some(p) = pending.take() {
                        acked.push(p.to_string());
                    }
                }
                Direction::Recv => pending = pending.filter(|_| e.text != "error"),
                Direction::Event => {}
            }
        }
        acked
    }

    pub fn events(&self) -> impl Iterator<Item = &LogEntry> {
        self.entries.iter().filter(|e| e.direction == Direction::Event)
    }

    /// Last battery reading of a drone.
    pub fn last_battery(&self, drone: u32) -> Option<u32> {
        self.for_drone(drone).filter_map(|e| e.battery).last()
    }

    pub fn is_time_ordered(&self) -> bool {
        self.entries.windows(2).all(|w| w[0].ms <= w[1].ms)
    }
}

impl FromStr for FlightLog {
    type Err = LogError;

    fn from_str(text: &str) -> Result<Self, LogError> {
        let mut log = FlightLog::default();
        for (k, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            log.push(parse_entry(k + 1, line)?);
        }
        if log.entries.is_empty() {
            return Err(LogError::Empty);
        }
        Ok(log)
    }
}

fn parse_entry(line: usize, text: &str) -> Result<LogEntry, LogError> {
    let bad = |msg: String| LogError::Malformed { line, msg };
    let mut parts = text.trim_end().splitn(4, ' ');
    let ms = parts.next().unwrap_or_default();
    let ms: u64 = ms.parse().map_err(|_| bad(format!("bad timestamp {ms:?}")))?;
    let drone = match parts.next() {
        Some("-") => None,
        Some(d) => Some(d.parse().map_err(|_| bad(format!("bad drone {d:?}")))?),
        None => return Err(bad("missing drone field".into())),
    };
    let direction = match parts.next() {
        Some("SENT") => Direction::Sent,
        Some("RECV") => Direction::Recv,
        Some("EVENT") => Direction::Event,
        other => return Err(bad(format!("bad direction {:?}", other.unwrap_or("")))),
    };
    let mut text = parts.next().unwrap_or("").to_string();
    let mut battery = None;
    if let Some(pos) = text.rfind("battery=") {
        let value = &text[pos + "battery=".len()..];
        let trailing = !value.is_empty() && !value.contains(' ');
        if trailing && (pos == 0 || text.as_bytes()[pos - 1] == b' ') {
            battery = Some(value.parse().map_err(|_| bad(format!("bad battery {value:?}")))?);
            text.truncate(pos.saturating_sub(1));
        }
    }
    Ok(LogEntry { ms, drone, direction, text, battery })
}
