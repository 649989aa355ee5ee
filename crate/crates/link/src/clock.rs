//! Mission time. A scale below 1 runs a mission faster than real time;
//! every wait and every timestamp goes through the clock so simulated
//! drones and the engine agree on elapsed mission seconds.

use std::future::Future;
use std::time::Duration;

use tokio::time::Instant;

#[derive(Debug, Clone, Copy)]
pub struct MissionClock {
    start: Instant,
    scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Elapsed;

impl MissionClock {
    /// `scale` is wall seconds per mission second.
    pub fn new(scale: f64) -> Self {
        assert!(scale > 0.0 && scale.is_finite(), "time scale must be positive");
        MissionClock { start: Instant::now(), scale }
    }

    pub fn real_time() -> Self {
        Self::new(1.0)
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn now_s(&self) -> f64 {
        self.start.elapsed().as_secs_f64() / self.scale
    }

    pub fn now_ms(&self) -> u64 {
        (self.now_s() * 1000.0).floor() as u64
    }

    fn wall(&self, mission_s: f64) -> Duration {
        Duration::from_secs_f64((mission_s.max(0.0) * self.scale).min(1e9))
    }

    pub async fn sleep(&self, mission_s: f64) {
        tokio::time::sleep(self.wall(mission_s)).await;
    }

    pub async fn timeout<F: Future>(&self, mission_s: f64, fut: F) -> Result<F::Output, Elapsed> {
        tokio::time::timeout(self.wall(mission_s), fut).await.map_err(|_| Elapsed)
    }
}
