//! Drone link layer: the mission clock, simulated drones and the
//! flight-control engine that drives real or simulated fleets over UDP.

pub mod clock;
pub mod engine;
pub mod mock;

pub use clock::MissionClock;
pub use engine::{fly, Abort, AbortKind, DroneLink, LinkError, LinkState, RetryPolicy, Session};
pub use mock::{run_endpoint, MockConfig, MockDrone};
