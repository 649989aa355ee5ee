//! Planning core for UAV emergency lighting: scenario types, lighting
//! geometry, the propulsion energy model, deployment search, mission
//! planning and the flight-text command language.

pub mod energy;
pub mod flight_log;
pub mod flight_text;
pub mod geometry;
pub mod placement;
pub mod planner;
pub mod report;
pub mod scenario;
pub mod svg;
pub mod wire;
