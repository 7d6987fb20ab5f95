//! Joint placement of an observation UAV and a relay UAV, together with
//! per-user bandwidth shares and transmit powers, maximizing the average
//! logarithmic video-streaming utility of ground users whose uplink
//! suffers Rician fading under a rate-outage constraint.

pub mod channel;
pub mod config;
pub mod convex;
pub mod error;
pub mod experiments;
pub mod orchestrator;
pub mod scenario;
pub mod subproblems;
pub mod utility;

pub use config::SystemConfig;
pub use error::{Error, Result};
pub use scenario::{generate_scenario, Point, Scenario, UavPlacement};
