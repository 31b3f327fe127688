//! Fog orchestration over a simulated multi-tier infrastructure.
//!
//! Deployment requests are validated ([`model`]), admitted or rejected by the
//! [`negotiator`], placed by the [`scheduler`] against a shared
//! [`inventory`], and their traffic is simulated by [`flowsim`]. The
//! [`engine`] ties these into a service with a first-come first-served queue,
//! and [`scenario`] scripts it.

pub mod config;
pub mod engine;
pub mod flowsim;
pub mod inventory;
pub mod model;
pub mod negotiator;
pub mod orchestrator;
pub mod scenario;
pub mod scheduler;
pub mod store;
pub mod topology;

pub use config::EngineConfig;
pub use engine::{Engine, RequestState};
pub use orchestrator::Orchestrator;
pub use scenario::{Scenario, ScenarioRunner};
pub use scheduler::Execution;
pub use topology::Topology;

#[cfg(test)]
mod testutil;
