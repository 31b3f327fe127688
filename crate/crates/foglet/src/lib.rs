//! HTTP service and command-line front end for the orchestrator.

pub mod cli;
pub mod http;

pub use http::{router, AppState};
