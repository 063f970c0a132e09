//! Launching, scripted operation and measurement of whole pipelines.

mod latency;
mod profile;
mod replay;
mod system;

pub use latency::{expected_crossing_s, measure_latency, LatencyOptions, LatencyReport, LatencyTrial};
pub use profile::{ArmProfile, ClockMode, ControllerEndpoint, LaunchProfile, ProfileError};
pub use replay::{parse_script, pick_and_place_script, replay_operator, ReplayReport, ScriptAction, ScriptError, ScriptEvent};
pub use system::{dataset_root_for, ArmRuntime, Executor, LaunchOptions, System};

#[derive(Debug, thiserror::Error)]
pub enum OrchestratorError {
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("port {addr} unavailable: {reason}")]
    Port { addr: String, reason: String },
    #[error("{0}")]
    Component(String),
    #[error("script line {line}: {reason}")]
    Replay { line: usize, reason: String },
    #[error(transparent)]
    Script(#[from] ScriptError),
    #[error("timed out: {0}")]
    Timeout(String),
    #[error(transparent)]
    Bus(#[from] crate::bus::BusError),
}
