//! Hardware-agnostic teleoperation pipeline.
//!
//! A phone-like client streams 6-DoF poses over a rosbridge-style WebSocket
//! ([`gateway`]); the [`planner`] turns them into clamped, filtered Cartesian
//! targets; a [`bridge`] forwards the freshest target to a (simulated) arm and
//! publishes its state; the [`recorder`] captures synchronized episodes in a
//! LeRobot-style layout. Everything talks over the in-process [`bus`].

pub mod bridge;
pub mod bus;
pub mod clock;
pub mod gateway;
pub mod messages;
pub mod orchestrator;
pub mod planner;
pub mod pose_math;
pub mod recorder;
