//! Starting point for a new hardware bridge.
//!
//! Copy this file, rename [`TemplateBridge`], and fill in the four methods with
//! your robot's API. Everything else (topic names, the depth-1 best-effort
//! command subscription, feedback publication, reconnect with backoff) is
//! handled by [`BridgeNode`](super::BridgeNode) / [`run_bridge`](super::run_bridge):
//!
//! ```no_run
//! use teleop_core::bridge::{run_bridge, template::TemplateBridge};
//! # use teleop_core::{bus::Bus, clock::MonotonicClock, bridge::sim::SimArmConfig};
//! # let bus = Bus::new(std::sync::Arc::new(MonotonicClock::new()));
//! let handle = run_bridge(&bus, "/left", TemplateBridge::default(), SimArmConfig::default()).unwrap();
//! ```
//!
//! The [`SimArmConfig`](super::sim::SimArmConfig) passed to the node supplies the
//! feedback rate and the kinematic geometry used to fill the joint vector; swap
//! in real joint readings by extending `read_state` if your controller reports them.

use super::{BridgeError, RobotBridge, WireCommand, WireState};

#[derive(Debug, Default)]
pub struct TemplateBridge {
    // connection handle to your controller goes here
}

impl RobotBridge for TemplateBridge {
    fn connect(&mut self) -> Result<(), BridgeError> {
        // open the controller connection; disable transmit batching if it is a socket
        Err(BridgeError::Unimplemented("TemplateBridge::connect"))
    }

    fn send_command(&mut self, _cmd: &WireCommand) -> Result<(), BridgeError> {
        // millimeters and RPY degrees; `seq` increases with every command
        Err(BridgeError::Unimplemented("TemplateBridge::send_command"))
    }

    fn read_state(&mut self) -> Result<WireState, BridgeError> {
        // return the measured end-effector pose, not the commanded one
        Err(BridgeError::Unimplemented("TemplateBridge::read_state"))
    }

    fn send_gripper(&mut self, _closed: bool, _seq: u64) -> Result<(), BridgeError> {
        Err(BridgeError::Unimplemented("TemplateBridge::send_gripper"))
    }
}
