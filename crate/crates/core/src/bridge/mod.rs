//! Hardware bridge layer.
//!
//! A bridge owns the link to one arm controller. It forwards only the freshest
//! planner target (depth-1, best-effort subscription), forwards gripper
//! commands, and republishes the controller's state on `robot_feedback` at the
//! configured rate.
//!
//! [`RobotBridge`] is the whole integration surface for new hardware; see
//! [`template`] for a skeleton. The repo ships [`TcpLineBridge`] talking to the
//! [`controller::MockControllerServer`] and [`InProcessBridge`] for tests.

pub mod controller;
mod link;
mod node;
pub mod sim;
pub mod template;
pub mod wire;

use thiserror::Error;

pub use link::{InProcessBridge, StallGate, TcpLineBridge};
pub use node::{run_bridge, BridgeHandle, BridgeNode};
pub use wire::{from_wire_state, to_wire, WireCommand, WireState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BridgeError {
    #[error("connect failed: {0}")]
    Connect(String),
    #[error("not connected")]
    NotConnected,
    #[error("i/o: {0}")]
    Io(String),
    #[error(transparent)]
    Wire(#[from] wire::WireError),
    #[error(transparent)]
    Bus(#[from] crate::bus::BusError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("not implemented: {0}")]
    Unimplemented(&'static str),
}

/// Robot-specific half of a bridge.
///
/// Positions are millimeters and angles RPY degrees, as most industrial
/// controllers expect; the bridge node handles the conversion to and from the
/// bus representation.
pub trait RobotBridge: Send {
    fn connect(&mut self) -> Result<(), BridgeError>;
    fn send_command(&mut self, cmd: &WireCommand) -> Result<(), BridgeError>;
    fn read_state(&mut self) -> Result<WireState, BridgeError>;
    fn send_gripper(&mut self, closed: bool, seq: u64) -> Result<(), BridgeError>;
}

impl<B: RobotBridge + ?Sized> RobotBridge for Box<B> {
    fn connect(&mut self) -> Result<(), BridgeError> {
        (**self).connect()
    }
    fn send_command(&mut self, cmd: &WireCommand) -> Result<(), BridgeError> {
        (**self).send_command(cmd)
    }
    fn read_state(&mut self) -> Result<WireState, BridgeError> {
        (**self).read_state()
    }
    fn send_gripper(&mut self, closed: bool, seq: u64) -> Result<(), BridgeError> {
        (**self).send_gripper(closed, seq)
    }
}
