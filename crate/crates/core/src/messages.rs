//! Message types carried on the bus.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::pose_math::{Quat, Vec3};

/// Base topic names; every pipeline instance prefixes them with its namespace.
pub mod topics {
    pub const PHONE_POSE: &str = "phone2act/phone_pose";
    pub const BUTTON: &str = "phone2act/button";
    pub const SESSION: &str = "phone2act/session";
    pub const TARGET_POSE: &str = "phone2act/target_pose";
    pub const GRIPPER_CMD: &str = "phone2act/gripper_cmd";
    pub const ROBOT_FEEDBACK: &str = "phone2act/robot_feedback";
    pub const PLANNER_STATUS: &str = "phone2act/planner_status";
    pub const BRIDGE_HEALTH: &str = "phone2act/bridge_health";
    pub const RECORDER_CONTROL: &str = "phone2act/recorder_control";
    pub const RECORDER_STATUS: &str = "phone2act/recorder_status";

    pub fn camera(name: &str) -> String {
        format!("camera/{name}")
    }
}

/// Phone pose as received from a client.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseSample {
    /// Client milliseconds since session start; informational only.
    pub stamp_ms: f64,
    pub position: Vec3,
    pub orientation: Quat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Button {
    VolumeUp,
    VolumeDown,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ButtonEvent {
    pub button: Button,
    pub stamp_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetPose {
    pub position: Vec3,
    pub orientation: Quat,
    pub stamp_ns: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GripperCommand {
    pub closed: bool,
    pub stamp_ns: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub ee_position: Vec3,
    pub ee_orientation: Quat,
    pub joints: [f64; 6],
    pub gripper_closed: bool,
    /// Sequence number of the last command the controller applied.
    pub command_seq: u64,
    pub stamp_ns: u64,
}

/// One RGB8 camera image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageFrame {
    pub width: u32,
    pub height: u32,
    pub rgb: Arc<[u8]>,
    pub stamp_ns: u64,
}

impl ImageFrame {
    pub fn byte_len(&self) -> usize {
        self.rgb.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HealthStatus {
    Ok,
    Degraded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeHealth {
    pub status: HealthStatus,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionEvent {
    Connected,
    Disconnected,
}

/// Planner state echo, published on every clutch or gripper change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannerStatus {
    pub clutch_engaged: bool,
    pub gripper_closed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecorderControl {
    Start { task: String },
    Stop,
    Discard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecorderStatus {
    pub recording: bool,
    pub frames: u32,
    pub skipped_ticks: u64,
    pub last_error: Option<String>,
}
