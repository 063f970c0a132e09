use serde::Serialize;

use crate::messages::{RobotState, TargetPose};
use crate::pose_math::{quat_to_rpy, rotation_delta, Rpy, Vec3};

pub const OBSERVATION_DIM: usize = 13;
pub const ACTION_DIM: usize = 7;

pub const OBSERVATION_NAMES: [&str; OBSERVATION_DIM] = [
    "joint_1", "joint_2", "joint_3", "joint_4", "joint_5", "joint_6", "ee_x", "ee_y", "ee_z", "ee_roll", "ee_pitch",
    "ee_yaw", "gripper",
];
pub const ACTION_NAMES: [&str; ACTION_DIM] =
    ["delta_x", "delta_y", "delta_z", "delta_roll", "delta_pitch", "delta_yaw", "gripper_target"];

/// Proprioceptive state: 6 joints, end-effector xyz + rpy, gripper (0 open, 1 closed).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObservationVector(pub [f64; OBSERVATION_DIM]);

/// Operator command: Cartesian delta (meters), wrapped rpy delta (radians), gripper target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ActionVector(pub [f64; ACTION_DIM]);

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

impl ObservationVector {
    pub fn from_state(state: &RobotState) -> Self {
        let rpy = quat_to_rpy(&state.ee_orientation).rpy;
        let p = state.ee_position;
        let mut v = [0.0; OBSERVATION_DIM];
        v[..6].copy_from_slice(&state.joints);
        v[6..9].copy_from_slice(&[p.x, p.y, p.z]);
        v[9..12].copy_from_slice(&[rpy.roll, rpy.pitch, rpy.yaw]);
        v[12] = flag(state.gripper_closed);
        Self(v)
    }

    pub fn to_f32(&self) -> [f32; OBSERVATION_DIM] {
        self.0.map(|x| x as f32)
    }
}

impl ActionVector {
    pub fn to_f32(&self) -> [f32; ACTION_DIM] {
        self.0.map(|x| x as f32)
    }
}

/// A pose in the form actions are differenced in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionBasis {
    pub position: Vec3,
    pub rpy: Rpy,
}

impl ActionBasis {
    pub fn from_target(t: &TargetPose) -> Self {
        Self { position: t.position, rpy: quat_to_rpy(&t.orientation).rpy }
    }

    pub fn from_state(s: &RobotState) -> Self {
        Self { position: s.ee_position, rpy: quat_to_rpy(&s.ee_orientation).rpy }
    }
}

/// Delta between consecutive targets, rotation wrapped per component.
pub fn build_action(prev: &ActionBasis, cur: &ActionBasis, gripper_closed: bool) -> ActionVector {
    let dp = cur.position - prev.position;
    let dr = rotation_delta(&prev.rpy, &cur.rpy);
    ActionVector([dp.x, dp.y, dp.z, dr.roll, dr.pitch, dr.yaw, flag(gripper_closed)])
}
