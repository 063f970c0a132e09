//! Simulated 6-DoF arm.
//!
//! The end effector follows its command through a first-order lag with time
//! constant `tau`, capped at `max_cartesian_speed`. Joint values come from a
//! placeholder analytic decomposition: a base yaw joint, a planar two-link
//! shoulder/elbow pair reaching the wrist point, and three wrist joints carrying
//! roll, pitch and the yaw left over after the base rotation. The joints only
//! populate the observation vector; control is entirely Cartesian.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::pose_math::{rotation_delta, rpy_to_quat, wrap_angle, Quat, Rpy, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArmGeometry {
    /// Height of the shoulder joint above the base, meters.
    pub base_height: f64,
    pub upper_arm: f64,
    pub forearm: f64,
}

impl Default for ArmGeometry {
    fn default() -> Self {
        Self { base_height: 0.15, upper_arm: 0.40, forearm: 0.40 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimArmConfig {
    /// First-order smoothing time constant, seconds. Zero means instantaneous.
    pub lag_time_constant: f64,
    /// Delay between a command reaching the controller and it taking effect, seconds.
    pub transport_delay: f64,
    pub max_cartesian_speed: f64,
    pub joint_limits: [[f64; 2]; 6],
    pub feedback_rate: f64,
    pub geometry: ArmGeometry,
    /// Largest internal integration step, seconds.
    pub max_substep: f64,
    pub home_position: Vec3,
    pub home_rpy: Rpy,
}

impl Default for SimArmConfig {
    fn default() -> Self {
        Self {
            lag_time_constant: 0.25,
            transport_delay: 0.02,
            max_cartesian_speed: 0.25,
            joint_limits: [[-PI, PI]; 6],
            feedback_rate: 100.0,
            geometry: ArmGeometry::default(),
            max_substep: 0.001,
            home_position: Vec3::new(0.40, 0.0, 0.25),
            // tool pointing down
            home_rpy: Rpy::new(-PI, 0.0, 0.0),
        }
    }
}

impl SimArmConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.lag_time_constant.is_finite() && self.lag_time_constant >= 0.0) {
            return Err("lag_time_constant must be >= 0".into());
        }
        if !(self.transport_delay.is_finite() && self.transport_delay >= 0.0) {
            return Err("transport_delay must be >= 0".into());
        }
        for (name, v) in [
            ("max_cartesian_speed", self.max_cartesian_speed),
            ("feedback_rate", self.feedback_rate),
            ("max_substep", self.max_substep),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be > 0"));
            }
        }
        if self.joint_limits.iter().any(|[lo, hi]| !(lo < hi)) {
            return Err("joint_limits must have min < max".into());
        }
        let g = self.geometry;
        if !(g.upper_arm > 0.0 && g.forearm > 0.0 && g.base_height.is_finite()) {
            return Err("geometry link lengths must be > 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmPose {
    pub position: Vec3,
    pub rpy: Rpy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimArmState {
    pub pose: ArmPose,
    pub gripper_closed: bool,
}

impl SimArmState {
    pub fn at_home(cfg: &SimArmConfig) -> Self {
        Self {
            pose: ArmPose { position: cfg.home_position, rpy: cfg.home_rpy.wrapped() },
            gripper_closed: false,
        }
    }

    pub fn orientation(&self) -> Quat {
        rpy_to_quat(&self.pose.rpy).unwrap_or(Quat::IDENTITY)
    }
}

/// Advances the arm by `dt` seconds toward `command`.
///
/// The fraction of the remaining gap closed is `1 - exp(-dt / tau)`; the
/// translation is additionally capped at `max_cartesian_speed * dt`.
pub fn sim_step(state: &SimArmState, command: &ArmPose, dt: f64, cfg: &SimArmConfig) -> SimArmState {
    if !(dt > 0.0) {
        return *state;
    }
    let alpha = if cfg.lag_time_constant > 0.0 {
        1.0 - (-dt / cfg.lag_time_constant).exp()
    } else {
        1.0
    };
    let gap = command.position - state.pose.position;
    let mut step = gap * alpha;
    let cap = cfg.max_cartesian_speed * dt;
    let len = step.norm();
    if len > cap {
        step = step * (cap / len);
    }
    let rot_gap = rotation_delta(&state.pose.rpy, &command.rpy);
    let rpy = Rpy::new(
        state.pose.rpy.roll + rot_gap.roll * alpha,
        state.pose.rpy.pitch + rot_gap.pitch * alpha,
        state.pose.rpy.yaw + rot_gap.yaw * alpha,
    )
    .wrapped();
    SimArmState {
        pose: ArmPose { position: state.pose.position + step, rpy },
        gripper_closed: state.gripper_closed,
    }
}

/// Placeholder inverse kinematics described in the module docs, clamped to limits.
pub fn placeholder_joints(geometry: &ArmGeometry, pose: &ArmPose, limits: &[[f64; 2]; 6]) -> [f64; 6] {
    let p = pose.position;
    let (l1, l2) = (geometry.upper_arm, geometry.forearm);
    let base = if p.x == 0.0 && p.y == 0.0 { 0.0 } else { p.y.atan2(p.x) };
    let r = p.x.hypot(p.y);
    let h = p.z - geometry.base_height;
    let reach_min = (l1 - l2).abs() + 1e-9;
    let reach_max = l1 + l2 - 1e-9;
    let d = r.hypot(h).clamp(reach_min, reach_max);
    let cos_elbow = ((d * d - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)).clamp(-1.0, 1.0);
    let elbow = cos_elbow.acos();
    let shoulder = h.atan2(r) - (l2 * elbow.sin()).atan2(l1 + l2 * elbow.cos());
    let wrist_yaw = wrap_angle(pose.rpy.yaw - base).unwrap_or(0.0);
    let raw = [base, shoulder, elbow, pose.rpy.roll, pose.rpy.pitch, wrist_yaw];
    let mut out = [0.0; 6];
    for i in 0..6 {
        out[i] = raw[i].clamp(limits[i][0], limits[i][1]);
    }
    out
}
