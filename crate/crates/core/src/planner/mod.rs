//! Robot-agnostic planner: turns raw phone poses and button presses into
//! absolute Cartesian targets.
//!
//! Pipeline for each pose while the clutch is released:
//!
//! 1. `dP = phone - phone_origin`, mapped through the axis map onto the robot
//!    origin captured at the last release.
//! 2. Optional rotation: per-component wrapped RPY delta added to the robot
//!    origin orientation.
//! 3. Zero-jump filter against the last accepted (pre-clamp) candidate, plus a
//!    per-component rotation step limit.
//! 4. Componentwise workspace clamp.
//!
//! The clutch starts engaged and only releases once robot feedback has been
//! seen, so the origin is always a real measured pose.

mod node;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

use crate::messages::{
    Button, ButtonEvent, GripperCommand, PlannerStatus, PoseSample, RobotState, SessionEvent,
    TargetPose,
};
use crate::pose_math::{
    map_phone_delta, quat_to_rpy, rotation_delta, rpy_to_quat, AxisMap, Quat, Rpy, Vec3,
};

pub use node::PlannerNode;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlannerError {
    #[error("workspace axis {axis}: min {min} must be below max {max}")]
    InvalidBounds { axis: char, min: f64, max: f64 },
    #[error("{0} must be positive and finite")]
    InvalidParameter(&'static str),
    #[error(transparent)]
    Bus(#[from] crate::bus::BusError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceBounds {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub z: [f64; 2],
}

impl WorkspaceBounds {
    pub fn new(x: [f64; 2], y: [f64; 2], z: [f64; 2]) -> Result<Self, PlannerError> {
        let b = Self { x, y, z };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), PlannerError> {
        for (axis, [min, max]) in [('x', self.x), ('y', self.y), ('z', self.z)] {
            if !(min.is_finite() && max.is_finite() && min < max) {
                return Err(PlannerError::InvalidBounds { axis, min, max });
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        let inside = |v: f64, [lo, hi]: [f64; 2]| v >= lo && v <= hi;
        inside(p.x, self.x) && inside(p.y, self.y) && inside(p.z, self.z)
    }
}

impl Default for WorkspaceBounds {
    fn default() -> Self {
        Self { x: [0.20, 0.60], y: [-0.30, 0.30], z: [0.05, 0.50] }
    }
}

pub fn clamp_workspace(p: Vec3, b: &WorkspaceBounds) -> Vec3 {
    Vec3::new(p.x.clamp(b.x[0], b.x[1]), p.y.clamp(b.y[0], b.y[1]), p.z.clamp(b.z[0], b.z[1]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterVerdict {
    Accept,
    Drop,
}

/// Accepts `candidate` iff its Euclidean distance from `prev_accepted` is within `threshold`.
pub fn zero_jump_filter(prev_accepted: Vec3, candidate: Vec3, threshold: f64) -> FilterVerdict {
    // NaN distances fall through to Drop
    if prev_accepted.distance(&candidate) <= threshold {
        FilterVerdict::Accept
    } else {
        FilterVerdict::Drop
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub axis_map: AxisMap,
    pub workspace: WorkspaceBounds,
    /// Meters.
    pub jump_threshold: f64,
    pub rotation_enabled: bool,
    /// Radians, per RPY component between consecutive accepted targets.
    pub max_rotation_step: f64,
    pub gripper_debounce_ms: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            axis_map: AxisMap::default(),
            workspace: WorkspaceBounds::default(),
            jump_threshold: 0.060,
            rotation_enabled: true,
            max_rotation_step: 0.35,
            gripper_debounce_ms: 150.0,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlannerError> {
        self.workspace.validate()?;
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.jump_threshold) {
            return Err(PlannerError::InvalidParameter("jump_threshold"));
        }
        if !positive(self.max_rotation_step) {
            return Err(PlannerError::InvalidParameter("max_rotation_step"));
        }
        if !(self.gripper_debounce_ms.is_finite() && self.gripper_debounce_ms >= 0.0) {
            return Err(PlannerError::InvalidParameter("gripper_debounce_ms"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClutchMode {
    /// Output suspended; the operator may move the phone freely.
    Engaged,
    /// Tracking.
    Released,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhoneOrigin {
    pub position: Vec3,
    pub rpy: Rpy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotOrigin {
    pub position: Vec3,
    pub orientation: Quat,
    pub rpy: Rpy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClutchState {
    pub mode: ClutchMode,
    pub phone_origin: Option<PhoneOrigin>,
    pub robot_origin: Option<RobotOrigin>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlannerEffect {
    Target(TargetPose),
    Gripper(GripperCommand),
    Status(PlannerStatus),
    Warning(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PlannerCounters {
    pub emitted: u64,
    pub dropped_jumps: u64,
    pub dropped_rotation_steps: u64,
    pub dropped_non_finite: u64,
    pub suppressed_engaged: u64,
}

#[derive(Debug, Clone)]
pub struct Planner {
    config: PlannerConfig,
    clutch: ClutchState,
    last_pose: Option<PoseSample>,
    latest_feedback: Option<RobotState>,
    last_accepted: Option<(Vec3, Rpy)>,
    gripper_closed: bool,
    last_gripper_toggle_ns: Option<u64>,
    last_stamp_ns: Option<u64>,
    counters: PlannerCounters,
}

impl Planner {
    pub fn new(config: PlannerConfig) -> Result<Self, PlannerError> {
        config.validate()?;
        Ok(Self {
            config,
            clutch: ClutchState { mode: ClutchMode::Engaged, phone_origin: None, robot_origin: None },
            last_pose: None,
            latest_feedback: None,
            last_accepted: None,
            gripper_closed: false,
            last_gripper_toggle_ns: None,
            last_stamp_ns: None,
            counters: PlannerCounters::default(),
        })
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.config
    }

    pub fn clutch(&self) -> &ClutchState {
        &self.clutch
    }

    pub fn is_engaged(&self) -> bool {
        self.clutch.mode == ClutchMode::Engaged
    }

    pub fn gripper_closed(&self) -> bool {
        self.gripper_closed
    }

    pub fn counters(&self) -> PlannerCounters {
        self.counters
    }

    pub fn status(&self) -> PlannerStatus {
        PlannerStatus { clutch_engaged: self.is_engaged(), gripper_closed: self.gripper_closed }
    }

    fn next_stamp(&mut self, now_ns: u64) -> u64 {
        let stamp = match self.last_stamp_ns {
            Some(prev) if now_ns <= prev => prev + 1,
            _ => now_ns,
        };
        self.last_stamp_ns = Some(stamp);
        stamp
    }

    pub fn on_feedback(&mut self, state: &RobotState) {
        self.latest_feedback = Some(state.clone());
    }

    /// `now_ns` is the bus time at which the press arrived.
    pub fn handle_button(&mut self, event: &ButtonEvent, now_ns: u64) -> Vec<PlannerEffect> {
        match event.button {
            Button::VolumeUp => match self.clutch.mode {
                ClutchMode::Released => self.engage(),
                ClutchMode::Engaged => self.release(now_ns),
            },
            Button::VolumeDown => {
                let debounce_ns = (self.config.gripper_debounce_ms * 1e6) as u64;
                if let Some(prev) = self.last_gripper_toggle_ns {
                    if now_ns.saturating_sub(prev) < debounce_ns {
                        return Vec::new();
                    }
                }
                self.last_gripper_toggle_ns = Some(now_ns);
                self.gripper_closed = !self.gripper_closed;
                let stamp = self.next_stamp(now_ns);
                vec![
                    PlannerEffect::Gripper(GripperCommand {
                        closed: self.gripper_closed,
                        stamp_ns: stamp,
                    }),
                    PlannerEffect::Status(self.status()),
                ]
            }
        }
    }

    /// Connect or disconnect of the phone session forces a safe hold.
    pub fn on_session(&mut self, event: SessionEvent) -> Vec<PlannerEffect> {
        let _ = event;
        if self.is_engaged() {
            Vec::new()
        } else {
            self.engage()
        }
    }

    fn engage(&mut self) -> Vec<PlannerEffect> {
        self.clutch.mode = ClutchMode::Engaged;
        vec![PlannerEffect::Status(self.status())]
    }

    fn release(&mut self, now_ns: u64) -> Vec<PlannerEffect> {
        let Some(feedback) = self.latest_feedback.as_ref() else {
            let msg = "clutch release ignored: no robot feedback received yet".to_string();
            warn!("{msg}");
            return vec![PlannerEffect::Warning(msg)];
        };
        let Some(pose) = self.last_pose else {
            let msg = "clutch release ignored: no phone pose received yet".to_string();
            warn!("{msg}");
            return vec![PlannerEffect::Warning(msg)];
        };
        let robot = RobotOrigin {
            position: feedback.ee_position,
            orientation: feedback.ee_orientation,
            rpy: quat_to_rpy(&feedback.ee_orientation).rpy,
        };
        self.clutch = ClutchState {
            mode: ClutchMode::Released,
            phone_origin: Some(PhoneOrigin {
                position: pose.position,
                rpy: quat_to_rpy(&pose.orientation).rpy,
            }),
            robot_origin: Some(robot),
        };
        self.last_accepted = Some((robot.position, robot.rpy));
        // hold target at the captured pose, so tracking resumes without a jump
        let stamp = self.next_stamp(now_ns);
        self.counters.emitted += 1;
        vec![
            PlannerEffect::Target(TargetPose {
                position: clamp_workspace(robot.position, &self.config.workspace),
                orientation: robot.orientation,
                stamp_ns: stamp,
            }),
            PlannerEffect::Status(self.status()),
        ]
    }

    pub fn process_pose(&mut self, sample: &PoseSample, now_ns: u64) -> Option<TargetPose> {
        if !sample.position.is_finite() {
            self.counters.dropped_non_finite += 1;
            return None;
        }
        self.last_pose = Some(*sample);
        if self.is_engaged() {
            self.counters.suppressed_engaged += 1;
            return None;
        }
        let (Some(phone), Some(robot)) = (self.clutch.phone_origin, self.clutch.robot_origin) else {
            return None;
        };

        let delta = sample.position - phone.position;
        let candidate = map_phone_delta(delta, &self.config.axis_map, robot.position);
        if !candidate.is_finite() {
            self.counters.dropped_non_finite += 1;
            return None;
        }

        let (rpy, orientation) = if self.config.rotation_enabled {
            let current = quat_to_rpy(&sample.orientation).rpy;
            let d = rotation_delta(&phone.rpy, &current);
            let rpy = (robot.rpy + d).wrapped();
            match rpy_to_quat(&rpy) {
                Ok(q) => (rpy, q),
                Err(_) => {
                    self.counters.dropped_non_finite += 1;
                    return None;
                }
            }
        } else {
            (robot.rpy, robot.orientation)
        };

        let (prev_pos, prev_rpy) = self.last_accepted.unwrap_or((robot.position, robot.rpy));
        if zero_jump_filter(prev_pos, candidate, self.config.jump_threshold) == FilterVerdict::Drop {
            self.counters.dropped_jumps += 1;
            return None;
        }
        let step = rotation_delta(&prev_rpy, &rpy);
        let max = self.config.max_rotation_step;
        if step.roll.abs() > max || step.pitch.abs() > max || step.yaw.abs() > max {
            self.counters.dropped_rotation_steps += 1;
            return None;
        }

        self.last_accepted = Some((candidate, rpy));
        let stamp = self.next_stamp(now_ns);
        self.counters.emitted += 1;
        Some(TargetPose {
            position: clamp_workspace(candidate, &self.config.workspace),
            orientation,
            stamp_ns: stamp,
        })
    }
}
