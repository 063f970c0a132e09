//! Line protocol spoken with the (mock) controller, and unit translation.
//!
//! Newline-delimited ASCII, numbers printed in Rust's shortest round-trip
//! float format:
//!
//! ```text
//! bridge -> controller   MOVL x,y,z,rx,ry,rz,seq      millimeters, degrees
//! bridge -> controller   GRIP closed,seq              closed is 0 or 1
//! bridge -> controller   GETSTATE
//! controller -> bridge   STATE x,y,z,rx,ry,rz,grip,seq
//! controller -> bridge   ERR message
//! ```
//!
//! `MOVL` and `GRIP` are fire-and-forget; only `GETSTATE` gets a reply. The
//! `seq` in a `STATE` reply is the last `MOVL` sequence the controller applied.

use thiserror::Error;
use tracing::warn;

use super::sim::{placeholder_joints, ArmPose, SimArmConfig};
use crate::messages::{RobotState, TargetPose};
use crate::pose_math::{quat_to_rpy, rpy_to_quat, Rpy, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WireError {
    #[error("malformed line {line:?}: {reason}")]
    Malformed { line: String, reason: String },
    #[error("non-finite field in {0:?}")]
    NonFinite(String),
}

/// Cartesian command in controller units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WireCommand {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub rx: f64,
    pub ry: f64,
    pub rz: f64,
    pub seq: u64,
}

/// State report in controller units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WireState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub rx: f64,
    pub ry: f64,
    pub rz: f64,
    pub grip: bool,
    pub seq: u64,
}

impl WireCommand {
    pub fn is_finite(&self) -> bool {
        [self.x, self.y, self.z, self.rx, self.ry, self.rz].iter().all(|v| v.is_finite())
    }

    pub fn to_line(&self) -> String {
        format!(
            "MOVL {},{},{},{},{},{},{}\n",
            self.x, self.y, self.z, self.rx, self.ry, self.rz, self.seq
        )
    }
}

impl WireState {
    pub fn to_line(&self) -> String {
        format!(
            "STATE {},{},{},{},{},{},{},{}\n",
            self.x,
            self.y,
            self.z,
            self.rx,
            self.ry,
            self.rz,
            u8::from(self.grip),
            self.seq
        )
    }
}

/// A parsed line in either direction.
#[derive(Debug, Clone, PartialEq)]
pub enum WireLine {
    Move(WireCommand),
    Grip { closed: bool, seq: u64 },
    GetState,
    State(WireState),
    Err(String),
}

fn malformed(line: &str, reason: impl Into<String>) -> WireError {
    WireError::Malformed { line: line.to_string(), reason: reason.into() }
}

fn fields<'a>(line: &'a str, rest: &'a str, n: usize) -> Result<Vec<&'a str>, WireError> {
    let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
    if parts.len() != n {
        return Err(malformed(line, format!("expected {n} fields, got {}", parts.len())));
    }
    Ok(parts)
}

fn num(line: &str, s: &str) -> Result<f64, WireError> {
    let v: f64 = s.parse().map_err(|_| malformed(line, format!("bad number {s:?}")))?;
    if !v.is_finite() {
        return Err(WireError::NonFinite(line.to_string()));
    }
    Ok(v)
}

fn int(line: &str, s: &str) -> Result<u64, WireError> {
    s.parse().map_err(|_| malformed(line, format!("bad integer {s:?}")))
}

fn flag(line: &str, s: &str) -> Result<bool, WireError> {
    match s {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(malformed(line, format!("bad flag {s:?}"))),
    }
}

impl WireLine {
    pub fn parse(raw: &str) -> Result<WireLine, WireError> {
        let line = raw.trim_end_matches(['\n', '\r']);
        let (head, rest) = line.split_once(' ').unwrap_or((line, ""));
        match head {
            "MOVL" => {
                let f = fields(line, rest, 7)?;
                Ok(WireLine::Move(WireCommand {
                    x: num(line, f[0])?,
                    y: num(line, f[1])?,
                    z: num(line, f[2])?,
                    rx: num(line, f[3])?,
                    ry: num(line, f[4])?,
                    rz: num(line, f[5])?,
                    seq: int(line, f[6])?,
                }))
            }
            "GRIP" => {
                let f = fields(line, rest, 2)?;
                Ok(WireLine::Grip { closed: flag(line, f[0])?, seq: int(line, f[1])? })
            }
            "GETSTATE" if rest.is_empty() => Ok(WireLine::GetState),
            "STATE" => {
                let f = fields(line, rest, 8)?;
                Ok(WireLine::State(WireState {
                    x: num(line, f[0])?,
                    y: num(line, f[1])?,
                    z: num(line, f[2])?,
                    rx: num(line, f[3])?,
                    ry: num(line, f[4])?,
                    rz: num(line, f[5])?,
                    grip: flag(line, f[6])?,
                    seq: int(line, f[7])?,
                }))
            }
            "ERR" => Ok(WireLine::Err(rest.to_string())),
            _ => Err(malformed(line, "unknown command")),
        }
    }
}

pub fn grip_line(closed: bool, seq: u64) -> String {
    format!("GRIP {},{}\n", u8::from(closed), seq)
}

pub const GET_STATE_LINE: &str = "GETSTATE\n";

/// Meters and quaternion to millimeters and RPY degrees.
pub fn to_wire(target: &TargetPose, seq: u64) -> WireCommand {
    let conv = quat_to_rpy(&target.orientation);
    if conv.gimbal_lock {
        warn!(seq, "target orientation at gimbal lock; yaw folded into roll");
    }
    let r = conv.rpy;
    WireCommand {
        x: target.position.x * 1000.0,
        y: target.position.y * 1000.0,
        z: target.position.z * 1000.0,
        rx: r.roll.to_degrees(),
        ry: r.pitch.to_degrees(),
        rz: r.yaw.to_degrees(),
        seq,
    }
}

/// Millimeters and RPY degrees back to meters and quaternion.
pub fn wire_pose(x: f64, y: f64, z: f64, rx: f64, ry: f64, rz: f64) -> Result<ArmPose, WireError> {
    if ![x, y, z, rx, ry, rz].iter().all(|v| v.is_finite()) {
        return Err(WireError::NonFinite(format!("{x},{y},{z},{rx},{ry},{rz}")));
    }
    Ok(ArmPose {
        position: Vec3::new(x / 1000.0, y / 1000.0, z / 1000.0),
        rpy: Rpy::new(rx.to_radians(), ry.to_radians(), rz.to_radians()).wrapped(),
    })
}

/// Normalizes a controller state report; joints come from the placeholder kinematics.
pub fn from_wire_state(
    raw: &WireState,
    sim: &SimArmConfig,
    stamp_ns: u64,
) -> Result<RobotState, WireError> {
    let pose = wire_pose(raw.x, raw.y, raw.z, raw.rx, raw.ry, raw.rz)?;
    let q = rpy_to_quat(&pose.rpy).map_err(|_| WireError::NonFinite(raw.to_line()))?;
    Ok(RobotState {
        ee_position: pose.position,
        ee_orientation: q,
        joints: placeholder_joints(&sim.geometry, &pose, &sim.joint_limits),
        gripper_closed: raw.grip,
        command_seq: raw.seq,
        stamp_ns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose_math::{Quat, Vec3};
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn target(p: Vec3, q: Quat) -> TargetPose {
        TargetPose { position: p, orientation: q, stamp_ns: 0 }
    }

    #[test]
    fn to_wire_examples() {
        let c = to_wire(&target(Vec3::new(0.5, 0.0, 0.0), Quat::IDENTITY), 1);
        assert_eq!((c.x, c.y, c.z, c.rx, c.ry, c.rz), (500.0, 0.0, 0.0, 0.0, 0.0, 0.0));
        assert_eq!(c.to_line(), "MOVL 500,0,0,0,0,0,1\n");
        let c = to_wire(&target(Vec3::new(0.1234, 0.0, 0.0), Quat::IDENTITY), 2);
        assert!((c.x - 123.4).abs() < 1e-9);
        let yaw90 = Quat::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), FRAC_PI_2).unwrap();
        let c = to_wire(&target(Vec3::ZERO, yaw90), 3);
        assert!((c.rz - 90.0).abs() < 1e-9);
    }

    #[test]
    fn gimbal_locked_target_still_converts() {
        let q = rpy_to_quat(&Rpy::new(0.2, FRAC_PI_2, 0.0)).unwrap();
        let c = to_wire(&target(Vec3::ZERO, q), 4);
        assert!(c.is_finite());
        assert!((c.ry - 90.0).abs() < 1e-6);
    }

    #[test]
    fn from_wire_examples() {
        let sim = SimArmConfig::default();
        let raw = WireState { x: 500.0, y: 0.0, z: 0.0, rx: 0.0, ry: 0.0, rz: 0.0, grip: false, seq: 7 };
        let s = from_wire_state(&raw, &sim, 11).unwrap();
        assert_eq!(s.ee_position, Vec3::new(0.5, 0.0, 0.0));
        assert_eq!(s.ee_orientation, Quat::IDENTITY);
        assert_eq!((s.command_seq, s.stamp_ns), (7, 11));

        let raw = WireState { rz: 180.0, x: 0.0, ..raw };
        let s = from_wire_state(&raw, &sim, 0).unwrap();
        let q = s.ee_orientation;
        assert!(q.w().abs() < 1e-12 && (q.z() - 1.0).abs() < 1e-12);
        assert_eq!((q.x(), q.y()), (0.0, 0.0));
    }

    #[test]
    fn golden_lines() {
        let s = WireState { x: 400.5, y: -12.0, z: 250.0, rx: -180.0, ry: 0.0, rz: 12.25, grip: true, seq: 42 };
        assert_eq!(s.to_line(), "STATE 400.5,-12,250,-180,0,12.25,1,42\n");
        assert_eq!(WireLine::parse(&s.to_line()).unwrap(), WireLine::State(s));
        assert_eq!(grip_line(true, 3), "GRIP 1,3\n");
        assert_eq!(WireLine::parse("GRIP 0,9\n").unwrap(), WireLine::Grip { closed: false, seq: 9 });
        assert_eq!(WireLine::parse(GET_STATE_LINE).unwrap(), WireLine::GetState);
    }

    #[test]
    fn malformed_lines_rejected() {
        for bad in ["MOVL 1,2,3\n", "MOVL a,0,0,0,0,0,1", "STATE 1,1,1,1,1,1,2,1", "JUMP 1", "MOVL NaN,0,0,0,0,0,1", "GETSTATE now"] {
            assert!(WireLine::parse(bad).is_err(), "{bad}");
        }
        assert!(wire_pose(f64::INFINITY, 0.0, 0.0, 0.0, 0.0, 0.0).is_err());
    }

    fn angle_diff_deg(a: f64, b: f64) -> f64 {
        (a - b + 180.0).rem_euclid(360.0) - 180.0
    }

    proptest! {
        #[test]
        fn state_round_trip(x in -900.0f64..900.0, y in -900.0f64..900.0, z in 0.0f64..900.0,
                            rx in -180.0f64..180.0, ry in -85.0f64..85.0, rz in -180.0f64..180.0,
                            seq in 0u64..1_000_000) {
            let sim = SimArmConfig::default();
            let raw = WireState { x, y, z, rx, ry, rz, grip: seq % 2 == 0, seq };
            let state = from_wire_state(&raw, &sim, 0).unwrap();
            let back = to_wire(&target(state.ee_position, state.ee_orientation), seq);
            prop_assert!((back.x - x).abs() < 1e-6 && (back.y - y).abs() < 1e-6 && (back.z - z).abs() < 1e-6);
            prop_assert!(angle_diff_deg(back.rx, rx).abs() < 1e-6);
            prop_assert!((back.ry - ry).abs() < 1e-6);
            prop_assert!(angle_diff_deg(back.rz, rz).abs() < 1e-6);
        }

        #[test]
        fn command_line_round_trip(x in -1e4f64..1e4, rx in -180.0f64..180.0, seq in 0u64..u64::MAX) {
            let c = WireCommand { x, y: -x, z: x / 3.0, rx, ry: rx / 2.0, rz: -rx, seq };
            prop_assert_eq!(WireLine::parse(&c.to_line()).unwrap(), WireLine::Move(c));
        }
    }
}
