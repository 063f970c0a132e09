//! JSON frame schema.
//!
//! Client to server:
//!
//! ```json
//! {"op":"advertise","topic":"/left/phone2act/phone_pose","type":"geometry_msgs/PoseStamped"}
//! {"op":"publish","topic":"/left/phone2act/phone_pose",
//!  "msg":{"header":{"stamp":1234.5},"pose":{"position":{"x":0,"y":0,"z":0},
//!                                          "orientation":{"x":0,"y":0,"z":0,"w":1}}}}
//! {"op":"publish","topic":"/left/phone2act/button","msg":{"button":"volume_up","stamp":1300}}
//! {"op":"subscribe","topic":"/left/phone2act/robot_feedback"}
//! ```
//!
//! Server to client: `{"op":"publish","topic":...,"msg":{...}}` for subscribed
//! topics and `{"op":"status","level":"error","msg":"..."}` for rejected frames.

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::bus::Payload;
use crate::messages::{Button, ButtonEvent, PoseSample, RecorderControl};
use crate::pose_math::{Quat, Vec3};

/// Accepted deviation of an incoming quaternion's norm from 1 before renormalizing.
pub const QUAT_NORM_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecodeError {
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("missing or non-numeric field `{0}`")]
    MissingField(String),
    #[error("non-finite value in `{0}`")]
    NonFinite(String),
    #[error("quaternion norm {0:.4} outside 1 +/- {QUAT_NORM_TOLERANCE}")]
    BadNorm(f64),
    #[error("unknown button `{0}`")]
    UnknownButton(String),
    #[error("invalid field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Op {
    Advertise,
    Publish,
    Subscribe,
    Unsubscribe,
    Status,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireMessage {
    pub op: Op,
    pub topic: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub msg: Option<Value>,
    /// Message type name on advertise; informational.
    #[serde(default, rename = "type", skip_serializing_if = "Option::is_none")]
    pub msg_type: Option<String>,
}

impl WireMessage {
    pub fn parse(text: &str) -> Result<Self, DecodeError> {
        let m: WireMessage = serde_json::from_str(text).map_err(|e| DecodeError::Json(e.to_string()))?;
        if m.topic.is_empty() {
            return Err(DecodeError::MissingField("topic".into()));
        }
        if m.op == Op::Publish && m.msg.is_none() {
            return Err(DecodeError::MissingField("msg".into()));
        }
        Ok(m)
    }
}

fn field<'a>(v: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.').try_fold(v, |cur, key| cur.get(key))
}

fn number(v: &Value, path: &str) -> Result<f64, DecodeError> {
    let x = field(v, path)
        .and_then(Value::as_f64)
        .ok_or_else(|| DecodeError::MissingField(path.into()))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(DecodeError::NonFinite(path.into()))
    }
}

/// Client stamp in milliseconds. Accepts a plain number or a `{sec, nanosec}` pair.
fn stamp_ms(v: Option<&Value>, path: &str) -> Result<f64, DecodeError> {
    let Some(v) = v else { return Ok(0.0) };
    if let Some(ms) = v.as_f64() {
        return if ms.is_finite() { Ok(ms) } else { Err(DecodeError::NonFinite(path.into())) };
    }
    if v.is_object() {
        let sec = number(v, "sec")?;
        let nsec = field(v, "nanosec").or_else(|| field(v, "nsec")).and_then(Value::as_f64).unwrap_or(0.0);
        return Ok(sec * 1e3 + nsec * 1e-6);
    }
    Err(DecodeError::Invalid { field: path.into(), reason: "expected number or {sec, nanosec}".into() })
}

/// Decodes a pose message, either PoseStamped-shaped
/// (`{header:{stamp}, pose:{position, orientation}}`) or flat
/// (`{stamp, position, orientation}`).
pub fn decode_pose(msg: &Value) -> Result<PoseSample, DecodeError> {
    let (prefix, body, stamp) = match msg.get("pose") {
        Some(p) => ("pose.", p, (field(msg, "header.stamp"), "header.stamp")),
        None => ("", msg, (msg.get("stamp"), "stamp")),
    };
    let num = |name: &str| number(body, name).map_err(|e| prefixed(e, prefix));
    let position = Vec3::new(num("position.x")?, num("position.y")?, num("position.z")?);
    let (qx, qy, qz, qw) =
        (num("orientation.x")?, num("orientation.y")?, num("orientation.z")?, num("orientation.w")?);
    let n = (qx * qx + qy * qy + qz * qz + qw * qw).sqrt();
    if !n.is_finite() {
        return Err(DecodeError::NonFinite(format!("{prefix}orientation")));
    }
    if (n - 1.0).abs() > QUAT_NORM_TOLERANCE {
        return Err(DecodeError::BadNorm(n));
    }
    let orientation = Quat::new(qw, qx, qy, qz).map_err(|_| DecodeError::BadNorm(n))?;
    Ok(PoseSample { stamp_ms: stamp_ms(stamp.0, stamp.1)?, position, orientation })
}

fn prefixed(e: DecodeError, prefix: &str) -> DecodeError {
    match e {
        DecodeError::MissingField(f) => DecodeError::MissingField(format!("{prefix}{f}")),
        DecodeError::NonFinite(f) => DecodeError::NonFinite(format!("{prefix}{f}")),
        other => other,
    }
}

pub fn decode_button(msg: &Value) -> Result<ButtonEvent, DecodeError> {
    let name = msg
        .get("button")
        .or_else(|| msg.get("data"))
        .and_then(Value::as_str)
        .ok_or_else(|| DecodeError::MissingField("button".into()))?;
    let button = match name {
        "volume_up" => Button::VolumeUp,
        "volume_down" => Button::VolumeDown,
        other => return Err(DecodeError::UnknownButton(other.into())),
    };
    Ok(ButtonEvent { button, stamp_ms: stamp_ms(msg.get("stamp"), "stamp")? })
}

/// `{"command":"start","task":"..."}`, `{"command":"stop"}` or `{"command":"discard"}`.
pub fn decode_recorder_control(msg: &Value) -> Result<RecorderControl, DecodeError> {
    let cmd = msg
        .get("command")
        .and_then(Value::as_str)
        .ok_or_else(|| DecodeError::MissingField("command".into()))?;
    match cmd {
        "start" => Ok(RecorderControl::Start {
            task: msg.get("task").and_then(Value::as_str).unwrap_or("").to_string(),
        }),
        "stop" => Ok(RecorderControl::Stop),
        "discard" => Ok(RecorderControl::Discard),
        other => Err(DecodeError::Invalid { field: "command".into(), reason: format!("unknown `{other}`") }),
    }
}

pub fn pose_msg(sample: &PoseSample) -> Value {
    let (p, q) = (sample.position, sample.orientation);
    json!({
        "header": {"stamp": sample.stamp_ms},
        "pose": {
            "position": {"x": p.x, "y": p.y, "z": p.z},
            "orientation": {"x": q.x(), "y": q.y(), "z": q.z(), "w": q.w()},
        }
    })
}

pub fn button_msg(event: &ButtonEvent) -> Value {
    let name = match event.button {
        Button::VolumeUp => "volume_up",
        Button::VolumeDown => "volume_down",
    };
    json!({"button": name, "stamp": event.stamp_ms})
}

pub fn recorder_control_msg(ctl: &RecorderControl) -> Value {
    match ctl {
        RecorderControl::Start { task } => json!({"command": "start", "task": task}),
        RecorderControl::Stop => json!({"command": "stop"}),
        RecorderControl::Discard => json!({"command": "discard"}),
    }
}

fn quat_json(q: &Quat) -> Value {
    json!({"x": q.x(), "y": q.y(), "z": q.z(), "w": q.w()})
}

/// JSON form of a bus payload for forwarding to subscribed clients.
/// Image frames are not forwarded.
pub fn payload_json(payload: &Payload) -> Option<Value> {
    let v = match payload {
        Payload::Pose(p) => pose_msg(p),
        Payload::Button(b) => button_msg(b),
        Payload::Target(t) => json!({
            "position": t.position,
            "orientation": quat_json(&t.orientation),
            "stamp_ns": t.stamp_ns,
        }),
        Payload::RobotState(s) => json!({
            "position": s.ee_position,
            "orientation": quat_json(&s.ee_orientation),
            "joints": s.joints,
            "gripper_closed": s.gripper_closed,
            "command_seq": s.command_seq,
            "stamp_ns": s.stamp_ns,
        }),
        Payload::Frame(_) => return None,
        Payload::RecorderControl(c) => recorder_control_msg(c),
        Payload::Gripper(g) => serde_json::to_value(g).ok()?,
        Payload::Session(s) => serde_json::to_value(s).ok()?,
        Payload::Health(h) => serde_json::to_value(h).ok()?,
        Payload::PlannerStatus(s) => serde_json::to_value(s).ok()?,
        Payload::RecorderStatus(s) => serde_json::to_value(s).ok()?,
    };
    Some(v)
}

pub fn publish_frame(topic: &str, msg: Value) -> String {
    json!({"op": "publish", "topic": topic, "msg": msg}).to_string()
}

pub fn advertise_frame(topic: &str) -> String {
    json!({"op": "advertise", "topic": topic}).to_string()
}

pub fn subscribe_frame(topic: &str) -> String {
    json!({"op": "subscribe", "topic": topic}).to_string()
}

pub fn error_frame(message: &str) -> String {
    let mut m = Map::new();
    m.insert("op".into(), "status".into());
    m.insert("level".into(), "error".into());
    m.insert("msg".into(), message.into());
    Value::Object(m).to_string()
}
