//! Scripted operator.
//!
//! One event per line, times in milliseconds from replay start:
//!
//! ```text
//! # comment
//! 0     pose 0 0 0 0 0 0 1            # x y z qx qy qz qw (phone frame, meters)
//! 100   button volume_up
//! 200   @/left record start pick cube # namespace override, task text
//! 8200  record stop
//! 8300  record discard
//! ```
//!
//! Events go through the gateway's WebSocket like any phone client; one
//! client per namespace.

use std::collections::BTreeMap;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::system::System;
use super::OrchestratorError;
use crate::bus::TopicName;
use crate::clock::NANOS_PER_MILLI;
use crate::gateway::GatewayClient;
use crate::messages::{topics, Button, ButtonEvent, PoseSample, RecorderControl};
use crate::pose_math::{Quat, Vec3};
use crate::recorder::EpisodeOutcome;

#[derive(Debug, Clone, PartialEq)]
pub enum ScriptAction {
    Pose { position: Vec3, orientation: [f64; 4] },
    Button(Button),
    Record(RecorderControl),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptEvent {
    pub line: usize,
    pub t_ms: u64,
    pub namespace: String,
    pub action: ScriptAction,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {line}: {reason}")]
pub struct ScriptError {
    pub line: usize,
    pub reason: String,
}

pub fn parse_script(text: &str) -> Result<Vec<ScriptEvent>, ScriptError> {
    let mut out = Vec::new();
    let mut last_t = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |reason: String| ScriptError { line, reason };
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut words = body.split_whitespace().peekable();
        let t_ms: u64 = words
            .next()
            .unwrap()
            .parse()
            .map_err(|_| err(format!("expected a time in ms, got `{}`", body.split_whitespace().next().unwrap())))?;
        if t_ms < last_t {
            return Err(err(format!("time {t_ms} goes backwards (previous {last_t})")));
        }
        last_t = t_ms;
        let mut namespace = String::new();
        if let Some(ns) = words.peek().and_then(|w| w.strip_prefix('@')) {
            TopicName::new(ns, topics::PHONE_POSE).map_err(|e| err(e.to_string()))?;
            namespace = ns.to_string();
            words.next();
        }
        let verb = words.next().ok_or_else(|| err("missing event after time".into()))?;
        let rest: Vec<&str> = words.collect();
        let action = match verb {
            "pose" => {
                if rest.len() != 7 {
                    return Err(err(format!("pose needs 7 numbers (x y z qx qy qz qw), got {}", rest.len())));
                }
                let v = rest
                    .iter()
                    .map(|w| w.parse::<f64>().ok().filter(|v| v.is_finite()))
                    .collect::<Option<Vec<f64>>>()
                    .ok_or_else(|| err(format!("pose values must be finite numbers: `{}`", rest.join(" "))))?;
                Quat::new(v[6], v[3], v[4], v[5]).map_err(|e| err(format!("orientation: {e}")))?;
                ScriptAction::Pose { position: Vec3::new(v[0], v[1], v[2]), orientation: [v[3], v[4], v[5], v[6]] }
            }
            "button" => match rest.as_slice() {
                ["volume_up"] => ScriptAction::Button(Button::VolumeUp),
                ["volume_down"] => ScriptAction::Button(Button::VolumeDown),
                _ => return Err(err(format!("button must be volume_up or volume_down, got `{}`", rest.join(" ")))),
            },
            "record" => match rest.split_first() {
                Some((&"start", task)) if !task.is_empty() => ScriptAction::Record(RecorderControl::Start { task: task.join(" ") }),
                Some((&"start", _)) => return Err(err("record start needs a task".into())),
                Some((&"stop", [])) => ScriptAction::Record(RecorderControl::Stop),
                Some((&"discard", [])) => ScriptAction::Record(RecorderControl::Discard),
                _ => return Err(err(format!("record takes start <task>|stop|discard, got `{}`", rest.join(" ")))),
            },
            other => return Err(err(format!("unknown event `{other}` (pose|button|record)"))),
        };
        out.push(ScriptEvent { line, t_ms, namespace, action });
    }
    Ok(out)
}

#[derive(Debug, Clone, Default)]
pub struct ReplayReport {
    pub events_sent: usize,
    pub frames_rejected: u64,
    /// Episodes that ended during the replay, per namespace.
    pub outcomes: BTreeMap<String, Vec<EpisodeOutcome>>,
}

impl ReplayReport {
    pub fn finalized(&self) -> usize {
        self.outcomes.values().flatten().filter(|o| matches!(o, EpisodeOutcome::Finalized(_))).count()
    }
}

struct Client {
    ws: GatewayClient,
    peer: String,
    sent: u64,
}

/// Time allowed after the last event for stops to be finalized.
const TAIL_MS: u64 = 200;

/// Plays `events` against a running system, starting on the next whole millisecond.
pub fn replay_operator(system: &System, events: &[ScriptEvent]) -> Result<ReplayReport, OrchestratorError> {
    let ingest_timeout = Duration::from_secs(5);
    let start_ns = system.now_ns().div_ceil(NANOS_PER_MILLI) * NANOS_PER_MILLI;
    let before: BTreeMap<String, usize> =
        system.profile().arms.iter().map(|a| (a.namespace.clone(), system.recorder_outcomes(&a.namespace).len())).collect();

    let mut clients: BTreeMap<String, Client> = BTreeMap::new();
    let mut report = ReplayReport::default();
    for ev in events {
        if !before.contains_key(&ev.namespace) {
            return Err(OrchestratorError::Replay {
                line: ev.line,
                reason: format!("namespace `{}` is not part of the profile", ev.namespace),
            });
        }
        system.run_until(start_ns + ev.t_ms * NANOS_PER_MILLI)?;
        if !clients.contains_key(&ev.namespace) {
            let ws = system.connect_client()?;
            let peer = ws.local_addr().map_err(OrchestratorError::Component)?.to_string();
            clients.insert(ev.namespace.clone(), Client { ws, peer, sent: 0 });
        }
        let c = clients.get_mut(&ev.namespace).expect("inserted above");
        let topic = |base: &str| TopicName::new(&ev.namespace, base).expect("validated").full();
        let sent = match &ev.action {
            ScriptAction::Pose { position, orientation: [x, y, z, w] } => {
                let orientation = Quat::new(*w, *x, *y, *z).expect("validated at parse");
                let sample = PoseSample { stamp_ms: ev.t_ms as f64, position: *position, orientation };
                c.ws.publish_pose(&topic(topics::PHONE_POSE), &sample)
            }
            ScriptAction::Button(b) => {
                c.ws.publish_button(&topic(topics::BUTTON), &ButtonEvent { button: *b, stamp_ms: ev.t_ms as f64 })
            }
            ScriptAction::Record(r) => c.ws.publish_recorder(&topic(topics::RECORDER_CONTROL), r),
        };
        sent.map_err(|e| OrchestratorError::Replay { line: ev.line, reason: e })?;
        c.sent += 1;
        system.await_frames(&c.peer, c.sent, ingest_timeout)?;
        report.events_sent += 1;
    }
    let end = events.last().map_or(0, |e| e.t_ms) + TAIL_MS;
    system.run_until(start_ns + end * NANOS_PER_MILLI)?;
    for c in clients.values() {
        report.frames_rejected += system.frames_rejected(&c.peer);
    }
    for c in clients.into_values() {
        c.ws.close();
    }
    // let the session-ended events reach the planners
    system.run_for(10 * NANOS_PER_MILLI)?;
    for (ns, n) in before {
        let all = system.recorder_outcomes(&ns);
        report.outcomes.insert(ns, all[n.min(all.len())..].to_vec());
    }
    Ok(report)
}

/// Generates a pick-and-place demonstration: release the clutch, record,
/// reach down, close the gripper, lift and carry with a wrist turn, place,
/// open, retreat, stop. Poses are sent at 50 Hz with seeded sub-millimeter jitter.
pub fn pick_and_place_script(seed: u64, namespace: &str, episodes: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let at = if namespace.is_empty() { String::new() } else { format!("@{namespace} ") };
    let mut out = String::from("# pick and place, generated\n");
    let mut t = 0u64;
    let mut emit = |t: u64, s: &str| out.push_str(&format!("{t} {at}{s}\n"));

    // waypoints in the phone frame: (x, y, z, yaw degrees)
    let waypoints: [[f64; 4]; 7] = [
        [0.0, 0.0, 0.0, 0.0],
        [0.06, 0.04, -0.08, 0.0],  // above the object, descending
        [0.06, 0.04, -0.12, 0.0],  // grasp height
        [0.06, 0.04, -0.02, 0.0],  // lift
        [0.02, -0.10, -0.02, 35.0], // carry with a wrist turn
        [0.02, -0.10, -0.11, 35.0], // place height
        [0.0, 0.0, 0.0, 0.0],       // retreat
    ];
    let pose = |p: [f64; 4], jitter: [f64; 3]| {
        let half = p[3].to_radians() / 2.0;
        format!(
            "pose {:.6} {:.6} {:.6} 0 0 {:.9} {:.9}",
            p[0] + jitter[0],
            p[1] + jitter[1],
            p[2] + jitter[2],
            half.sin(),
            half.cos()
        )
    };

    emit(t, &pose(waypoints[0], [0.0; 3]));
    t += 100;
    emit(t, "button volume_up");
    for ep in 0..episodes {
        t += 100;
        emit(t, &format!("record start pick and place {ep}"));
        for seg in 0..waypoints.len() - 1 {
            let (a, b) = (waypoints[seg], waypoints[seg + 1]);
            let steps = 50; // one second per segment at 50 Hz
            for k in 1..=steps {
                t += 20;
                let s = k as f64 / steps as f64;
                let s = s * s * (3.0 - 2.0 * s);
                let p = [0, 1, 2, 3].map(|i| a[i] + (b[i] - a[i]) * s);
                let j = [0; 3].map(|_| rng.gen_range(-0.0005..0.0005));
                emit(t, &pose(p, j));
            }
            match seg {
                1 | 4 => {
                    t += 10;
                    emit(t, "button volume_down");
                    // dwell while the gripper actuates
                    for _ in 0..10 {
                        t += 20;
                        emit(t, &pose(b, [0.0; 3]));
                    }
                }
                _ => {}
            }
        }
        t += 100;
        emit(t, "record stop");
    }
    t += 100;
    emit(t, "button volume_up");
    out
}
