//! End-to-end actuation latency: phone step in, first feedback motion out.

use std::time::Duration;

use serde::Serialize;

use super::system::System;
use super::OrchestratorError;
use crate::bridge::sim::SimArmConfig;
use crate::bus::TopicName;
use crate::clock::NANOS_PER_MILLI;
use crate::messages::{topics, Button, ButtonEvent, PoseSample};
use crate::pose_math::{Quat, Vec3};

#[derive(Debug, Clone)]
pub struct LatencyOptions {
    pub namespace: String,
    pub trials: usize,
    /// Feedback displacement counted as "moving", meters.
    pub epsilon: f64,
    /// Commanded step, meters in the robot frame.
    pub step: f64,
    /// Quiet time before each trial.
    pub settle: Duration,
    pub timeout: Duration,
}

impl Default for LatencyOptions {
    fn default() -> Self {
        Self {
            namespace: String::new(),
            trials: 20,
            epsilon: 0.002,
            step: 0.004,
            settle: Duration::from_secs(3),
            timeout: Duration::from_secs(2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyTrial {
    pub injected_ns: u64,
    /// Publish time of the first feedback sample displaced by more than epsilon.
    pub first_motion_ns: Option<u64>,
    pub end_to_end_ms: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LatencyReport {
    pub epsilon_m: f64,
    pub step_m: f64,
    pub trials: Vec<LatencyTrial>,
    pub failed: usize,
    pub min_ms: Option<f64>,
    pub mean_ms: Option<f64>,
    pub max_ms: Option<f64>,
    /// Model prediction for comparison: transport delay plus lag crossing time.
    pub expected_ms: Option<f64>,
}

/// Time for a first-order lag (time constant tau) driven by a step of `step`
/// to cover `epsilon`, plus the transport delay. `None` when never reached.
pub fn expected_crossing_s(sim: &SimArmConfig, step: f64, epsilon: f64) -> Option<f64> {
    if !(epsilon < step) {
        return None;
    }
    Some(sim.transport_delay + sim.lag_time_constant * (step / (step - epsilon)).ln())
}

fn summarize(epsilon: f64, step: f64, trials: Vec<LatencyTrial>, expected: Option<f64>) -> LatencyReport {
    let ok: Vec<f64> = trials.iter().filter_map(|t| t.end_to_end_ms).collect();
    let failed = trials.len() - ok.len();
    let (min, max) = ok.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    let has = !ok.is_empty();
    LatencyReport {
        epsilon_m: epsilon,
        step_m: step,
        failed,
        min_ms: has.then_some(min),
        mean_ms: has.then(|| ok.iter().sum::<f64>() / ok.len() as f64),
        max_ms: has.then_some(max),
        expected_ms: expected.map(|s| s * 1e3),
        trials,
    }
}

/// Releases the clutch if needed, then repeatedly steps the phone pose by
/// `step` (alternating direction) through the gateway WebSocket and times the
/// first feedback sample that moved more than `epsilon`.
pub fn measure_latency(system: &System, opts: &LatencyOptions) -> Result<LatencyReport, OrchestratorError> {
    let ns = opts.namespace.as_str();
    let arm = system
        .profile()
        .arms
        .iter()
        .find(|a| a.namespace == ns)
        .ok_or_else(|| OrchestratorError::Component(format!("no arm with namespace `{ns}`")))?
        .clone();
    let tick = system.tick_ns();
    let ingest = Duration::from_secs(5);
    let pose_topic = TopicName::new(ns, topics::PHONE_POSE)?.full();
    let button_topic = TopicName::new(ns, topics::BUTTON)?.full();

    let mut client = system.connect_client()?;
    let peer = client.local_addr().map_err(OrchestratorError::Component)?.to_string();
    let mut sent = 0u64;
    let mut stamp_ms = 0.0;
    let send_pose = |client: &mut crate::gateway::GatewayClient, p: Vec3, stamp: f64| {
        client.publish_pose(&pose_topic, &PoseSample { stamp_ms: stamp, position: p, orientation: Quat::IDENTITY })
    };

    // wait for feedback
    let wait_deadline = system.now_ns() + 2_000 * NANOS_PER_MILLI;
    while system.latest_feedback(ns).is_none() {
        if system.now_ns() > wait_deadline {
            return Err(OrchestratorError::Timeout(format!("no feedback on `{ns}`")));
        }
        system.run_for(tick)?;
    }

    let mut phone = Vec3::ZERO;
    send_pose(&mut client, phone, stamp_ms).map_err(OrchestratorError::Component)?;
    sent += 1;
    system.await_frames(&peer, sent, ingest)?;
    system.run_for(5 * tick)?;
    if system.planner_status(ns).is_none_or(|s| s.clutch_engaged) {
        client
            .publish_button(&button_topic, &ButtonEvent { button: Button::VolumeUp, stamp_ms })
            .map_err(OrchestratorError::Component)?;
        sent += 1;
        system.await_frames(&peer, sent, ingest)?;
        system.run_for(5 * tick)?;
        if system.planner_status(ns).is_none_or(|s| s.clutch_engaged) {
            return Err(OrchestratorError::Component("clutch did not release".into()));
        }
    }

    // phone displacement that maps to `step` along the robot's first mapped axis
    let scale = arm.planner.axis_map.scale();
    let unit = arm.planner.axis_map.apply(Vec3::new(1.0, 0.0, 0.0)).norm();
    let phone_step = opts.step / (scale * unit);

    let settle_ns = opts.settle.as_nanos() as u64;
    let timeout_ns = opts.timeout.as_nanos() as u64;
    let mut trials = Vec::with_capacity(opts.trials);
    for k in 0..opts.trials {
        system.run_for(settle_ns)?;
        let (_, base) = system.latest_feedback(ns).expect("feedback seen");
        let dir = if k % 2 == 0 { 1.0 } else { -1.0 };
        phone = Vec3::new(phone.x + dir * phone_step, 0.0, 0.0);
        stamp_ms = system.now_ns() as f64 / 1e6;
        let injected_ns = system.now_ns();
        send_pose(&mut client, phone, stamp_ms).map_err(OrchestratorError::Component)?;
        sent += 1;
        system.await_frames(&peer, sent, ingest)?;

        let mut first = None;
        while system.now_ns() < injected_ns + timeout_ns {
            system.run_for(tick)?;
            if let Some((t, s)) = system.latest_feedback(ns) {
                if t > injected_ns && s.ee_position.distance(&base.ee_position) > opts.epsilon {
                    first = Some(t);
                    break;
                }
            }
        }
        trials.push(LatencyTrial {
            injected_ns,
            first_motion_ns: first,
            end_to_end_ms: first.map(|t| (t - injected_ns) as f64 / 1e6),
        });
    }
    client.close();
    Ok(summarize(opts.epsilon, opts.step, trials, expected_crossing_s(&arm.sim, opts.step, opts.epsilon)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_time_formula() {
        let sim = SimArmConfig { transport_delay: 0.02, lag_time_constant: 0.25, ..SimArmConfig::default() };
        let t = expected_crossing_s(&sim, 0.004, 0.002).unwrap();
        assert!((t - (0.02 + 0.25 * 2f64.ln())).abs() < 1e-12);
        assert!(expected_crossing_s(&sim, 0.004, 0.004).is_none());
    }

    #[test]
    fn single_trial_summary_is_degenerate() {
        let r = summarize(0.002, 0.004, vec![LatencyTrial { injected_ns: 0, first_motion_ns: Some(5), end_to_end_ms: Some(200.0) }], None);
        assert_eq!((r.min_ms, r.mean_ms, r.max_ms), (Some(200.0), Some(200.0), Some(200.0)));
    }
}
