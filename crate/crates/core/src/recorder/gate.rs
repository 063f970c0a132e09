use crate::bus::{Bus, Envelope, Payload, TopicName};
use crate::messages::{ImageFrame, RobotState, TargetPose};

/// True when every source has published and none is older than `window_ns`.
pub fn sync_gate(stamps: &[Option<u64>], now_ns: u64, window_ns: u64) -> bool {
    !stamps.is_empty() && stamps.iter().all(|s| matches!(s, Some(t) if now_ns.saturating_sub(*t) <= window_ns))
}

/// Everything one recorded timestep needs.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub feedback: RobotState,
    /// One per camera, in configuration order.
    pub frames: Vec<ImageFrame>,
    pub target: Option<TargetPose>,
    pub gripper_cmd: Option<bool>,
}

/// Gate over the bus: robot feedback and each camera are the gated sources;
/// the latest target and gripper command ride along without gating, since
/// they are legitimately silent while the clutch is engaged.
#[derive(Debug, Clone)]
pub struct BusGate {
    pub feedback: TopicName,
    pub cameras: Vec<TopicName>,
    pub target: TopicName,
    pub gripper: TopicName,
    pub window_ns: u64,
}

impl BusGate {
    pub fn poll(&self, bus: &Bus, now_ns: u64) -> Option<Snapshot> {
        let feedback = bus.latest(&self.feedback);
        let frames: Vec<Option<Envelope>> = self.cameras.iter().map(|t| bus.latest(t)).collect();
        let stamps: Vec<Option<u64>> = std::iter::once(&feedback)
            .chain(frames.iter())
            .map(|e| e.as_ref().map(|e| e.publish_time))
            .collect();
        if !sync_gate(&stamps, now_ns, self.window_ns) {
            return None;
        }
        let Payload::RobotState(feedback) = feedback?.payload else { return None };
        let frames = frames
            .into_iter()
            .map(|e| match e?.payload {
                Payload::Frame(f) => Some(f),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()?;
        let target = bus.latest(&self.target).and_then(|e| match e.payload {
            Payload::Target(t) => Some(t),
            _ => None,
        });
        let gripper_cmd = bus.latest(&self.gripper).and_then(|e| match e.payload {
            Payload::Gripper(g) => Some(g.closed),
            _ => None,
        });
        Some(Snapshot { feedback, frames, target, gripper_cmd })
    }
}
