use crate::clock::ns_to_secs;
use crate::messages::ImageFrame;

use super::gate::Snapshot;
use super::vectors::{build_action, ActionBasis, ActionVector, ObservationVector};
use super::RecorderError;

/// Rough per-row bookkeeping cost on top of image bytes.
const ROW_OVERHEAD_BYTES: usize = 256;

/// One synchronized timestep held in memory until finalize.
#[derive(Debug, Clone)]
pub struct EpisodeFrame {
    pub frame_index: u32,
    /// Seconds since the episode started.
    pub timestamp: f64,
    pub stamp_ns: u64,
    pub observation: ObservationVector,
    pub action: ActionVector,
    /// The pose the action was differenced against, kept for audits.
    pub basis: ActionBasis,
    /// One per camera, in episode camera order.
    pub images: Vec<ImageFrame>,
}

/// RAM-buffered episode; the handle passed to [`super::finalize_episode`].
#[derive(Debug)]
pub struct Episode {
    task: String,
    cameras: Vec<String>,
    start_ns: u64,
    frames: Vec<EpisodeFrame>,
    resolutions: Vec<Option<(u32, u32)>>,
    prev_basis: Option<ActionBasis>,
    bytes: usize,
    ceiling: usize,
    skipped: u64,
    pub(super) finalized: bool,
}

impl Episode {
    pub fn new(task: &str, cameras: Vec<String>, start_ns: u64, memory_ceiling_bytes: usize) -> Self {
        let n = cameras.len();
        Self {
            task: task.to_string(),
            cameras,
            start_ns,
            frames: Vec::new(),
            resolutions: vec![None; n],
            prev_basis: None,
            bytes: 0,
            ceiling: memory_ceiling_bytes,
            skipped: 0,
            finalized: false,
        }
    }

    pub fn task(&self) -> &str {
        &self.task
    }

    pub fn cameras(&self) -> &[String] {
        &self.cameras
    }

    pub fn start_ns(&self) -> u64 {
        self.start_ns
    }

    pub fn frames(&self) -> &[EpisodeFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn buffered_bytes(&self) -> usize {
        self.bytes
    }

    pub fn skipped_ticks(&self) -> u64 {
        self.skipped
    }

    pub fn is_finalized(&self) -> bool {
        self.finalized
    }

    /// Resolution per camera, known once a frame has been appended.
    pub fn resolutions(&self) -> Vec<(u32, u32)> {
        self.resolutions.iter().map(|r| r.unwrap_or((0, 0))).collect()
    }

    pub fn skip(&mut self) {
        self.skipped += 1;
    }

    /// Appends a gated snapshot taken at `now_ns`.
    pub fn push(&mut self, snap: &Snapshot, now_ns: u64) -> Result<&EpisodeFrame, RecorderError> {
        if self.finalized {
            return Err(RecorderError::AlreadyFinalized);
        }
        if snap.frames.len() != self.cameras.len() {
            return Err(RecorderError::CameraMismatch(format!(
                "snapshot has {} frames for {} cameras",
                snap.frames.len(),
                self.cameras.len()
            )));
        }
        for (i, f) in snap.frames.iter().enumerate() {
            let got = (f.width, f.height);
            match self.resolutions[i] {
                Some(expected) if expected != got => {
                    return Err(RecorderError::ResolutionChanged { camera: self.cameras[i].clone(), expected, got })
                }
                _ => {}
            }
        }
        let add = ROW_OVERHEAD_BYTES + snap.frames.iter().map(ImageFrame::byte_len).sum::<usize>();
        if self.bytes + add > self.ceiling {
            return Err(RecorderError::MemoryCeiling { limit_bytes: self.ceiling, needed_bytes: self.bytes + add });
        }
        for (i, f) in snap.frames.iter().enumerate() {
            self.resolutions[i] = Some((f.width, f.height));
        }

        let basis = snap.target.as_ref().map(ActionBasis::from_target).unwrap_or_else(|| ActionBasis::from_state(&snap.feedback));
        let prev = self.prev_basis.unwrap_or(basis);
        let gripper = snap.gripper_cmd.unwrap_or(snap.feedback.gripper_closed);
        let action = build_action(&prev, &basis, gripper);
        self.prev_basis = Some(basis);
        self.bytes += add;
        self.frames.push(EpisodeFrame {
            frame_index: self.frames.len() as u32,
            timestamp: ns_to_secs(now_ns.saturating_sub(self.start_ns)),
            stamp_ns: now_ns,
            observation: ObservationVector::from_state(&snap.feedback),
            action,
            basis,
            images: snap.frames.clone(),
        });
        Ok(self.frames.last().unwrap())
    }
}
