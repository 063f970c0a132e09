//! Synchronized episode recording and LeRobot-style export.
//!
//! A [`RecorderNode`] ticks at 20 Hz, admits a timestep only when robot
//! feedback and every camera are fresh ([`sync_gate`]), buffers frames in
//! memory, and on stop writes Parquet + per-camera video + meta files via
//! [`finalize_episode`]. [`validate_dataset`] checks an exported root.

pub mod camera;
pub mod dataset;
pub mod episode;
pub mod gate;
pub mod node;
pub mod storage;
pub mod table;
pub mod validate;
pub mod vectors;
pub mod video;

use std::collections::HashSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::bus::BusError;

pub use camera::{CameraError, CameraNode, FrameSource, ImageSequenceCamera, SyntheticCamera, View};
pub use dataset::{finalize_episode, DatasetWriter, Manifest, ManifestDelta};
pub use episode::{Episode, EpisodeFrame};
pub use gate::{sync_gate, BusGate, Snapshot};
pub use node::{EpisodeOutcome, RecorderNode};
pub use storage::{FsStorage, InstrumentedStorage, SharedStorage, Storage, StorageCall, StorageOp};
pub use validate::{validate_dataset, ValidationReport, Violation, ViolationKind};
pub use vectors::{build_action, ActionBasis, ActionVector, ObservationVector, ACTION_DIM, OBSERVATION_DIM};
pub use video::VideoMode;

#[derive(Debug, thiserror::Error)]
pub enum RecorderError {
    #[error("already finalized")]
    AlreadyFinalized,
    #[error("empty episode")]
    EmptyEpisode,
    #[error("already recording")]
    AlreadyRecording,
    #[error("not recording")]
    NotRecording,
    #[error("memory ceiling of {limit_bytes} bytes exceeded ({needed_bytes} needed)")]
    MemoryCeiling { limit_bytes: usize, needed_bytes: usize },
    #[error("camera `{camera}` changed resolution from {expected:?} to {got:?}")]
    ResolutionChanged { camera: String, expected: (u32, u32), got: (u32, u32) },
    #[error("camera mismatch: {0}")]
    CameraMismatch(String),
    #[error("disk failure: {reason}; episode spooled to {spooled_to:?}")]
    Disk { reason: String, spooled_to: Option<PathBuf> },
    #[error("encode: {0}")]
    Encode(String),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Bus(#[from] BusError),
    #[error(transparent)]
    Camera(#[from] CameraError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CameraSource {
    Synthetic { view: View, seed: u64 },
    ImageSequence { dir: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraConfig {
    pub name: String,
    pub width: u32,
    pub height: u32,
    pub rate_hz: f64,
    pub source: CameraSource,
}

impl CameraConfig {
    pub fn synthetic(name: &str, view: View, seed: u64) -> Self {
        Self { name: name.into(), width: 160, height: 120, rate_hz: 30.0, source: CameraSource::Synthetic { view, seed } }
    }

    /// Builds the frame source; image sequences define their own resolution.
    pub fn open(&self) -> Result<Box<dyn FrameSource>, CameraError> {
        Ok(match &self.source {
            CameraSource::Synthetic { view, seed } => Box::new(SyntheticCamera::new(&self.name, self.width, self.height, *view, *seed)),
            CameraSource::ImageSequence { dir } => Box::new(ImageSequenceCamera::open(&self.name, dir)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecorderConfig {
    pub enabled: bool,
    pub output_root: PathBuf,
    pub fps: u32,
    pub freshness_window_ms: f64,
    pub memory_ceiling_mb: u64,
    pub video: VideoMode,
    pub cameras: Vec<CameraConfig>,
}

impl Default for RecorderConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            output_root: PathBuf::from("dataset"),
            fps: dataset::DATASET_FPS,
            freshness_window_ms: 50.0,
            memory_ceiling_mb: 2048,
            video: VideoMode::default(),
            cameras: vec![
                CameraConfig::synthetic("cam_front", View::Front, 1),
                CameraConfig::synthetic("cam_top", View::Top, 2),
            ],
        }
    }
}

impl RecorderConfig {
    pub fn validate(&self) -> Result<(), RecorderError> {
        let bad = |field: &str, why: String| Err(RecorderError::Config(format!("recorder.{field}: {why}")));
        if self.fps != dataset::DATASET_FPS {
            return bad("fps", format!("{} unsupported, the dataset layout is fixed at {}", self.fps, dataset::DATASET_FPS));
        }
        if !(self.freshness_window_ms.is_finite() && self.freshness_window_ms > 0.0) {
            return bad("freshness_window_ms", format!("{} must be positive", self.freshness_window_ms));
        }
        if self.memory_ceiling_mb == 0 {
            return bad("memory_ceiling_mb", "must be positive".into());
        }
        if let VideoMode::Mp4 { quality } = self.video {
            if !(1..=100).contains(&quality) {
                return bad("video.quality", format!("{quality} outside 1..=100"));
            }
        }
        let mut seen = HashSet::new();
        for (i, c) in self.cameras.iter().enumerate() {
            let ok = !c.name.is_empty() && c.name.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_');
            if !ok {
                return bad(&format!("cameras[{i}].name"), format!("`{}` must be nonempty [A-Za-z0-9_]", c.name));
            }
            if !seen.insert(&c.name) {
                return bad(&format!("cameras[{i}].name"), format!("duplicate camera `{}`", c.name));
            }
            if c.width == 0 || c.height == 0 || c.width > 4096 || c.height > 4096 {
                return bad(&format!("cameras[{i}]"), format!("resolution {}x{} out of range", c.width, c.height));
            }
            if !(c.rate_hz.is_finite() && c.rate_hz > 0.0) {
                return bad(&format!("cameras[{i}].rate_hz"), format!("{} must be positive", c.rate_hz));
            }
        }
        Ok(())
    }
}
