use crate::bus::{Bus, Payload, PayloadKind, QosProfile, Subscription, TopicName};
use crate::clock::secs_to_ns;
use crate::messages::{topics, RecorderControl, RecorderStatus};

use super::dataset::{finalize_episode, DatasetWriter, ManifestDelta};
use super::episode::Episode;
use super::gate::BusGate;
use super::storage::SharedStorage;
use super::{RecorderConfig, RecorderError};

/// How an episode ended.
#[derive(Debug, Clone, PartialEq)]
pub enum EpisodeOutcome {
    Finalized(ManifestDelta),
    Failed { task: String, reason: String },
    Discarded { task: String, frames: usize },
}

/// Records one namespace: takes start/stop/discard on the control topic,
/// ticks the gate at the configured rate while recording, and finalizes on
/// stop. Nothing touches storage between start and stop.
pub struct RecorderNode {
    bus: Bus,
    control: Subscription,
    status_topic: TopicName,
    gate: BusGate,
    writer: DatasetWriter,
    cameras: Vec<String>,
    ceiling_bytes: usize,
    period_ns: u64,
    next_tick: u64,
    episode: Option<Episode>,
    last_error: Option<String>,
    outcomes: Vec<EpisodeOutcome>,
}

impl RecorderNode {
    pub fn new(bus: &Bus, namespace: &str, config: &RecorderConfig, storage: SharedStorage) -> Result<Self, RecorderError> {
        config.validate()?;
        let t = |base: &str| TopicName::new(namespace, base);
        let cameras: Vec<String> = config.cameras.iter().map(|c| c.name.clone()).collect();
        let gate = BusGate {
            feedback: t(topics::ROBOT_FEEDBACK)?,
            cameras: cameras.iter().map(|c| t(&topics::camera(c))).collect::<Result<_, _>>()?,
            target: t(topics::TARGET_POSE)?,
            gripper: t(topics::GRIPPER_CMD)?,
            window_ns: secs_to_ns(config.freshness_window_ms / 1000.0),
        };
        let control = bus.subscribe(&t(topics::RECORDER_CONTROL)?, QosProfile::default())?;
        let status_topic = t(topics::RECORDER_STATUS)?;
        bus.advertise(&status_topic, PayloadKind::RecorderStatus)?;
        let node = Self {
            bus: bus.clone(),
            control,
            status_topic,
            gate,
            writer: DatasetWriter::new(&config.output_root, storage, config.video),
            cameras,
            ceiling_bytes: (config.memory_ceiling_mb as usize).saturating_mul(1 << 20),
            period_ns: secs_to_ns(1.0 / config.fps as f64),
            next_tick: 0,
            episode: None,
            last_error: None,
            outcomes: Vec::new(),
        };
        node.publish_status()?;
        Ok(node)
    }

    pub fn writer(&self) -> &DatasetWriter {
        &self.writer
    }

    pub fn is_recording(&self) -> bool {
        self.episode.is_some()
    }

    pub fn episode(&self) -> Option<&Episode> {
        self.episode.as_ref()
    }

    pub fn outcomes(&self) -> &[EpisodeOutcome] {
        &self.outcomes
    }

    pub fn last_error(&self) -> Option<&str> {
        self.last_error.as_deref()
    }

    pub fn status(&self) -> RecorderStatus {
        RecorderStatus {
            recording: self.episode.is_some(),
            frames: self.episode.as_ref().map_or(0, |e| e.len() as u32),
            skipped_ticks: self.episode.as_ref().map_or(0, |e| e.skipped_ticks()),
            last_error: self.last_error.clone(),
        }
    }

    fn publish_status(&self) -> Result<(), RecorderError> {
        self.bus.publish(&self.status_topic, Payload::RecorderStatus(self.status()))?;
        Ok(())
    }

    fn fail(&mut self, task: String, reason: String) {
        tracing::warn!(task, reason, "episode failed");
        self.last_error = Some(reason.clone());
        self.outcomes.push(EpisodeOutcome::Failed { task, reason });
    }

    pub fn start(&mut self, task: &str, now_ns: u64) -> Result<(), RecorderError> {
        if self.episode.is_some() {
            self.last_error = Some(RecorderError::AlreadyRecording.to_string());
            self.publish_status()?;
            return Err(RecorderError::AlreadyRecording);
        }
        self.episode = Some(Episode::new(task, self.cameras.clone(), now_ns, self.ceiling_bytes));
        self.next_tick = now_ns;
        self.last_error = None;
        self.publish_status()
    }

    /// Stops and finalizes the current episode. The outcome is recorded either way.
    pub fn stop(&mut self) -> Result<Option<EpisodeOutcome>, RecorderError> {
        let Some(mut ep) = self.episode.take() else {
            self.last_error = Some(RecorderError::NotRecording.to_string());
            self.publish_status()?;
            return Ok(None);
        };
        match finalize_episode(&mut ep, &self.writer) {
            Ok(delta) => {
                tracing::info!(episode = delta.episode_index, frames = delta.length, "episode finalized");
                self.outcomes.push(EpisodeOutcome::Finalized(delta));
            }
            Err(e) => self.fail(ep.task().to_string(), e.to_string()),
        }
        self.publish_status()?;
        Ok(self.outcomes.last().cloned())
    }

    pub fn discard(&mut self) -> Result<(), RecorderError> {
        if let Some(ep) = self.episode.take() {
            self.outcomes.push(EpisodeOutcome::Discarded { task: ep.task().to_string(), frames: ep.len() });
        }
        self.publish_status()
    }

    /// Handles pending control messages, then runs the gate if a tick is due.
    pub fn spin_once(&mut self, now_ns: u64) -> Result<(), RecorderError> {
        for env in self.control.drain() {
            if let Payload::RecorderControl(c) = env.payload {
                match c {
                    RecorderControl::Start { task } => {
                        let _ = self.start(&task, now_ns);
                    }
                    RecorderControl::Stop => {
                        self.stop()?;
                    }
                    RecorderControl::Discard => self.discard()?,
                }
            }
        }
        if self.episode.is_none() || now_ns < self.next_tick {
            return Ok(());
        }
        self.next_tick += self.period_ns;
        if self.next_tick <= now_ns {
            self.next_tick = now_ns + self.period_ns;
        }
        let snap = self.gate.poll(&self.bus, now_ns);
        let ep = self.episode.as_mut().expect("checked above");
        match snap {
            None => ep.skip(),
            Some(s) => {
                if let Err(e) = ep.push(&s, now_ns) {
                    let ep = self.episode.take().expect("recording");
                    self.fail(ep.task().to_string(), format!("episode aborted, {} frames discarded: {e}", ep.len()));
                }
            }
        }
        self.publish_status()
    }
}
