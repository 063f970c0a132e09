//! Offline consistency checks for an exported dataset.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::dataset::{
    data_rel_path, frame_file_name, video_key, video_rel_path, Manifest, CODEBASE_VERSION, DATASET_FPS,
    EPISODES_FILE, INFO_FILE, TASKS_FILE,
};
use super::table::decode_parquet;
use super::vectors::{ACTION_DIM, OBSERVATION_DIM};
use super::video::{read_mp4, VideoMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Unreadable,
    Schema,
    Shape,
    Fps,
    CountMismatch,
    Index,
    Timestamp,
    NonFinite,
    Range,
    Video,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub file: PathBuf,
    pub row: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:?}] {}", self.kind, self.file.display())?;
        if let Some(r) = self.row {
            write!(f, " row {r}")?;
        }
        write!(f, ": {}", self.message)
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub episodes: usize,
    pub frames: u64,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, kind: ViolationKind, file: &Path, row: Option<usize>, message: impl Into<String>) {
        self.violations.push(Violation { kind, file: file.to_path_buf(), row, message: message.into() });
    }
}

/// f32 storage rounds values just below π up to `PI as f32`, so the
/// half-open interval is checked against the f32 bound, inclusive.
fn angle_in_range(v: f32) -> bool {
    v.abs() <= std::f32::consts::PI
}

/// Reads everything under `root` and reports every inconsistency found;
/// never fails on bad input.
pub fn validate_dataset(root: &Path) -> ValidationReport {
    let mut rep = ValidationReport::default();
    let read = |rel: &str, rep: &mut ValidationReport| match std::fs::read(root.join(rel)) {
        Ok(b) => Some(b),
        Err(e) => {
            rep.push(ViolationKind::Unreadable, &root.join(rel), None, e.to_string());
            None
        }
    };
    let (Some(info), Some(episodes), Some(tasks)) =
        (read(INFO_FILE, &mut rep), read(EPISODES_FILE, &mut rep), read(TASKS_FILE, &mut rep))
    else {
        return rep;
    };
    let manifest = match Manifest::parse(&info, &episodes, &tasks) {
        Ok(m) => m,
        Err(e) => {
            rep.push(ViolationKind::Schema, &root.join(INFO_FILE), None, e);
            return rep;
        }
    };
    check_info(root, &manifest, &mut rep);

    let info_path = root.join(INFO_FILE);
    let eps_path = root.join(EPISODES_FILE);
    rep.episodes = manifest.episodes.len();
    if manifest.info.total_episodes as usize != manifest.episodes.len() {
        rep.push(
            ViolationKind::CountMismatch,
            &info_path,
            None,
            format!("total_episodes {} but {} listed", manifest.info.total_episodes, manifest.episodes.len()),
        );
    }
    let sum: u64 = manifest.episodes.iter().map(|e| e.length as u64).sum();
    if manifest.info.total_frames != sum {
        rep.push(
            ViolationKind::CountMismatch,
            &info_path,
            None,
            format!("total_frames {} but episode lengths sum to {sum}", manifest.info.total_frames),
        );
    }

    let cameras = manifest.cameras();
    let mut global = 0u64;
    for (i, ep) in manifest.episodes.iter().enumerate() {
        if ep.episode_index as usize != i {
            rep.push(ViolationKind::Index, &eps_path, Some(i), format!("episode_index {} at line {}", ep.episode_index, i + 1));
        }
        let expected_task = ep.tasks.first().and_then(|t| manifest.tasks.iter().find(|m| &m.task == t)).map(|m| m.task_index);
        if expected_task.is_none() {
            rep.push(ViolationKind::Schema, &eps_path, Some(i), format!("episode {i} has no known task"));
        }
        check_episode(root, i as u32, ep.length, global, expected_task, &mut rep);
        for cam in &cameras {
            check_video(root, cam, i as u32, ep.length, &manifest, &mut rep);
        }
        global += ep.length as u64;
    }
    rep.frames = global;
    rep
}

fn check_info(root: &Path, m: &Manifest, rep: &mut ValidationReport) {
    let p = root.join(INFO_FILE);
    let info = &m.info;
    if info.fps != DATASET_FPS {
        rep.push(ViolationKind::Fps, &p, None, format!("fps {} (expected {DATASET_FPS})", info.fps));
    }
    if info.codebase_version != CODEBASE_VERSION {
        rep.push(ViolationKind::Schema, &p, None, format!("codebase_version {}", info.codebase_version));
    }
    for (key, dim) in [("observation.state", OBSERVATION_DIM), ("action", ACTION_DIM)] {
        match info.features.get(key) {
            Some(f) if f.shape == [dim as u32] && f.dtype == "float32" => {}
            Some(f) => rep.push(ViolationKind::Shape, &p, None, format!("{key} is {} {:?}, expected float32 [{dim}]", f.dtype, f.shape)),
            None => rep.push(ViolationKind::Schema, &p, None, format!("feature {key} missing")),
        }
    }
    for (key, f) in &info.features {
        if f.dtype != "video" {
            continue;
        }
        let fps = f.video_info.as_ref().and_then(|v| v.get("video.fps")).and_then(|v| v.as_u64());
        if fps != Some(DATASET_FPS as u64) {
            rep.push(ViolationKind::Fps, &p, None, format!("{key} video.fps {fps:?}"));
        }
        if f.shape.len() != 3 || f.shape[2] != 3 {
            rep.push(ViolationKind::Shape, &p, None, format!("{key} shape {:?}", f.shape));
        }
    }
    if info.total_tasks as usize != m.tasks.len() {
        rep.push(ViolationKind::CountMismatch, &p, None, format!("total_tasks {} but {} listed", info.total_tasks, m.tasks.len()));
    }
    for (i, t) in m.tasks.iter().enumerate() {
        if t.task_index as usize != i {
            rep.push(ViolationKind::Index, &root.join(TASKS_FILE), Some(i), format!("task_index {}", t.task_index));
        }
    }
}

fn check_episode(root: &Path, ep: u32, length: u32, first_index: u64, task: Option<u32>, rep: &mut ValidationReport) {
    let path = root.join(data_rel_path(ep));
    let table = match std::fs::File::open(&path).map_err(|e| e.to_string()).and_then(decode_parquet) {
        Ok(t) => t,
        Err(e) => {
            rep.push(ViolationKind::Unreadable, &path, None, format!("episode {ep}: {e}"));
            return;
        }
    };
    for e in &table.schema_errors {
        rep.push(ViolationKind::Schema, &path, None, format!("episode {ep}: {e}"));
    }
    if table.rows.len() != length as usize {
        rep.push(
            ViolationKind::CountMismatch,
            &path,
            None,
            format!("episode {ep}: {} parquet rows, manifest length {length}", table.rows.len()),
        );
    }
    let mut prev_ts = f64::NEG_INFINITY;
    for (i, r) in table.rows.iter().enumerate() {
        let row = Some(i);
        if r.episode_index != ep {
            rep.push(ViolationKind::Index, &path, row, format!("episode_index {} in episode {ep}", r.episode_index));
        }
        if r.frame_index as usize != i {
            rep.push(ViolationKind::Index, &path, row, format!("frame_index {}", r.frame_index));
        }
        if r.index != first_index + i as u64 {
            rep.push(ViolationKind::Index, &path, row, format!("index {} (expected {})", r.index, first_index + i as u64));
        }
        if task.is_some_and(|t| t != r.task_index) {
            rep.push(ViolationKind::Index, &path, row, format!("task_index {}", r.task_index));
        }
        if !r.timestamp.is_finite() || r.timestamp <= prev_ts {
            rep.push(ViolationKind::Timestamp, &path, row, format!("timestamp {} after {prev_ts}", r.timestamp));
        }
        prev_ts = r.timestamp;
        if r.state.iter().chain(r.action.iter()).any(|v| !v.is_finite()) {
            rep.push(ViolationKind::NonFinite, &path, row, "non-finite value");
            continue;
        }
        for (k, v) in r.state[9..12].iter().enumerate() {
            if !angle_in_range(*v) {
                rep.push(ViolationKind::Range, &path, row, format!("observation.state[{}] = {v}", 9 + k));
            }
        }
        for (k, v) in r.action[3..6].iter().enumerate() {
            if !angle_in_range(*v) {
                rep.push(ViolationKind::Range, &path, row, format!("action[{}] = {v}", 3 + k));
            }
        }
        for (name, v) in [("observation.state[12]", r.state[12]), ("action[6]", r.action[6])] {
            if v != 0.0 && v != 1.0 {
                rep.push(ViolationKind::Range, &path, row, format!("{name} = {v}, expected 0 or 1"));
            }
        }
    }
}

fn check_video(root: &Path, cam: &str, ep: u32, length: u32, m: &Manifest, rep: &mut ValidationReport) {
    let mode = m.info.video_mode;
    let path = root.join(video_rel_path(cam, ep, mode));
    let shape = m.info.features.get(&video_key(cam)).map(|f| f.shape.clone()).unwrap_or_default();
    let (h, w) = (shape.first().copied().unwrap_or(0), shape.get(1).copied().unwrap_or(0));
    match mode {
        VideoMode::Mp4 { .. } => {
            let info = match std::fs::read(&path).map_err(|e| e.to_string()).and_then(|b| read_mp4(&b).map_err(|e| e.to_string())) {
                Ok(i) => i,
                Err(e) => {
                    rep.push(ViolationKind::Unreadable, &path, None, format!("episode {ep} camera {cam}: {e}"));
                    return;
                }
            };
            if info.frame_count != length {
                rep.push(
                    ViolationKind::CountMismatch,
                    &path,
                    None,
                    format!("episode {ep} camera {cam}: {} video frames, manifest length {length}", info.frame_count),
                );
            }
            if (info.width, info.height) != (w, h) {
                rep.push(ViolationKind::Shape, &path, None, format!("{}x{} video, feature {w}x{h}", info.width, info.height));
            }
            if info.timescale / info.sample_delta.max(1) != DATASET_FPS {
                rep.push(ViolationKind::Fps, &path, None, format!("timescale {} delta {}", info.timescale, info.sample_delta));
            }
        }
        VideoMode::ImageSequence => {
            let entries = match std::fs::read_dir(&path) {
                Ok(d) => d,
                Err(e) => {
                    rep.push(ViolationKind::Unreadable, &path, None, format!("episode {ep} camera {cam}: {e}"));
                    return;
                }
            };
            let mut names: Vec<String> = entries
                .filter_map(|e| e.ok())
                .map(|e| e.file_name().to_string_lossy().into_owned())
                .filter(|n| n.ends_with(".png"))
                .collect();
            names.sort();
            if names.len() != length as usize {
                rep.push(
                    ViolationKind::CountMismatch,
                    &path,
                    None,
                    format!("episode {ep} camera {cam}: {} frames, manifest length {length}", names.len()),
                );
            }
            for (i, n) in names.iter().enumerate() {
                if *n != frame_file_name(i) {
                    rep.push(ViolationKind::Video, &path, Some(i), format!("unexpected frame file {n}"));
                    break;
                }
            }
            if let Some(first) = names.first() {
                match image::image_dimensions(path.join(first)) {
                    Ok(dims) if dims == (w, h) => {}
                    Ok(dims) => rep.push(ViolationKind::Shape, &path, Some(0), format!("{dims:?} frame, feature {w}x{h}")),
                    Err(e) => rep.push(ViolationKind::Unreadable, &path.join(first), None, e.to_string()),
                }
            }
        }
    }
}
