//! LeRobot-style dataset layout and episode export.
//!
//! ```text
//! root/meta/info.json
//! root/meta/episodes.jsonl
//! root/meta/tasks.jsonl
//! root/data/chunk-000/episode_000000.parquet
//! root/videos/chunk-000/observation.images.<cam>/episode_000000.mp4
//! root/videos/chunk-000/observation.images.<cam>/episode_000000/frame_000000.png   (image-sequence mode)
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::episode::Episode;
use super::storage::SharedStorage;
use super::table::{encode_parquet, EpisodeRow};
use super::vectors::{ACTION_DIM, ACTION_NAMES, OBSERVATION_DIM, OBSERVATION_NAMES};
use super::video::{encode_mp4, encode_png_sequence, VideoMode};
use super::RecorderError;

pub const CODEBASE_VERSION: &str = "v2.0";
pub const DATASET_FPS: u32 = 20;
pub const CHUNKS_SIZE: u32 = 1000;
pub const DATA_PATH: &str = "data/chunk-{episode_chunk:03d}/episode_{episode_index:06d}.parquet";
pub const VIDEO_PATH_MP4: &str = "videos/chunk-{episode_chunk:03d}/{video_key}/episode_{episode_index:06d}.mp4";
pub const VIDEO_PATH_FRAMES: &str =
    "videos/chunk-{episode_chunk:03d}/{video_key}/episode_{episode_index:06d}/frame_{frame_index:06d}.png";

pub const META_DIR: &str = "meta";
pub const INFO_FILE: &str = "meta/info.json";
pub const EPISODES_FILE: &str = "meta/episodes.jsonl";
pub const TASKS_FILE: &str = "meta/tasks.jsonl";
const STAGING_DIR: &str = ".staging";

pub fn video_key(camera: &str) -> String {
    format!("observation.images.{camera}")
}

fn chunk(episode_index: u32) -> u32 {
    episode_index / CHUNKS_SIZE
}

pub fn data_rel_path(episode_index: u32) -> PathBuf {
    PathBuf::from(format!("data/chunk-{:03}/episode_{episode_index:06}.parquet", chunk(episode_index)))
}

/// File (mp4) or directory (image sequence) holding one camera's episode video.
pub fn video_rel_path(camera: &str, episode_index: u32, mode: VideoMode) -> PathBuf {
    let dir = format!("videos/chunk-{:03}/{}", chunk(episode_index), video_key(camera));
    match mode {
        VideoMode::Mp4 { .. } => PathBuf::from(format!("{dir}/episode_{episode_index:06}.mp4")),
        VideoMode::ImageSequence => PathBuf::from(format!("{dir}/episode_{episode_index:06}")),
    }
}

pub fn frame_file_name(frame_index: usize) -> String {
    format!("frame_{frame_index:06}.png")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub dtype: String,
    pub shape: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub names: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video_info: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub codebase_version: String,
    pub robot_type: String,
    pub fps: u32,
    pub total_episodes: u32,
    pub total_frames: u64,
    pub total_tasks: u32,
    pub total_videos: u32,
    pub total_chunks: u32,
    pub chunks_size: u32,
    pub video_mode: VideoMode,
    pub splits: BTreeMap<String, String>,
    pub data_path: String,
    pub video_path: String,
    pub features: BTreeMap<String, Feature>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMeta {
    pub episode_index: u32,
    pub tasks: Vec<String>,
    pub length: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskMeta {
    pub task_index: u32,
    pub task: String,
}

/// All metadata of a dataset root.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub info: DatasetInfo,
    pub episodes: Vec<EpisodeMeta>,
    pub tasks: Vec<TaskMeta>,
}

fn scalar(dtype: &str) -> Feature {
    Feature { dtype: dtype.into(), shape: vec![1], names: None, video_info: None }
}

pub fn build_features(cameras: &[(String, (u32, u32))], mode: VideoMode) -> BTreeMap<String, Feature> {
    let mut f = BTreeMap::new();
    f.insert("timestamp".into(), scalar("float64"));
    f.insert("frame_index".into(), scalar("uint32"));
    f.insert("episode_index".into(), scalar("uint32"));
    f.insert("index".into(), scalar("uint64"));
    f.insert("task_index".into(), scalar("uint32"));
    f.insert(
        "observation.state".into(),
        Feature {
            dtype: "float32".into(),
            shape: vec![OBSERVATION_DIM as u32],
            names: Some(OBSERVATION_NAMES.iter().map(|s| s.to_string()).collect()),
            video_info: None,
        },
    );
    f.insert(
        "action".into(),
        Feature {
            dtype: "float32".into(),
            shape: vec![ACTION_DIM as u32],
            names: Some(ACTION_NAMES.iter().map(|s| s.to_string()).collect()),
            video_info: None,
        },
    );
    let codec = match mode {
        VideoMode::Mp4 { .. } => "mjpeg",
        VideoMode::ImageSequence => "png",
    };
    for (cam, (w, h)) in cameras {
        f.insert(
            video_key(cam),
            Feature {
                dtype: "video".into(),
                shape: vec![*h, *w, 3],
                names: Some(vec!["height".into(), "width".into(), "channel".into()]),
                video_info: Some(json!({
                    "video.fps": DATASET_FPS,
                    "video.codec": codec,
                    "video.pix_fmt": "rgb24",
                    "has_audio": false,
                })),
            },
        );
    }
    f
}

impl Manifest {
    pub fn empty(cameras: &[(String, (u32, u32))], mode: VideoMode) -> Self {
        Self {
            info: DatasetInfo {
                codebase_version: CODEBASE_VERSION.into(),
                robot_type: "sim_arm".into(),
                fps: DATASET_FPS,
                total_episodes: 0,
                total_frames: 0,
                total_tasks: 0,
                total_videos: 0,
                total_chunks: 0,
                chunks_size: CHUNKS_SIZE,
                video_mode: mode,
                splits: BTreeMap::new(),
                data_path: DATA_PATH.into(),
                video_path: match mode {
                    VideoMode::Mp4 { .. } => VIDEO_PATH_MP4.into(),
                    VideoMode::ImageSequence => VIDEO_PATH_FRAMES.into(),
                },
                features: build_features(cameras, mode),
            },
            episodes: Vec::new(),
            tasks: Vec::new(),
        }
    }

    /// Camera names declared by the video features.
    pub fn cameras(&self) -> Vec<String> {
        self.info
            .features
            .iter()
            .filter(|(_, f)| f.dtype == "video")
            .filter_map(|(k, _)| k.strip_prefix("observation.images.").map(str::to_string))
            .collect()
    }

    pub fn info_json(&self) -> Vec<u8> {
        let mut s = serde_json::to_string_pretty(&self.info).expect("info serializes");
        s.push('\n');
        s.into_bytes()
    }

    pub fn episodes_jsonl(&self) -> Vec<u8> {
        jsonl(&self.episodes)
    }

    pub fn tasks_jsonl(&self) -> Vec<u8> {
        jsonl(&self.tasks)
    }

    pub fn parse(info: &[u8], episodes: &[u8], tasks: &[u8]) -> Result<Self, String> {
        let info: DatasetInfo = serde_json::from_slice(info).map_err(|e| format!("{INFO_FILE}: {e}"))?;
        Ok(Self { info, episodes: parse_jsonl(episodes, EPISODES_FILE)?, tasks: parse_jsonl(tasks, TASKS_FILE)? })
    }
}

fn jsonl<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut out = String::new();
    for it in items {
        out.push_str(&serde_json::to_string(it).expect("row serializes"));
        out.push('\n');
    }
    out.into_bytes()
}

pub fn parse_jsonl<T: for<'de> Deserialize<'de>>(bytes: &[u8], name: &str) -> Result<Vec<T>, String> {
    let text = std::str::from_utf8(bytes).map_err(|e| format!("{name}: {e}"))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("{name} line {}: {e}", i + 1)))
        .collect()
}

/// What one successful finalize added to the dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestDelta {
    pub episode_index: u32,
    pub length: u32,
    /// Global `index` of the episode's first row.
    pub first_index: u64,
    pub task_index: u32,
    pub data_file: PathBuf,
    pub video_paths: Vec<PathBuf>,
}

/// Writes finalized episodes under a dataset root through a [`SharedStorage`].
pub struct DatasetWriter {
    root: PathBuf,
    storage: SharedStorage,
    video: VideoMode,
    recovery_dir: PathBuf,
}

impl DatasetWriter {
    pub fn new(root: impl Into<PathBuf>, storage: SharedStorage, video: VideoMode) -> Self {
        let root = root.into();
        let recovery_dir = root.join("recovery");
        Self { root, storage, video, recovery_dir }
    }

    pub fn with_recovery_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.recovery_dir = dir.into();
        self
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn recovery_dir(&self) -> &Path {
        &self.recovery_dir
    }

    pub fn video_mode(&self) -> VideoMode {
        self.video
    }

    /// Current manifest, or `None` for a fresh root.
    pub fn load_manifest(&self) -> Result<Option<Manifest>, RecorderError> {
        let info_path = self.root.join(INFO_FILE);
        if !self.storage.exists(&info_path) {
            return Ok(None);
        }
        let read = |rel: &str| {
            let p = self.root.join(rel);
            if self.storage.exists(&p) {
                self.storage.read(&p).map_err(|e| RecorderError::Manifest(format!("{rel}: {e}")))
            } else {
                Ok(Vec::new())
            }
        };
        Manifest::parse(&read(INFO_FILE)?, &read(EPISODES_FILE)?, &read(TASKS_FILE)?)
            .map(Some)
            .map_err(RecorderError::Manifest)
    }
}

struct Built {
    episode_index: u32,
    first_index: u64,
    task_index: u32,
    parquet: Vec<u8>,
    /// Per camera: relative target and the files (one for mp4, many for frames).
    videos: Vec<(PathBuf, Vec<(PathBuf, Vec<u8>)>)>,
    manifest: Manifest,
}

fn build(ep: &Episode, writer: &DatasetWriter) -> Result<Built, RecorderError> {
    let cams: Vec<(String, (u32, u32))> = ep.cameras().iter().cloned().zip(ep.resolutions()).collect();
    let mut manifest = match writer.load_manifest()? {
        Some(m) => {
            let expected = build_features(&cams, writer.video);
            if m.info.features != expected || m.info.video_mode != writer.video {
                return Err(RecorderError::CameraMismatch(format!(
                    "episode cameras {:?} ({:?}) do not match dataset features",
                    cams, writer.video
                )));
            }
            m
        }
        None => Manifest::empty(&cams, writer.video),
    };
    let episode_index = manifest.info.total_episodes;
    let first_index = manifest.info.total_frames;
    let task_index = match manifest.tasks.iter().find(|t| t.task == ep.task()) {
        Some(t) => t.task_index,
        None => {
            let idx = manifest.tasks.len() as u32;
            manifest.tasks.push(TaskMeta { task_index: idx, task: ep.task().to_string() });
            idx
        }
    };

    let rows: Vec<EpisodeRow> = ep
        .frames()
        .iter()
        .map(|f| EpisodeRow {
            timestamp: f.timestamp,
            frame_index: f.frame_index,
            episode_index,
            index: first_index + f.frame_index as u64,
            task_index,
            state: f.observation.to_f32(),
            action: f.action.to_f32(),
        })
        .collect();
    let parquet = encode_parquet(&rows).map_err(RecorderError::Encode)?;

    let mut videos = Vec::new();
    for (ci, cam) in ep.cameras().iter().enumerate() {
        let frames: Vec<_> = ep.frames().iter().map(|f| f.images[ci].clone()).collect();
        let rel = video_rel_path(cam, episode_index, writer.video);
        let files = match writer.video {
            VideoMode::Mp4 { quality } => {
                let bytes = encode_mp4(&frames, DATASET_FPS, quality).map_err(|e| RecorderError::Encode(e.to_string()))?;
                vec![(PathBuf::new(), bytes)]
            }
            VideoMode::ImageSequence => encode_png_sequence(&frames)
                .map_err(|e| RecorderError::Encode(e.to_string()))?
                .into_iter()
                .enumerate()
                .map(|(i, b)| (PathBuf::from(frame_file_name(i)), b))
                .collect(),
        };
        videos.push((rel, files));
    }

    let length = ep.len() as u32;
    manifest.episodes.push(EpisodeMeta { episode_index, tasks: vec![ep.task().to_string()], length });
    let info = &mut manifest.info;
    info.total_episodes += 1;
    info.total_frames += length as u64;
    info.total_tasks = manifest.tasks.len() as u32;
    info.total_videos = info.total_episodes * cams.len() as u32;
    info.total_chunks = chunk(info.total_episodes - 1) + 1;
    info.splits = BTreeMap::from([("train".to_string(), format!("0:{}", info.total_episodes))]);

    Ok(Built { episode_index, first_index, task_index, parquet, videos, manifest })
}

fn io_err(what: &str, path: &Path, e: std::io::Error) -> String {
    format!("{what} {}: {e}", path.display())
}

/// Exports `ep` under the writer's root: everything is staged in a temp dir,
/// moved into place by rename, and the meta files are swapped last. On any
/// storage failure the installed pieces are rolled back, the episode is
/// spooled to the recovery directory, and the handle stays unfinalized.
pub fn finalize_episode(ep: &mut Episode, writer: &DatasetWriter) -> Result<ManifestDelta, RecorderError> {
    if ep.is_finalized() {
        return Err(RecorderError::AlreadyFinalized);
    }
    if ep.is_empty() {
        return Err(RecorderError::EmptyEpisode);
    }
    let built = build(ep, writer)?;
    match install(&built, writer) {
        Ok(()) => {
            ep.finalized = true;
            Ok(ManifestDelta {
                episode_index: built.episode_index,
                length: ep.len() as u32,
                first_index: built.first_index,
                task_index: built.task_index,
                data_file: writer.root.join(data_rel_path(built.episode_index)),
                video_paths: built.videos.iter().map(|(rel, _)| writer.root.join(rel)).collect(),
            })
        }
        Err(reason) => {
            let spooled_to = spool(ep, &built, writer).ok();
            Err(RecorderError::Disk { reason, spooled_to })
        }
    }
}

fn install(b: &Built, w: &DatasetWriter) -> Result<(), String> {
    let st = &w.storage;
    let staging = w.root.join(STAGING_DIR).join(format!("episode_{:06}", b.episode_index));
    if st.exists(&staging) {
        st.remove_dir_all(&staging).map_err(|e| io_err("clear", &staging, e))?;
    }

    // Stage.
    st.create_dir_all(&staging).map_err(|e| io_err("create", &staging, e))?;
    let staged_data = staging.join("data.parquet");
    st.write(&staged_data, &b.parquet).map_err(|e| io_err("write", &staged_data, e))?;
    let mut staged_videos = Vec::new();
    for (ci, (rel, files)) in b.videos.iter().enumerate() {
        let base = staging.join(format!("video_{ci}"));
        let staged = match w.video {
            VideoMode::Mp4 { .. } => {
                st.write(&base, &files[0].1).map_err(|e| io_err("write", &base, e))?;
                base
            }
            VideoMode::ImageSequence => {
                st.create_dir_all(&base).map_err(|e| io_err("create", &base, e))?;
                for (name, bytes) in files {
                    let p = base.join(name);
                    st.write(&p, bytes).map_err(|e| io_err("write", &p, e))?;
                }
                base
            }
        };
        staged_videos.push((staged, w.root.join(rel)));
    }
    let meta_dir = w.root.join(META_DIR);
    let metas = [
        (EPISODES_FILE, b.manifest.episodes_jsonl()),
        (TASKS_FILE, b.manifest.tasks_jsonl()),
        (INFO_FILE, b.manifest.info_json()),
    ];
    let mut staged_meta = Vec::new();
    for (rel, bytes) in &metas {
        let p = staging.join(Path::new(rel).file_name().unwrap());
        st.write(&p, bytes).map_err(|e| io_err("write", &p, e))?;
        staged_meta.push((p, w.root.join(rel)));
    }

    // Move payload into place, remembering what to undo.
    let mut installed: Vec<PathBuf> = Vec::new();
    let mut moves = vec![(staged_data, w.root.join(data_rel_path(b.episode_index)))];
    moves.extend(staged_videos);
    let result = (|| {
        for (from, to) in &moves {
            if let Some(parent) = to.parent() {
                st.create_dir_all(parent).map_err(|e| io_err("create", parent, e))?;
            }
            st.rename(from, to).map_err(|e| io_err("rename", to, e))?;
            installed.push(to.clone());
        }
        st.create_dir_all(&meta_dir).map_err(|e| io_err("create", &meta_dir, e))?;
        Ok::<(), String>(())
    })();
    if let Err(e) = result {
        rollback(w, &installed);
        let _ = st.remove_dir_all(&staging);
        return Err(e);
    }

    // Swap meta files; on failure restore the previous contents.
    let previous: Vec<Option<Vec<u8>>> =
        staged_meta.iter().map(|(_, to)| if st.exists(to) { st.read(to).ok() } else { None }).collect();
    for (i, (from, to)) in staged_meta.iter().enumerate() {
        if let Err(e) = st.rename(from, to) {
            for ((_, done), prev) in staged_meta[..i].iter().zip(&previous) {
                let _ = match prev {
                    Some(bytes) => st.write(done, bytes),
                    None => st.remove_file(done),
                };
            }
            rollback(w, &installed);
            let _ = st.remove_dir_all(&staging);
            return Err(io_err("rename", to, e));
        }
    }
    let _ = st.remove_dir_all(&staging);
    let _ = st.remove_dir_all(&w.root.join(STAGING_DIR));
    Ok(())
}

fn rollback(w: &DatasetWriter, installed: &[PathBuf]) {
    for p in installed {
        let r = if p.extension().is_some() { w.storage.remove_file(p) } else { w.storage.remove_dir_all(p) };
        if let Err(e) = r {
            tracing::warn!("rollback of {} failed: {e}", p.display());
        }
    }
}

/// Writes the episode's encoded bytes plus a small description to a fresh
/// directory under the recovery root.
fn spool(ep: &Episode, b: &Built, w: &DatasetWriter) -> Result<PathBuf, String> {
    let st = &w.storage;
    let mut dir = w.recovery_dir.join(format!("episode_at_{}", ep.start_ns()));
    let mut n = 1;
    while st.exists(&dir) {
        dir = w.recovery_dir.join(format!("episode_at_{}_{n}", ep.start_ns()));
        n += 1;
    }
    st.create_dir_all(&dir).map_err(|e| io_err("create", &dir, e))?;
    st.write(&dir.join("data.parquet"), &b.parquet).map_err(|e| io_err("write", &dir, e))?;
    for (cam, (_, files)) in ep.cameras().iter().zip(&b.videos) {
        match w.video {
            VideoMode::Mp4 { .. } => {
                let p = dir.join(format!("{cam}.mp4"));
                st.write(&p, &files[0].1).map_err(|e| io_err("write", &p, e))?;
            }
            VideoMode::ImageSequence => {
                let sub = dir.join(cam);
                st.create_dir_all(&sub).map_err(|e| io_err("create", &sub, e))?;
                for (name, bytes) in files {
                    st.write(&sub.join(name), bytes).map_err(|e| io_err("write", &sub, e))?;
                }
            }
        }
    }
    let desc = json!({
        "task": ep.task(),
        "length": ep.len(),
        "cameras": ep.cameras(),
        "start_ns": ep.start_ns(),
        "intended_episode_index": b.episode_index,
    });
    let p = dir.join("episode.json");
    st.write(&p, serde_json::to_string_pretty(&desc).unwrap().as_bytes()).map_err(|e| io_err("write", &p, e))?;
    Ok(dir)
}
