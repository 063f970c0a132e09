use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use teleop_core::bus::{Bus, Payload, TopicName};
use teleop_core::clock::{VirtualClock, NANOS_PER_MILLI};
use teleop_core::messages::{topics, GripperCommand, RecorderControl, RobotState, TargetPose};
use teleop_core::pose_math::{quat_to_rpy, rpy_to_quat, wrap_angle, Quat, Rpy, Vec3};
use teleop_core::recorder::dataset::{data_rel_path, video_rel_path, INFO_FILE};
use teleop_core::recorder::table::{decode_parquet, encode_parquet};
use teleop_core::recorder::video::read_mp4;
use teleop_core::recorder::{
    finalize_episode, validate_dataset, CameraConfig, CameraNode, DatasetWriter, Episode, EpisodeOutcome, FsStorage,
    InstrumentedStorage, RecorderConfig, RecorderError, RecorderNode, SharedStorage, Snapshot, VideoMode, View,
    ViolationKind,
};

const MS: u64 = NANOS_PER_MILLI;

type Motion = Box<dyn Fn(u64) -> (Vec3, Rpy)>;

/// Virtual-clock rig: feedback at 100 Hz, cameras at their own rate, a target
/// stream at 50 Hz, and the recorder under test, all stepped per millisecond.
struct Rig {
    clock: VirtualClock,
    bus: Bus,
    cams: Vec<CameraNode>,
    rec: RecorderNode,
    feedback: TopicName,
    target: TopicName,
    control: TopicName,
    motion: Motion,
    publish_targets: bool,
    now_ms: u64,
}

fn config(root: &Path, video: VideoMode) -> RecorderConfig {
    RecorderConfig {
        output_root: root.to_path_buf(),
        video,
        cameras: vec![
            CameraConfig { width: 64, height: 48, ..CameraConfig::synthetic("cam_front", View::Front, 1) },
            CameraConfig { width: 64, height: 48, ..CameraConfig::synthetic("cam_top", View::Top, 2) },
        ],
        ..RecorderConfig::default()
    }
}

fn still() -> Motion {
    Box::new(|_| (Vec3::new(0.3, 0.0, 0.25), Rpy::ZERO))
}

impl Rig {
    fn new(cfg: &RecorderConfig, storage: SharedStorage, motion: Motion) -> Self {
        let clock = VirtualClock::new(0);
        let bus = Bus::new(Arc::new(clock.clone()));
        let cams = cfg.cameras.iter().map(|c| CameraNode::new(&bus, "", c.open().unwrap(), c.rate_hz).unwrap()).collect();
        let rec = RecorderNode::new(&bus, "", cfg, storage).unwrap();
        let t = |b: &str| TopicName::new("", b).unwrap();
        Self {
            clock,
            cams,
            rec,
            feedback: t(topics::ROBOT_FEEDBACK),
            target: t(topics::TARGET_POSE),
            control: t(topics::RECORDER_CONTROL),
            bus,
            motion,
            publish_targets: false,
            now_ms: 0,
        }
    }

    fn run_to(&mut self, t_ms: u64) {
        while self.now_ms < t_ms {
            self.now_ms += 1;
            let now = self.now_ms * MS;
            self.clock.advance_to(now);
            let (p, r) = (self.motion)(self.now_ms);
            let q = rpy_to_quat(&r).unwrap();
            if self.now_ms % 10 == 0 {
                let s = RobotState {
                    ee_position: p,
                    ee_orientation: q,
                    joints: [0.1, -0.2, 0.3, 0.0, 0.5, -0.6],
                    gripper_closed: false,
                    command_seq: 0,
                    stamp_ns: now,
                };
                self.bus.publish(&self.feedback, Payload::RobotState(s)).unwrap();
            }
            if self.publish_targets && self.now_ms % 20 == 0 {
                let t = TargetPose { position: p, orientation: q, stamp_ns: now };
                self.bus.publish(&self.target, Payload::Target(t)).unwrap();
            }
            for c in &mut self.cams {
                c.spin_once(now).unwrap();
            }
            self.rec.spin_once(now).unwrap();
        }
    }

    fn control(&self, c: RecorderControl) {
        self.bus.publish(&self.control, Payload::RecorderControl(c)).unwrap();
    }

    /// Records from `start_ms` for `len_ms` and returns the outcome.
    fn episode(&mut self, start_ms: u64, len_ms: u64, task: &str) -> EpisodeOutcome {
        self.run_to(start_ms - 1);
        self.control(RecorderControl::Start { task: task.into() });
        self.run_to(start_ms + len_ms - 1);
        self.control(RecorderControl::Stop);
        self.run_to(start_ms + len_ms);
        self.rec.outcomes().last().cloned().unwrap()
    }
}

fn finalized(o: &EpisodeOutcome) -> &teleop_core::recorder::ManifestDelta {
    match o {
        EpisodeOutcome::Finalized(d) => d,
        other => panic!("expected finalized episode, got {other:?}"),
    }
}

fn rows(root: &Path, ep: u32) -> Vec<teleop_core::recorder::table::EpisodeRow> {
    let t = decode_parquet(std::fs::File::open(root.join(data_rel_path(ep))).unwrap()).unwrap();
    assert!(t.schema_errors.is_empty(), "{:?}", t.schema_errors);
    t.rows
}

#[test]
fn five_second_episode_exports_100_frames_per_stream() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), VideoMode::default());
    let mut rig = Rig::new(&cfg, FsStorage::shared(), still());
    let out = rig.episode(1000, 5000, "pick");
    let d = finalized(&out);
    assert_eq!(d.length, 100);
    assert_eq!(d.episode_index, 0);
    assert_eq!(d.video_paths.len(), 2);

    let rows = rows(dir.path(), 0);
    assert_eq!(rows.len(), 100);
    for cam in ["cam_front", "cam_top"] {
        let bytes = std::fs::read(dir.path().join(video_rel_path(cam, 0, cfg.video))).unwrap();
        let info = read_mp4(&bytes).unwrap();
        assert_eq!(info.frame_count, 100);
        assert_eq!((info.width, info.height), (64, 48));
        let first = image::load_from_memory(info.sample(&bytes, 0).unwrap()).unwrap();
        assert_eq!((first.width(), first.height()), (64, 48));
    }
    let manifest = rig.rec.writer().load_manifest().unwrap().unwrap();
    assert_eq!(manifest.episodes[0].length, 100);
    assert_eq!(manifest.info.fps, 20);

    // timing: strictly increasing, median interval 50 ms +- 1 ms
    let mut gaps: Vec<f64> = rows.windows(2).map(|w| w[1].timestamp - w[0].timestamp).collect();
    assert!(gaps.iter().all(|g| *g > 0.0));
    gaps.sort_by(f64::total_cmp);
    assert!((gaps[gaps.len() / 2] - 0.050).abs() <= 0.001, "median {}", gaps[gaps.len() / 2]);

    let report = validate_dataset(dir.path());
    assert!(report.is_ok(), "{:#?}", report.violations);
    assert_eq!(report.frames, 100);
    // validating twice is stable
    assert!(validate_dataset(dir.path()).is_ok());
}

#[test]
fn frozen_camera_skips_ticks_but_keeps_indices_consecutive() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), VideoMode::ImageSequence);
    let mut rig = Rig::new(&cfg, FsStorage::shared(), still());
    rig.run_to(999);
    rig.control(RecorderControl::Start { task: "pick".into() });
    rig.run_to(3000);
    rig.cams[1].set_frozen(true);
    rig.run_to(4000);
    rig.cams[1].set_frozen(false);
    let skipped_before_stop = rig.rec.status().skipped_ticks;
    rig.run_to(5999);
    rig.control(RecorderControl::Stop);
    rig.run_to(6000);
    let d = finalized(rig.rec.outcomes().last().unwrap()).clone();

    assert!((18..=22).contains(&skipped_before_stop), "skipped {skipped_before_stop}");
    assert_eq!(d.length as u64 + skipped_before_stop, 100);
    let rows = rows(dir.path(), 0);
    assert!(rows.iter().enumerate().all(|(i, r)| r.frame_index as usize == i));
    let max_gap = rows.windows(2).map(|w| w[1].timestamp - w[0].timestamp).fold(0.0, f64::max);
    assert!(max_gap > 0.9 && max_gap < 1.1, "gap {max_gap}");
    let report = validate_dataset(dir.path());
    assert!(report.is_ok(), "{:#?}", report.violations);
}

#[test]
fn empty_episode_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), VideoMode::default());
    let mut rig = Rig::new(&cfg, FsStorage::shared(), still());
    rig.run_to(500);
    rig.control(RecorderControl::Start { task: "noop".into() });
    rig.control(RecorderControl::Stop);
    rig.run_to(501);
    match rig.rec.outcomes().last().unwrap() {
        EpisodeOutcome::Failed { reason, .. } => assert_eq!(reason, "empty episode"),
        other => panic!("{other:?}"),
    }
    assert!(!dir.path().join(INFO_FILE).exists());
    assert_eq!(rig.rec.last_error(), Some("empty episode"));
}

#[test]
fn second_episode_continues_indices() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), VideoMode::default());
    let mut rig = Rig::new(&cfg, FsStorage::shared(), still());
    let a = finalized(&rig.episode(1000, 2000, "pick")).clone();
    let b = finalized(&rig.episode(4000, 1500, "place")).clone();
    assert_eq!((a.episode_index, a.length, a.first_index), (0, 40, 0));
    assert_eq!((b.episode_index, b.length, b.first_index), (1, 30, 40));
    assert_eq!(b.task_index, 1);
    let r = rows(dir.path(), 1);
    assert_eq!(r[0].index, 40);
    assert_eq!(r.last().unwrap().index, 69);
    assert!(r.iter().all(|x| x.episode_index == 1 && x.task_index == 1));
    let c = finalized(&rig.episode(6000, 500, "pick")).clone();
    assert_eq!((c.episode_index, c.first_index, c.task_index), (2, 70, 0));
    let report = validate_dataset(dir.path());
    assert!(report.is_ok(), "{:#?}", report.violations);
    assert_eq!((report.episodes, report.frames), (3, 80));
}

fn snapshot(yaw: f64, t_ns: u64) -> Snapshot {
    let q = rpy_to_quat(&Rpy::new(0.0, 0.0, yaw)).unwrap();
    let state = RobotState {
        ee_position: Vec3::new(0.3, 0.0, 0.2),
        ee_orientation: q,
        joints: [0.0; 6],
        gripper_closed: false,
        command_seq: 0,
        stamp_ns: t_ns,
    };
    Snapshot {
        feedback: state,
        frames: vec![],
        target: Some(TargetPose { position: Vec3::new(0.3, 0.0, 0.2), orientation: q, stamp_ns: t_ns }),
        gripper_cmd: Some(true),
    }
}

#[test]
fn finalize_twice_errors() {
    let dir = tempfile::tempdir().unwrap();
    let writer = DatasetWriter::new(dir.path(), FsStorage::shared(), VideoMode::ImageSequence);
    let mut ep = Episode::new("t", vec![], 0, 1 << 20);
    ep.push(&snapshot(0.0, 0), 0).unwrap();
    ep.push(&snapshot(0.1, 50 * MS), 50 * MS).unwrap();
    finalize_episode(&mut ep, &writer).unwrap();
    let err = finalize_episode(&mut ep, &writer).unwrap_err();
    assert_eq!(err.to_string(), "already finalized");
    assert!(matches!(err, RecorderError::AlreadyFinalized));
}

#[test]
fn no_storage_writes_while_recording() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), VideoMode::default());
    let mut rig = Rig::new(&cfg, FsStorage::shared(), still());
    // rebuild the recorder over an instrumented store tied to the rig clock
    let storage = InstrumentedStorage::new(Arc::new(rig.clock.clone()));
    rig.rec = RecorderNode::new(&rig.bus, "", &cfg, storage.clone()).unwrap();

    let first = finalized(&rig.episode(1000, 3000, "a")).clone();
    let second = finalized(&rig.episode(5000, 2000, "b")).clone();
    assert_eq!((first.length, second.length), (60, 40));

    let calls = storage.calls();
    assert!(calls.iter().any(|c| c.op.mutates()), "finalize must write");
    for (start, stop) in [(1000 * MS, 4000 * MS), (5000 * MS, 7000 * MS)] {
        let during: Vec<_> = calls.iter().filter(|c| c.op.mutates() && c.at_ns >= start && c.at_ns < stop).collect();
        assert!(during.is_empty(), "storage mutated while recording: {during:?}");
        assert!(calls.iter().any(|c| c.op.mutates() && c.at_ns == stop), "finalize happens at stop");
    }
}

#[test]
fn disk_failure_spools_episode_and_leaves_manifest_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let clock = VirtualClock::new(0);
    let storage = InstrumentedStorage::new(Arc::new(clock.clone()));
    let writer = DatasetWriter::new(dir.path(), storage.clone(), VideoMode::ImageSequence);

    let mut first = Episode::new("t", vec![], 0, 1 << 20);
    first.push(&snapshot(0.0, 0), 0).unwrap();
    finalize_episode(&mut first, &writer).unwrap();
    let info_before = std::fs::read(dir.path().join(INFO_FILE)).unwrap();

    for fragment in ["data/chunk-000", "meta/episodes", "meta/info.json"] {
        storage.fail_paths_containing(Some(fragment));
        let mut ep = Episode::new("t", vec![], 1_000, 1 << 20);
        for k in 0..5u64 {
            ep.push(&snapshot(0.1 * k as f64, k * 50 * MS), k * 50 * MS).unwrap();
        }
        let err = finalize_episode(&mut ep, &writer).unwrap_err();
        let RecorderError::Disk { spooled_to: Some(spool), .. } = &err else { panic!("{fragment}: {err:?}") };
        assert!(spool.join("data.parquet").exists(), "{fragment}");
        assert!(spool.join("episode.json").exists());
        assert!(!ep.is_finalized());
        assert_eq!(std::fs::read(dir.path().join(INFO_FILE)).unwrap(), info_before, "{fragment}");
        assert!(!dir.path().join(data_rel_path(1)).exists(), "{fragment}: rolled back");
        let report = validate_dataset(dir.path());
        assert!(report.is_ok(), "{fragment}: {:#?}", report.violations);

        // the same handle succeeds once the disk recovers
        storage.fail_paths_containing(None);
        let d = finalize_episode(&mut ep, &writer).unwrap();
        assert_eq!(d.episode_index, 1);
        assert_eq!(d.first_index, 1);
        std::fs::remove_dir_all(dir.path()).unwrap();
        std::fs::create_dir_all(dir.path()).unwrap();
        let mut again = Episode::new("t", vec![], 0, 1 << 20);
        again.push(&snapshot(0.0, 0), 0).unwrap();
        finalize_episode(&mut again, &writer).unwrap();
    }
}

#[test]
fn memory_ceiling_aborts_episode() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), VideoMode::default());
    cfg.memory_ceiling_mb = 1;
    cfg.cameras.iter_mut().for_each(|c| {
        c.width = 320;
        c.height = 240;
    });
    let mut rig = Rig::new(&cfg, FsStorage::shared(), still());
    let out = rig.episode(1000, 2000, "big");
    let EpisodeOutcome::Failed { reason, .. } = out else { panic!("{out:?}") };
    assert!(reason.contains("memory ceiling"), "{reason}");
    assert!(!rig.rec.is_recording());
    assert!(!dir.path().join(INFO_FILE).exists());
    // 2 x 230400 bytes per frame: the third frame would cross 1 MiB
    assert!(reason.contains("2 frames discarded"), "{reason}");
}

#[test]
fn wrapped_actions_integrate_back_to_final_orientation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), VideoMode::ImageSequence);
    // yaw sweeps 3 full turns through the +-pi seam, with roll oscillating
    let motion: Motion = Box::new(|ms| {
        let t = ms as f64 / 1000.0;
        (Vec3::new(0.3 + 0.02 * t.sin(), 0.0, 0.25), Rpy::new(0.4 * (2.0 * t).sin(), 0.1, (PI + 3.0 * t).rem_euclid(2.0 * PI) - PI))
    });
    let mut rig = Rig::new(&cfg, FsStorage::shared(), motion);
    rig.publish_targets = true;
    rig.run_to(999);
    rig.control(RecorderControl::Start { task: "spin".into() });
    rig.run_to(5999);
    let ep = rig.rec.episode().unwrap();
    let frames = ep.frames();
    assert_eq!(frames.len(), 100);

    let initial = frames[0].basis.rpy;
    let fin = frames.last().unwrap().basis.rpy;
    let mut sum = [0.0f64; 3];
    let mut crossed = false;
    for w in frames.windows(2) {
        crossed |= (w[1].basis.rpy.yaw - w[0].basis.rpy.yaw).abs() > PI;
    }
    for f in frames {
        for k in 0..3 {
            let d = f.action.0[3 + k];
            assert!((-PI..PI).contains(&d), "delta {d}");
            sum[k] += d;
        }
        // never a ~2pi jump
        assert!(f.action.0[5].abs() < 0.5);
    }
    assert!(crossed, "motion must cross the seam");
    for (k, (a, b)) in [(initial.roll, fin.roll), (initial.pitch, fin.pitch), (initial.yaw, fin.yaw)].into_iter().enumerate() {
        let err = wrap_angle(a + sum[k] - b).unwrap();
        assert!(err.abs() < 1e-6, "component {k}: {err}");
    }

    rig.control(RecorderControl::Stop);
    rig.run_to(6000);
    finalized(rig.rec.outcomes().last().unwrap());
    let report = validate_dataset(dir.path());
    assert!(report.is_ok(), "{:#?}", report.violations);
}

#[test]
fn gripper_and_clutched_actions() {
    // without targets the basis is feedback; a still arm yields zero deltas
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), VideoMode::ImageSequence);
    let mut rig = Rig::new(&cfg, FsStorage::shared(), still());
    let gripper = TopicName::new("", topics::GRIPPER_CMD).unwrap();
    rig.run_to(999);
    rig.control(RecorderControl::Start { task: "hold".into() });
    rig.run_to(1500);
    rig.bus.publish(&gripper, Payload::Gripper(GripperCommand { closed: true, stamp_ns: 1500 * MS })).unwrap();
    rig.run_to(1999);
    rig.control(RecorderControl::Stop);
    rig.run_to(2000);
    finalized(rig.rec.outcomes().last().unwrap());
    let r = rows(dir.path(), 0);
    assert_eq!(r.len(), 20);
    assert!(r.iter().all(|x| x.action[..6].iter().all(|v| *v == 0.0)));
    assert!(r[..11].iter().all(|x| x.action[6] == 0.0));
    assert!(r[11..].iter().all(|x| x.action[6] == 1.0));
}

#[test]
fn image_sequence_export_is_byte_reproducible() {
    let run = |root: &Path| {
        let cfg = config(root, VideoMode::ImageSequence);
        let mut rig = Rig::new(&cfg, FsStorage::shared(), Box::new(|ms| (Vec3::new(0.3, 0.001 * (ms % 997) as f64 / 10.0, 0.25), Rpy::ZERO)));
        rig.publish_targets = true;
        rig.episode(1000, 2000, "pick");
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(a.path());
    run(b.path());
    let files = |root: &Path| {
        let mut v: Vec<(String, Vec<u8>)> = walk(root).into_iter().map(|p| (p.strip_prefix(root).unwrap().display().to_string(), std::fs::read(&p).unwrap())).collect();
        v.sort();
        v
    };
    let (fa, fb) = (files(a.path()), files(b.path()));
    assert!(fa.len() > 40);
    assert_eq!(fa, fb);
}

fn walk(p: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(p).unwrap() {
        let path = e.unwrap().path();
        if path.is_dir() {
            out.extend(walk(&path));
        } else {
            out.push(path);
        }
    }
    out
}

#[test]
fn validator_flags_injected_faults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), VideoMode::default());
    let mut rig = Rig::new(&cfg, FsStorage::shared(), still());
    rig.episode(1000, 1000, "a");
    rig.episode(3000, 1000, "a");
    assert!(validate_dataset(dir.path()).is_ok());

    // drop one parquet row from episode 1
    let path = dir.path().join(data_rel_path(1));
    let original = std::fs::read(&path).unwrap();
    let mut r = rows(dir.path(), 1);
    r.remove(7);
    std::fs::write(&path, encode_parquet(&r).unwrap()).unwrap();
    let report = validate_dataset(dir.path());
    let hit = report.violations.iter().find(|v| v.kind == ViolationKind::CountMismatch).expect("count mismatch");
    assert!(hit.message.contains("episode 1"), "{hit}");
    assert!(hit.file.ends_with(data_rel_path(1)));

    // out-of-range action yaw
    std::fs::write(&path, &original).unwrap();
    let mut r = rows(dir.path(), 1);
    r[3].action[5] = 3.5;
    std::fs::write(&path, encode_parquet(&r).unwrap()).unwrap();
    let report = validate_dataset(dir.path());
    assert_eq!(report.violations.len(), 1, "{:#?}", report.violations);
    let v = &report.violations[0];
    assert_eq!((v.kind, v.row), (ViolationKind::Range, Some(3)));

    // truncated video and missing file are reported, not thrown
    std::fs::write(&path, &original).unwrap();
    let vid = dir.path().join(video_rel_path("cam_top", 0, cfg.video));
    let bytes = std::fs::read(&vid).unwrap();
    std::fs::write(&vid, &bytes[..bytes.len() / 2]).unwrap();
    std::fs::remove_file(dir.path().join(video_rel_path("cam_front", 1, cfg.video))).unwrap();
    let report = validate_dataset(dir.path());
    assert_eq!(report.violations.len(), 2, "{:#?}", report.violations);
    assert!(report.violations.iter().all(|v| v.kind == ViolationKind::Unreadable));

    // fps tampering
    let info = std::fs::read_to_string(dir.path().join(INFO_FILE)).unwrap().replacen("\"fps\": 20", "\"fps\": 30", 1);
    std::fs::write(dir.path().join(INFO_FILE), info).unwrap();
    assert!(validate_dataset(dir.path()).violations.iter().any(|v| v.kind == ViolationKind::Fps));

    // missing root
    let report = validate_dataset(&dir.path().join("nope"));
    assert!(!report.is_ok());
}

#[test]
fn observation_vector_matches_feedback() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), VideoMode::ImageSequence);
    let yaw = 179f64.to_radians();
    let mut rig = Rig::new(&cfg, FsStorage::shared(), Box::new(move |_| (Vec3::new(0.31, -0.05, 0.19), Rpy::new(0.2, -0.3, yaw))));
    rig.episode(1000, 500, "obs");
    let r = rows(dir.path(), 0);
    let s = r[0].state;
    let expect = [0.1, -0.2, 0.3, 0.0, 0.5, -0.6, 0.31, -0.05, 0.19, 0.2, -0.3, yaw, 0.0];
    for (k, (a, b)) in s.iter().zip(expect).enumerate() {
        assert!((*a as f64 - b).abs() < 1e-6, "state[{k}] {a} vs {b}");
    }
    let q: Quat = rpy_to_quat(&Rpy::new(0.2, -0.3, yaw)).unwrap();
    assert!((quat_to_rpy(&q).rpy.yaw - yaw).abs() < 1e-9);
}

#[test]
fn config_validation_names_fields() {
    let mut cfg = RecorderConfig::default();
    cfg.cameras[1].name = "cam_front".into();
    assert!(cfg.validate().unwrap_err().to_string().contains("cameras[1].name"));
    let cfg = RecorderConfig { freshness_window_ms: 0.0, ..RecorderConfig::default() };
    assert!(cfg.validate().unwrap_err().to_string().contains("freshness_window_ms"));
    let cfg = RecorderConfig { video: VideoMode::Mp4 { quality: 0 }, ..RecorderConfig::default() };
    assert!(cfg.validate().unwrap_err().to_string().contains("quality"));
    let text = toml::to_string(&RecorderConfig::default()).unwrap();
    let back: RecorderConfig = toml::from_str(&text).unwrap();
    assert_eq!(back, RecorderConfig::default());
}
