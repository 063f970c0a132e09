use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bus::{Bus, BusError, Payload, PayloadKind, TopicName};
use crate::clock::secs_to_ns;
use crate::messages::{topics, ImageFrame, RobotState};
use crate::planner::WorkspaceBounds;
use crate::pose_math::quat_to_rpy;

#[derive(Debug, thiserror::Error)]
pub enum CameraError {
    #[error("camera `{name}`: {reason}")]
    Source { name: String, reason: String },
    #[error(transparent)]
    Bus(#[from] BusError),
}

/// A producer of RGB frames with a fixed resolution.
pub trait FrameSource: Send {
    fn name(&self) -> &str;
    fn resolution(&self) -> (u32, u32);
    /// Produces the next frame. `state` is the latest arm feedback, if any.
    fn render(&mut self, state: Option<&RobotState>, stamp_ns: u64) -> ImageFrame;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum View {
    /// Looking along -x: image right is -y, image up is +z.
    Front,
    /// Looking down: image right is -y, image up is +x.
    Top,
}

/// Deterministic rasterization of the arm's end effector over a seeded
/// background texture.
pub struct SyntheticCamera {
    name: String,
    width: u32,
    height: u32,
    view: View,
    bounds: WorkspaceBounds,
    background: Vec<u8>,
}

impl SyntheticCamera {
    pub fn new(name: &str, width: u32, height: u32, view: View, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tile = 8u32;
        let (tw, th) = (width.div_ceil(tile), height.div_ceil(tile));
        let shades: Vec<[u8; 3]> = (0..tw * th)
            .map(|_| {
                let g = rng.gen_range(30..70u8);
                [g, g + rng.gen_range(0..10), g + rng.gen_range(0..20)]
            })
            .collect();
        let mut background = vec![0u8; (width * height * 3) as usize];
        for y in 0..height {
            for x in 0..width {
                let s = shades[((y / tile) * tw + x / tile) as usize];
                let i = ((y * width + x) * 3) as usize;
                background[i..i + 3].copy_from_slice(&s);
            }
        }
        Self { name: name.to_string(), width, height, view, bounds: WorkspaceBounds::default(), background }
    }

    /// Maps workspace coordinates (horizontal, vertical) to pixel coordinates.
    fn project(&self, h: f64, v: f64, h_range: [f64; 2], v_range: [f64; 2]) -> (f64, f64) {
        let margin = 0.1;
        let u = (h - h_range[0]) / (h_range[1] - h_range[0]);
        let w = (v - v_range[0]) / (v_range[1] - v_range[0]);
        let px = (margin + (1.0 - 2.0 * margin) * u) * self.width as f64;
        let py = (1.0 - (margin + (1.0 - 2.0 * margin) * w)) * self.height as f64;
        (px, py)
    }

    fn ranges(&self) -> ([f64; 2], [f64; 2]) {
        let b = &self.bounds;
        // image right is -y in both views
        let h = [-b.y[1], -b.y[0]];
        match self.view {
            View::Front => (h, b.z),
            View::Top => (h, b.x),
        }
    }

    fn put(buf: &mut [u8], width: u32, height: u32, x: i64, y: i64, c: [u8; 3]) {
        if x >= 0 && y >= 0 && (x as u32) < width && (y as u32) < height {
            let i = ((y as u32 * width + x as u32) * 3) as usize;
            buf[i..i + 3].copy_from_slice(&c);
        }
    }
}

impl FrameSource for SyntheticCamera {
    fn name(&self) -> &str {
        &self.name
    }

    fn resolution(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    fn render(&mut self, state: Option<&RobotState>, stamp_ns: u64) -> ImageFrame {
        let (w, h) = (self.width, self.height);
        let mut buf = self.background.clone();
        let (hr, vr) = self.ranges();

        // workspace outline
        let (x0, y0) = self.project(hr[0], vr[0], hr, vr);
        let (x1, y1) = self.project(hr[1], vr[1], hr, vr);
        let outline = [200, 200, 200];
        for x in x0.round() as i64..=x1.round() as i64 {
            Self::put(&mut buf, w, h, x, y0.round() as i64, outline);
            Self::put(&mut buf, w, h, x, y1.round() as i64, outline);
        }
        for y in y1.round() as i64..=y0.round() as i64 {
            Self::put(&mut buf, w, h, x0.round() as i64, y, outline);
            Self::put(&mut buf, w, h, x1.round() as i64, y, outline);
        }

        if let Some(s) = state {
            let p = s.ee_position;
            let (hv, vv) = match self.view {
                View::Front => (-p.y, p.z),
                View::Top => (-p.y, p.x),
            };
            let (cx, cy) = self.project(hv, vv, hr, vr);
            let r = (w.min(h) as f64 / 16.0).max(2.0);
            let color = if s.gripper_closed { [220, 40, 40] } else { [40, 200, 60] };
            let ri = r.ceil() as i64;
            for dy in -ri..=ri {
                for dx in -ri..=ri {
                    if ((dx * dx + dy * dy) as f64) <= r * r {
                        Self::put(&mut buf, w, h, cx.round() as i64 + dx, cy.round() as i64 + dy, color);
                    }
                }
            }
            // heading tick from the yaw angle
            let yaw = quat_to_rpy(&s.ee_orientation).rpy.yaw;
            for k in 0..=(2.0 * r) as i64 {
                let t = k as f64;
                let (ex, ey) = (cx + t * yaw.sin(), cy - t * yaw.cos());
                Self::put(&mut buf, w, h, ex.round() as i64, ey.round() as i64, [250, 220, 60]);
            }
        }
        ImageFrame { width: w, height: h, rgb: Arc::from(buf), stamp_ns }
    }
}

/// Replays a directory of PNG or JPEG images, looping at the end.
pub struct ImageSequenceCamera {
    name: String,
    width: u32,
    height: u32,
    frames: Vec<Arc<[u8]>>,
    next: usize,
}

impl ImageSequenceCamera {
    pub fn open(name: &str, dir: &Path) -> Result<Self, CameraError> {
        let err = |reason: String| CameraError::Source { name: name.to_string(), reason };
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| err(format!("{}: {e}", dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                matches!(
                    p.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref(),
                    Some("png" | "jpg" | "jpeg")
                )
            })
            .collect();
        paths.sort();
        if paths.is_empty() {
            return Err(err(format!("no images in {}", dir.display())));
        }
        let mut frames = Vec::with_capacity(paths.len());
        let mut size = None;
        for p in &paths {
            let img = image::open(p).map_err(|e| err(format!("{}: {e}", p.display())))?.to_rgb8();
            let dims = img.dimensions();
            if *size.get_or_insert(dims) != dims {
                return Err(err(format!("{} is {}x{}, expected {:?}", p.display(), dims.0, dims.1, size)));
            }
            frames.push(Arc::from(img.into_raw()));
        }
        let (width, height) = size.expect("at least one frame");
        Ok(Self { name: name.to_string(), width, height, frames, next: 0 })
    }
}

impl FrameSource for ImageSequenceCamera {
    fn name(&self) -> &str {
        &self.name
    }

    fn resolution(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    fn render(&mut self, _state: Option<&RobotState>, stamp_ns: u64) -> ImageFrame {
        let rgb = self.frames[self.next % self.frames.len()].clone();
        self.next += 1;
        ImageFrame { width: self.width, height: self.height, rgb, stamp_ns }
    }
}

/// Publishes one source on `<ns>/camera/<name>` at a fixed rate.
pub struct CameraNode {
    bus: Bus,
    source: Box<dyn FrameSource>,
    topic: TopicName,
    feedback: TopicName,
    period_ns: u64,
    next_due: Option<u64>,
    frozen: bool,
}

impl CameraNode {
    pub fn new(bus: &Bus, namespace: &str, source: Box<dyn FrameSource>, rate_hz: f64) -> Result<Self, CameraError> {
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(CameraError::Source { name: source.name().into(), reason: format!("bad rate {rate_hz}") });
        }
        let topic = TopicName::new(namespace, &topics::camera(source.name()))?;
        bus.advertise(&topic, PayloadKind::Frame)?;
        Ok(Self {
            bus: bus.clone(),
            feedback: TopicName::new(namespace, topics::ROBOT_FEEDBACK)?,
            source,
            topic,
            period_ns: secs_to_ns(1.0 / rate_hz).max(1),
            next_due: None,
            frozen: false,
        })
    }

    pub fn topic(&self) -> &TopicName {
        &self.topic
    }

    /// A frozen camera stops publishing, as a stalled USB device would.
    pub fn set_frozen(&mut self, frozen: bool) {
        self.frozen = frozen;
    }

    /// Publishes a frame if one is due. Returns whether one was published.
    pub fn spin_once(&mut self, now_ns: u64) -> Result<bool, CameraError> {
        let due = *self.next_due.get_or_insert(now_ns);
        if now_ns < due {
            return Ok(false);
        }
        let next = due + self.period_ns;
        self.next_due = Some(if next <= now_ns { now_ns + self.period_ns } else { next });
        if self.frozen {
            return Ok(false);
        }
        let state = match self.bus.latest(&self.feedback).map(|e| e.payload) {
            Some(Payload::RobotState(s)) => Some(s),
            _ => None,
        };
        let frame = self.source.render(state.as_ref(), now_ns);
        self.bus.publish(&self.topic, Payload::Frame(frame))?;
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose_math::{Quat, Vec3};

    fn state(x: f64, closed: bool) -> RobotState {
        RobotState {
            ee_position: Vec3::new(x, 0.0, 0.25),
            ee_orientation: Quat::IDENTITY,
            joints: [0.0; 6],
            gripper_closed: closed,
            command_seq: 0,
            stamp_ns: 0,
        }
    }

    #[test]
    fn synthetic_is_deterministic_and_tracks_state() {
        let mut a = SyntheticCamera::new("front", 64, 48, View::Top, 3);
        let mut b = SyntheticCamera::new("front", 64, 48, View::Top, 3);
        let s = state(0.4, false);
        let fa = a.render(Some(&s), 0);
        assert_eq!(fa.rgb, b.render(Some(&s), 0).rgb);
        assert_eq!(fa.byte_len(), 64 * 48 * 3);
        assert_ne!(fa.rgb, a.render(Some(&state(0.5, false)), 0).rgb);
        assert_ne!(fa.rgb, a.render(Some(&state(0.4, true)), 0).rgb);
        let mut c = SyntheticCamera::new("front", 64, 48, View::Top, 4);
        assert_ne!(fa.rgb, c.render(Some(&s), 0).rgb);
    }

    #[test]
    fn image_sequence_loops() {
        let dir = tempfile::tempdir().unwrap();
        for i in 0..3u8 {
            let img = image::RgbImage::from_pixel(4, 2, image::Rgb([i * 50, 0, 0]));
            img.save(dir.path().join(format!("f{i}.png"))).unwrap();
        }
        let mut cam = ImageSequenceCamera::open("wrist", dir.path()).unwrap();
        assert_eq!(cam.resolution(), (4, 2));
        let frames: Vec<u8> = (0..4).map(|_| cam.render(None, 0).rgb[0]).collect();
        assert_eq!(frames, vec![0, 50, 100, 0]);

        let img = image::RgbImage::new(5, 5);
        img.save(dir.path().join("z.png")).unwrap();
        assert!(ImageSequenceCamera::open("wrist", dir.path()).is_err());
    }
}
