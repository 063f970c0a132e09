use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use tracing::{info, warn};

use super::profile::{ClockMode, ControllerEndpoint, LaunchProfile};
use super::OrchestratorError;
use crate::bridge::controller::{MockController, MockControllerServer, SharedController};
use crate::bridge::{BridgeNode, InProcessBridge, RobotBridge, TcpLineBridge};
use crate::bus::{Bus, Payload, TopicName};
use crate::clock::{Clock, MonotonicClock, SharedClock, VirtualClock, NANOS_PER_MILLI};
use crate::gateway::{serve, GatewayClient, GatewayError, GatewayHandle};
use crate::messages::{topics, PlannerStatus, RobotState};
use crate::planner::PlannerNode;
use crate::recorder::{CameraNode, CameraSource, EpisodeOutcome, FsStorage, RecorderNode, SharedStorage};

/// Extra knobs that are not part of a profile.
#[derive(Clone, Default)]
pub struct LaunchOptions {
    pub clock: Option<ClockMode>,
    pub gateway_bind: Option<String>,
    /// Replaces every arm's recorder root: `<root>` for one arm, `<root>/<name>` for several.
    pub output_root: Option<PathBuf>,
    pub seed: Option<u64>,
    pub storage: Option<SharedStorage>,
}

/// Per-namespace pipeline.
pub struct ArmRuntime {
    pub namespace: String,
    pub planner: PlannerNode,
    pub bridge: BridgeNode<Box<dyn RobotBridge>>,
    pub cameras: Vec<CameraNode>,
    pub recorder: Option<RecorderNode>,
    pub controller: SharedController,
    pub output_root: PathBuf,
}

impl ArmRuntime {
    fn tick(&mut self, now: u64) -> Result<(), OrchestratorError> {
        let c = |e: &dyn std::fmt::Display| OrchestratorError::Component(format!("{}: {e}", self.namespace));
        self.planner.spin_once().map_err(|e| c(&e))?;
        self.bridge.spin_once(now).map_err(|e| c(&e))?;
        for cam in &mut self.cameras {
            cam.spin_once(now).map_err(|e| c(&e))?;
        }
        if let Some(r) = &mut self.recorder {
            r.spin_once(now).map_err(|e| c(&e))?;
        }
        Ok(())
    }
}

/// Everything that ticks, in a fixed order per namespace.
pub struct Executor {
    pub arms: Vec<ArmRuntime>,
}

impl Executor {
    pub fn tick(&mut self, now: u64) -> Result<(), OrchestratorError> {
        for arm in &mut self.arms {
            arm.tick(now)?;
        }
        Ok(())
    }

    pub fn arm(&self, namespace: &str) -> Option<&ArmRuntime> {
        self.arms.iter().find(|a| a.namespace == namespace)
    }

    pub fn arm_mut(&mut self, namespace: &str) -> Option<&mut ArmRuntime> {
        self.arms.iter_mut().find(|a| a.namespace == namespace)
    }
}

/// A launched profile: one gateway plus a planner, bridge, cameras and
/// recorder per namespace, all on one bus.
///
/// Under [`ClockMode::Virtual`] nothing moves until [`System::run_until`] is
/// called; under [`ClockMode::Wall`] a driver thread ticks the executor.
pub struct System {
    profile: LaunchProfile,
    mode: ClockMode,
    virtual_clock: Option<VirtualClock>,
    bus: Bus,
    gateway: Option<GatewayHandle>,
    exec: Arc<Mutex<Executor>>,
    tick_ns: u64,
    driver: Option<(Arc<AtomicBool>, JoinHandle<()>)>,
    servers: Vec<MockControllerServer>,
}

fn arm_dir_name(namespace: &str) -> String {
    let s = namespace.trim_start_matches('/').replace('/', "_");
    if s.is_empty() {
        "default".into()
    } else {
        s
    }
}

impl System {
    pub fn launch(profile: &LaunchProfile, opts: LaunchOptions) -> Result<Self, OrchestratorError> {
        let mut profile = profile.clone();
        if let Some(b) = &opts.gateway_bind {
            profile.gateway_bind = b.clone();
        }
        if let Some(c) = opts.clock {
            profile.clock = c;
        }
        if let Some(s) = opts.seed {
            profile.seed = s;
        }
        if let Some(root) = &opts.output_root {
            let many = profile.arms.len() > 1;
            for arm in &mut profile.arms {
                arm.recorder.output_root = if many { root.join(arm_dir_name(&arm.namespace)) } else { root.clone() };
            }
        }
        profile.validate()?;

        let (clock, virtual_clock): (SharedClock, _) = match profile.clock {
            ClockMode::Virtual => {
                let v = VirtualClock::new(0);
                (Arc::new(v.clone()), Some(v))
            }
            ClockMode::Wall => (Arc::new(MonotonicClock::new()), None),
        };
        let bus = Bus::new(clock.clone());
        let storage = opts.storage.clone().unwrap_or_else(FsStorage::shared);

        let mut arms = Vec::new();
        let mut servers = Vec::new();
        for (ai, a) in profile.arms.iter().enumerate() {
            let ns = a.namespace.as_str();
            let comp = |what: &str, e: &dyn std::fmt::Display| OrchestratorError::Component(format!("{ns} {what}: {e}"));
            let controller = MockController::shared(a.sim.clone(), clock.clone());
            let link: Box<dyn RobotBridge> = match &a.controller {
                ControllerEndpoint::InProcess => Box::new(InProcessBridge::new(controller.clone())),
                ControllerEndpoint::Tcp { bind } => {
                    let server = MockControllerServer::start(bind, controller.clone()).map_err(|e| OrchestratorError::Port {
                        addr: bind.clone(),
                        reason: e.to_string(),
                    })?;
                    let link = TcpLineBridge::new(server.local_addr().to_string());
                    servers.push(server);
                    Box::new(link)
                }
            };
            let planner = PlannerNode::new(&bus, ns, a.planner).map_err(|e| comp("planner", &e))?;
            let bridge = BridgeNode::new(&bus, ns, link, a.sim.clone()).map_err(|e| comp("bridge", &e))?;
            let (cameras, recorder) = if a.recorder.enabled {
                let mut cfg = a.recorder.clone();
                for (ci, cam) in cfg.cameras.iter_mut().enumerate() {
                    if let CameraSource::Synthetic { seed, .. } = &mut cam.source {
                        *seed = mix_seed(*seed, profile.seed, ai as u64, ci as u64);
                    }
                }
                let cams = cfg
                    .cameras
                    .iter()
                    .map(|c| {
                        let src = c.open().map_err(|e| comp("camera", &e))?;
                        CameraNode::new(&bus, ns, src, c.rate_hz).map_err(|e| comp("camera", &e))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let rec = RecorderNode::new(&bus, ns, &cfg, storage.clone()).map_err(|e| comp("recorder", &e))?;
                (cams, Some(rec))
            } else {
                (Vec::new(), None)
            };
            arms.push(ArmRuntime {
                namespace: ns.to_string(),
                planner,
                bridge,
                cameras,
                recorder,
                controller,
                output_root: a.recorder.output_root.clone(),
            });
        }

        let gateway = serve(&profile.gateway_bind, &bus).map_err(|e| match e {
            GatewayError::Bind { addr, reason } => OrchestratorError::Port { addr, reason },
        })?;
        info!(addr = %gateway.local_addr(), arms = arms.len(), clock = ?profile.clock, "system launched");

        let tick_ns = profile.tick_ms * NANOS_PER_MILLI;
        let exec = Arc::new(Mutex::new(Executor { arms }));
        let mut sys = Self {
            mode: profile.clock,
            profile,
            virtual_clock,
            bus,
            gateway: Some(gateway),
            exec,
            tick_ns,
            driver: None,
            servers,
        };
        if sys.mode == ClockMode::Wall {
            sys.start_driver();
        }
        Ok(sys)
    }

    fn start_driver(&mut self) {
        let stop = Arc::new(AtomicBool::new(false));
        let exec = self.exec.clone();
        let clock = self.bus.clock().clone();
        let period = Duration::from_nanos(self.tick_ns);
        let flag = stop.clone();
        let handle = std::thread::Builder::new()
            .name("executor".into())
            .spawn(move || {
                let mut next = Instant::now();
                while !flag.load(Ordering::Acquire) {
                    if let Err(e) = exec.lock().unwrap().tick(clock.now_ns()) {
                        warn!("tick failed: {e}");
                    }
                    next += period;
                    let now = Instant::now();
                    if next > now {
                        std::thread::sleep(next - now);
                    } else {
                        next = now;
                    }
                }
            })
            .expect("spawn executor");
        self.driver = Some((stop, handle));
    }

    pub fn profile(&self) -> &LaunchProfile {
        &self.profile
    }

    pub fn clock_mode(&self) -> ClockMode {
        self.mode
    }

    pub fn bus(&self) -> &Bus {
        &self.bus
    }

    pub fn now_ns(&self) -> u64 {
        self.bus.now_ns()
    }

    pub fn tick_ns(&self) -> u64 {
        self.tick_ns
    }

    pub fn gateway(&self) -> &GatewayHandle {
        self.gateway.as_ref().expect("gateway runs until shutdown")
    }

    pub fn gateway_addr(&self) -> String {
        self.gateway().local_addr().to_string()
    }

    pub fn connect_client(&self) -> Result<GatewayClient, OrchestratorError> {
        GatewayClient::connect(&self.gateway_addr()).map_err(OrchestratorError::Component)
    }

    pub fn executor(&self) -> MutexGuard<'_, Executor> {
        self.exec.lock().unwrap()
    }

    /// Advances to `t_ns`: ticks the executor on the virtual clock, or sleeps under wall time.
    pub fn run_until(&self, t_ns: u64) -> Result<(), OrchestratorError> {
        match &self.virtual_clock {
            Some(vc) => {
                let mut exec = self.exec.lock().unwrap();
                let mut now = vc.now_ns();
                while now < t_ns {
                    now = (now + self.tick_ns).min(t_ns);
                    vc.advance_to(now);
                    exec.tick(now)?;
                }
                Ok(())
            }
            None => {
                let now = self.now_ns();
                if t_ns > now {
                    std::thread::sleep(Duration::from_nanos(t_ns - now));
                }
                Ok(())
            }
        }
    }

    pub fn run_for(&self, d_ns: u64) -> Result<(), OrchestratorError> {
        self.run_until(self.now_ns() + d_ns)
    }

    /// Frames the gateway has finished handling (accepted or rejected) for the client at `peer`.
    pub fn frames_handled(&self, peer: &str) -> u64 {
        self.gateway().connections().iter().filter(|c| c.peer == peer).map(|c| c.accepted + c.rejected).sum()
    }

    pub fn frames_rejected(&self, peer: &str) -> u64 {
        self.gateway().connections().iter().filter(|c| c.peer == peer).map(|c| c.rejected).sum()
    }

    /// Blocks (in real time) until the gateway has handled `count` frames from `peer`.
    /// Virtual time does not move meanwhile, so inputs land at a deterministic instant.
    pub fn await_frames(&self, peer: &str, count: u64, timeout: Duration) -> Result<(), OrchestratorError> {
        let deadline = Instant::now() + timeout;
        loop {
            if self.frames_handled(peer) >= count {
                return Ok(());
            }
            if Instant::now() > deadline {
                return Err(OrchestratorError::Timeout(format!(
                    "gateway handled {} of {count} frames from {peer}",
                    self.frames_handled(peer)
                )));
            }
            std::thread::sleep(Duration::from_micros(50));
        }
    }

    fn topic(namespace: &str, base: &str) -> TopicName {
        TopicName::new(namespace, base).expect("validated namespace")
    }

    pub fn latest_feedback(&self, namespace: &str) -> Option<(u64, RobotState)> {
        self.bus.latest(&Self::topic(namespace, topics::ROBOT_FEEDBACK)).and_then(|e| match e.payload {
            Payload::RobotState(s) => Some((e.publish_time, s)),
            _ => None,
        })
    }

    pub fn planner_status(&self, namespace: &str) -> Option<PlannerStatus> {
        self.bus.latest(&Self::topic(namespace, topics::PLANNER_STATUS)).and_then(|e| match e.payload {
            Payload::PlannerStatus(s) => Some(s),
            _ => None,
        })
    }

    pub fn recorder_outcomes(&self, namespace: &str) -> Vec<EpisodeOutcome> {
        self.executor()
            .arm(namespace)
            .and_then(|a| a.recorder.as_ref().map(|r| r.outcomes().to_vec()))
            .unwrap_or_default()
    }

    pub fn output_root(&self, namespace: &str) -> Option<PathBuf> {
        self.executor().arm(namespace).map(|a| a.output_root.clone())
    }

    /// Stops the driver, finalizes any episode still recording, and closes sockets.
    pub fn shutdown(mut self) -> Vec<EpisodeOutcome> {
        self.shutdown_inner()
    }

    fn shutdown_inner(&mut self) -> Vec<EpisodeOutcome> {
        if let Some((stop, handle)) = self.driver.take() {
            stop.store(true, Ordering::Release);
            let _ = handle.join();
        }
        if let Some(g) = self.gateway.take() {
            g.stop();
        }
        let mut out = Vec::new();
        for arm in &mut self.exec.lock().unwrap().arms {
            if let Some(r) = &mut arm.recorder {
                if r.is_recording() {
                    match r.stop() {
                        Ok(Some(o)) => out.push(o),
                        Ok(None) => {}
                        Err(e) => warn!("finalize on shutdown failed: {e}"),
                    }
                }
            }
        }
        for s in self.servers.drain(..) {
            s.stop();
        }
        out
    }
}

impl Drop for System {
    fn drop(&mut self) {
        self.shutdown_inner();
    }
}

fn mix_seed(camera_seed: u64, profile_seed: u64, arm: u64, cam: u64) -> u64 {
    let mut x = camera_seed ^ profile_seed.rotate_left(17) ^ (arm << 40) ^ (cam << 48);
    // splitmix64 finalizer
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub fn dataset_root_for(root: &Path, namespace: &str, arms: usize) -> PathBuf {
    if arms > 1 {
        root.join(arm_dir_name(namespace))
    } else {
        root.to_path_buf()
    }
}
