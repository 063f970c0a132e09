use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use tracing::{info, warn};

use super::sim::SimArmConfig;
use super::wire::{from_wire_state, to_wire};
use super::{BridgeError, RobotBridge};
use crate::bus::{Bus, Envelope, Payload, QosProfile, Subscription, TopicName};
use crate::clock::{secs_to_ns, NANOS_PER_MILLI};
use crate::messages::{topics, BridgeHealth, HealthStatus, RobotState};

const BACKOFF_INITIAL_NS: u64 = 50 * NANOS_PER_MILLI;
const BACKOFF_MAX_NS: u64 = 2_000 * NANOS_PER_MILLI;

/// Link plus connection bookkeeping, shared by the stepped and threaded drivers.
struct BridgeCore<B> {
    link: B,
    bus: Bus,
    sim: SimArmConfig,
    feedback_topic: TopicName,
    health_topic: TopicName,
    connected: bool,
    next_retry_ns: u64,
    backoff_ns: u64,
    pending_gripper: Option<(bool, u64)>,
    latest_state: Option<RobotState>,
}

impl<B: RobotBridge> BridgeCore<B> {
    fn health(&self, status: HealthStatus, detail: String) {
        let _ = self
            .bus
            .publish(&self.health_topic, Payload::Health(BridgeHealth { status, detail }));
    }

    /// Returns true when connected. On a fresh connection `on_connect` runs
    /// so the caller can discard commands that queued up while the link was down.
    fn ensure_connected(&mut self, now: u64, on_connect: impl FnOnce()) -> bool {
        if self.connected {
            return true;
        }
        if now < self.next_retry_ns {
            return false;
        }
        match self.link.connect() {
            Ok(()) => {
                self.connected = true;
                self.backoff_ns = BACKOFF_INITIAL_NS;
                on_connect();
                info!(topic = %self.feedback_topic, "bridge connected");
                self.health(HealthStatus::Ok, "connected".into());
                true
            }
            Err(e) => {
                self.link_failed(now, e);
                false
            }
        }
    }

    fn link_failed(&mut self, now: u64, e: BridgeError) {
        warn!("bridge link error: {e}");
        self.connected = false;
        self.next_retry_ns = now + self.backoff_ns;
        self.backoff_ns = (self.backoff_ns * 2).min(BACKOFF_MAX_NS);
        self.health(HealthStatus::Degraded, e.to_string());
    }

    fn send_target(&mut self, env: &Envelope, now: u64) {
        let Payload::Target(target) = &env.payload else { return };
        let cmd = to_wire(target, env.sequence);
        if let Err(e) = self.link.send_command(&cmd) {
            self.link_failed(now, e);
        }
    }

    fn send_gripper(&mut self, now: u64) {
        if let Some((closed, seq)) = self.pending_gripper {
            match self.link.send_gripper(closed, seq) {
                Ok(()) => self.pending_gripper = None,
                Err(e) => self.link_failed(now, e),
            }
        }
    }

    fn poll_feedback(&mut self, now: u64) -> Result<(), BridgeError> {
        match self.link.read_state() {
            Ok(raw) => match from_wire_state(&raw, &self.sim, now) {
                Ok(state) => {
                    self.latest_state = Some(state.clone());
                    self.bus.publish(&self.feedback_topic, Payload::RobotState(state))?;
                }
                Err(e) => warn!("discarding controller state: {e}"),
            },
            Err(e) => self.link_failed(now, e),
        }
        Ok(())
    }
}

struct Subs {
    target: Subscription,
    gripper: Subscription,
}

fn wire_up<B: RobotBridge>(
    bus: &Bus,
    namespace: &str,
    link: B,
    sim: SimArmConfig,
) -> Result<(BridgeCore<B>, Subs), BridgeError> {
    sim.validate().map_err(BridgeError::Config)?;
    let t = |base: &str| TopicName::new(namespace, base);
    let subs = Subs {
        // freshest intent only: depth 1, best effort
        target: bus.subscribe(&t(topics::TARGET_POSE)?, QosProfile::keep_last_one())?,
        gripper: bus.subscribe(&t(topics::GRIPPER_CMD)?, QosProfile::default())?,
    };
    let core = BridgeCore {
        link,
        bus: bus.clone(),
        sim,
        feedback_topic: t(topics::ROBOT_FEEDBACK)?,
        health_topic: t(topics::BRIDGE_HEALTH)?,
        connected: false,
        next_retry_ns: 0,
        backoff_ns: BACKOFF_INITIAL_NS,
        pending_gripper: None,
        latest_state: None,
    };
    bus.advertise(&core.feedback_topic, crate::bus::PayloadKind::RobotState)?;
    Ok((core, subs))
}

fn take_gripper(sub: &Subscription) -> Option<(bool, u64)> {
    sub.drain().into_iter().rev().find_map(|e| match e.payload {
        Payload::Gripper(g) => Some((g.closed, e.sequence)),
        _ => None,
    })
}

/// Single-threaded bridge driven by explicit [`BridgeNode::spin_once`] calls,
/// used under a virtual clock.
pub struct BridgeNode<B> {
    core: BridgeCore<B>,
    subs: Subs,
    feedback_period_ns: u64,
    next_feedback_ns: Option<u64>,
}

impl<B: RobotBridge> BridgeNode<B> {
    pub fn new(bus: &Bus, namespace: &str, link: B, sim: SimArmConfig) -> Result<Self, BridgeError> {
        let period = secs_to_ns(1.0 / sim.feedback_rate).max(1);
        let (core, subs) = wire_up(bus, namespace, link, sim)?;
        Ok(Self { core, subs, feedback_period_ns: period, next_feedback_ns: None })
    }

    pub fn is_connected(&self) -> bool {
        self.core.connected
    }

    pub fn latest_state(&self) -> Option<&RobotState> {
        self.core.latest_state.as_ref()
    }

    pub fn link(&self) -> &B {
        &self.core.link
    }

    /// One drain: connect if needed, send gripper changes, send the newest
    /// pending target, and poll state when the feedback period has elapsed.
    pub fn spin_once(&mut self, now: u64) -> Result<(), BridgeError> {
        let subs = &self.subs;
        if !self.core.ensure_connected(now, || subs.target.clear()) {
            // commands arriving while down are stale by the time we reconnect
            return Ok(());
        }
        if let Some(g) = take_gripper(&self.subs.gripper) {
            self.core.pending_gripper = Some(g);
        }
        self.core.send_gripper(now);
        if let Some(env) = self.subs.target.take_latest() {
            self.core.send_target(&env, now);
        }
        if !self.core.connected {
            return Ok(());
        }
        let due = *self.next_feedback_ns.get_or_insert(now);
        if now >= due {
            self.core.poll_feedback(now)?;
            let next = due + self.feedback_period_ns;
            self.next_feedback_ns = Some(if next <= now { now + self.feedback_period_ns } else { next });
        }
        Ok(())
    }
}

/// Threaded bridge: a command-drain loop and a feedback-poll loop sharing the link.
pub struct BridgeHandle {
    shutdown: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
    latest: Arc<Mutex<Option<RobotState>>>,
}

impl BridgeHandle {
    pub fn latest_state(&self) -> Option<RobotState> {
        self.latest.lock().unwrap().clone()
    }

    pub fn stop(mut self) {
        self.stop_inner();
    }

    fn stop_inner(&mut self) {
        self.shutdown.store(true, Ordering::Release);
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

impl Drop for BridgeHandle {
    fn drop(&mut self) {
        self.stop_inner();
    }
}

pub fn run_bridge<B: RobotBridge + 'static>(
    bus: &Bus,
    namespace: &str,
    link: B,
    sim: SimArmConfig,
) -> Result<BridgeHandle, BridgeError> {
    let period = Duration::from_secs_f64(1.0 / sim.feedback_rate);
    let (core, subs) = wire_up(bus, namespace, link, sim)?;
    let core = Arc::new(Mutex::new(core));
    let shutdown = Arc::new(AtomicBool::new(false));
    let latest = Arc::new(Mutex::new(None));
    let clock = bus.clock().clone();

    let command_loop = {
        let core = core.clone();
        let shutdown = shutdown.clone();
        let clock = clock.clone();
        move || command_drain(core, subs, shutdown, clock)
    };

    let feedback_loop = {
        let core = core.clone();
        let shutdown = shutdown.clone();
        let latest = latest.clone();
        move || {
            while !shutdown.load(Ordering::Acquire) {
                std::thread::sleep(period);
                let mut c = core.lock().unwrap();
                if !c.connected {
                    continue;
                }
                let now = clock.now_ns();
                if c.poll_feedback(now).is_ok() {
                    *latest.lock().unwrap() = c.latest_state.clone();
                }
            }
        }
    };

    let threads = vec![
        std::thread::Builder::new()
            .name(format!("bridge-cmd{namespace}"))
            .spawn(command_loop)
            .map_err(|e| BridgeError::Io(e.to_string()))?,
        std::thread::Builder::new()
            .name(format!("bridge-fb{namespace}"))
            .spawn(feedback_loop)
            .map_err(|e| BridgeError::Io(e.to_string()))?,
    ];
    Ok(BridgeHandle { shutdown, threads, latest })
}

fn command_drain<B: RobotBridge>(
    core: Arc<Mutex<BridgeCore<B>>>,
    subs: Subs,
    shutdown: Arc<AtomicBool>,
    clock: crate::clock::SharedClock,
) {
    while !shutdown.load(Ordering::Acquire) {
        let now = clock.now_ns();
        let connected = core.lock().unwrap().ensure_connected(now, || subs.target.clear());
        if !connected {
            std::thread::sleep(Duration::from_millis(5));
            continue;
        }
        if let Some(g) = take_gripper(&subs.gripper) {
            let mut c = core.lock().unwrap();
            c.pending_gripper = Some(g);
            c.send_gripper(clock.now_ns());
        }
        let Some(popped) = subs.target.recv_timeout(Duration::from_millis(5)) else { continue };
        // re-check after the lock: anything published while we waited supersedes `popped`
        let mut c = core.lock().unwrap();
        let env = subs.target.take_latest().unwrap_or(popped);
        c.send_target(&env, clock.now_ns());
    }
}
