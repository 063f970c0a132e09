//! Mock arm controller: the simulated arm behind the line protocol, reachable
//! either in-process or over loopback TCP.

use std::collections::VecDeque;
use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use tracing::{debug, warn};

use super::sim::{sim_step, ArmPose, SimArmConfig, SimArmState};
use super::wire::{wire_pose, WireCommand, WireLine, WireState};
use crate::clock::{secs_to_ns, SharedClock, NANOS_PER_SEC};


/// Simulated controller state. Time is read from the injected clock and the
/// arm is integrated lazily up to "now" whenever a request arrives, so a
/// virtual clock gives bit-identical behavior run to run.
#[derive(Debug)]
pub struct MockController {
    cfg: SimArmConfig,
    clock: SharedClock,
    state: SimArmState,
    command: ArmPose,
    applied_seq: u64,
    /// Moves in flight, keyed by the time their transport delay expires.
    pending: VecDeque<(u64, WireCommand)>,
    sim_time_ns: u64,
    received: Vec<WireCommand>,
}

impl MockController {
    pub fn new(cfg: SimArmConfig, clock: SharedClock) -> Self {
        let state = SimArmState::at_home(&cfg);
        let now = clock.now_ns();
        Self {
            command: state.pose,
            state,
            cfg,
            clock,
            applied_seq: 0,
            pending: VecDeque::new(),
            sim_time_ns: now,
            received: Vec::new(),
        }
    }

    pub fn shared(cfg: SimArmConfig, clock: SharedClock) -> SharedController {
        Arc::new(Mutex::new(Self::new(cfg, clock)))
    }

    pub fn config(&self) -> &SimArmConfig {
        &self.cfg
    }

    /// Every `MOVL` received so far, in arrival order.
    pub fn received_commands(&self) -> &[WireCommand] {
        &self.received
    }

    pub fn sim_state(&mut self) -> SimArmState {
        self.advance_to(self.clock.now_ns());
        self.state
    }

    fn integrate(&mut self, until_ns: u64) {
        let max_step = secs_to_ns(self.cfg.max_substep).max(1);
        while self.sim_time_ns < until_ns {
            let step = (until_ns - self.sim_time_ns).min(max_step);
            let dt = step as f64 / NANOS_PER_SEC as f64;
            self.state = sim_step(&self.state, &self.command, dt, &self.cfg);
            self.sim_time_ns += step;
        }
    }

    /// Integrates the arm up to `now_ns`, applying queued commands as their
    /// transport delay expires.
    pub fn advance_to(&mut self, now_ns: u64) {
        while let Some(&(apply_at, _)) = self.pending.front() {
            if apply_at > now_ns {
                break;
            }
            self.integrate(apply_at);
            let (_, cmd) = self.pending.pop_front().expect("peeked");
            if let Ok(pose) = wire_pose(cmd.x, cmd.y, cmd.z, cmd.rx, cmd.ry, cmd.rz) {
                self.command = pose;
                self.applied_seq = cmd.seq;
            }
        }
        self.integrate(now_ns);
    }

    fn enqueue(&mut self, cmd: WireCommand) {
        let now = self.clock.now_ns();
        self.advance_to(now);
        let apply_at = now + secs_to_ns(self.cfg.transport_delay);
        self.pending.push_back((apply_at, cmd));
    }

    pub fn state_report(&mut self) -> WireState {
        self.advance_to(self.clock.now_ns());
        let p = self.state.pose;
        WireState {
            x: p.position.x * 1000.0,
            y: p.position.y * 1000.0,
            z: p.position.z * 1000.0,
            rx: p.rpy.roll.to_degrees(),
            ry: p.rpy.pitch.to_degrees(),
            rz: p.rpy.yaw.to_degrees(),
            grip: self.state.gripper_closed,
            seq: self.applied_seq,
        }
    }

    /// Handles one protocol line; returns the reply line, if any.
    pub fn handle_line(&mut self, line: &str) -> Option<String> {
        match WireLine::parse(line) {
            Ok(WireLine::Move(cmd)) => {
                self.received.push(cmd);
                self.enqueue(cmd);
                None
            }
            Ok(WireLine::Grip { closed, .. }) => {
                // binary actuator: no smoothing and no transport queue
                self.advance_to(self.clock.now_ns());
                self.state.gripper_closed = closed;
                None
            }
            Ok(WireLine::GetState) => Some(self.state_report().to_line()),
            Ok(other) => Some(format!("ERR unexpected {other:?}\n")),
            Err(e) => Some(format!("ERR {e}\n")),
        }
    }
}

pub type SharedController = Arc<Mutex<MockController>>;

/// Loopback TCP front end for a [`MockController`].
pub struct MockControllerServer {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    stalled: Arc<AtomicBool>,
    connections: Arc<Mutex<Vec<TcpStream>>>,
    accept_thread: Option<JoinHandle<()>>,
}

impl MockControllerServer {
    pub fn start(bind: &str, controller: SharedController) -> std::io::Result<Self> {
        let listener = TcpListener::bind(bind)?;
        let addr = listener.local_addr()?;
        listener.set_nonblocking(true)?;
        let shutdown = Arc::new(AtomicBool::new(false));
        let stalled = Arc::new(AtomicBool::new(false));
        let connections = Arc::new(Mutex::new(Vec::new()));
        let accept_thread = {
            let shutdown = shutdown.clone();
            let stalled = stalled.clone();
            let connections = connections.clone();
            std::thread::Builder::new().name(format!("mock-ctrl-{addr}")).spawn(move || {
                while !shutdown.load(Ordering::Acquire) {
                    match listener.accept() {
                        Ok((stream, peer)) => {
                            debug!(%peer, "controller connection");
                            if let Ok(clone) = stream.try_clone() {
                                connections.lock().unwrap().push(clone);
                            }
                            let controller = controller.clone();
                            let shutdown = shutdown.clone();
                            let stalled = stalled.clone();
                            std::thread::spawn(move || {
                                serve_connection(stream, controller, shutdown, stalled)
                            });
                        }
                        Err(e) if e.kind() == ErrorKind::WouldBlock => {
                            std::thread::sleep(Duration::from_millis(2));
                        }
                        Err(e) => {
                            warn!("controller accept failed: {e}");
                            std::thread::sleep(Duration::from_millis(10));
                        }
                    }
                }
            })?
        };
        Ok(Self { addr, shutdown, stalled, connections, accept_thread: Some(accept_thread) })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// While stalled the server stops reading from its sockets.
    pub fn set_stalled(&self, stalled: bool) {
        self.stalled.store(stalled, Ordering::Release);
    }

    /// Drops every open connection (the listener stays up).
    pub fn disconnect_all(&self) {
        for s in self.connections.lock().unwrap().drain(..) {
            let _ = s.shutdown(Shutdown::Both);
        }
    }

    pub fn stop(mut self) {
        self.shutdown_now();
    }

    fn shutdown_now(&mut self) {
        self.shutdown.store(true, Ordering::Release);
        self.disconnect_all();
        if let Some(t) = self.accept_thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for MockControllerServer {
    fn drop(&mut self) {
        self.shutdown_now();
    }
}

fn serve_connection(
    stream: TcpStream,
    controller: SharedController,
    shutdown: Arc<AtomicBool>,
    stalled: Arc<AtomicBool>,
) {
    let _ = stream.set_nodelay(true);
    let _ = stream.set_read_timeout(Some(Duration::from_millis(20)));
    let Ok(mut writer) = stream.try_clone() else { return };
    let mut reader = BufReader::new(stream);
    let mut line = String::new();
    while !shutdown.load(Ordering::Acquire) {
        if stalled.load(Ordering::Acquire) {
            std::thread::sleep(Duration::from_millis(1));
            continue;
        }
        match reader.read_line(&mut line) {
            Ok(0) => return,
            Ok(_) => {
                if !line.ends_with('\n') {
                    continue;
                }
                let reply = controller.lock().unwrap().handle_line(&line);
                line.clear();
                if let Some(reply) = reply {
                    if writer.write_all(reply.as_bytes()).is_err() {
                        return;
                    }
                }
            }
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(_) => return,
        }
    }
}
