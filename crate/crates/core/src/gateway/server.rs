use std::collections::{BTreeSet, HashMap};
use std::io::ErrorKind;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde::Serialize;
use tracing::{debug, info, warn};
use tungstenite::{Message, WebSocket};

use super::protocol::{
    decode_button, decode_pose, decode_recorder_control, error_frame, payload_json, publish_frame, DecodeError,
    Op, WireMessage,
};
use super::rate::{RateMonitor, RateReport};
use crate::bus::{Bus, Payload, QosProfile, Subscription, TopicName};
use crate::messages::{topics, SessionEvent};

/// How long a connection thread blocks in `read` before servicing its
/// subscriptions and the shutdown flag.
const POLL_INTERVAL: Duration = Duration::from_millis(2);
const HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(2);
const WRITE_TIMEOUT: Duration = Duration::from_secs(2);
const SUBSCRIPTION_DEPTH: usize = 32;

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("cannot bind {addr}: {reason}")]
    Bind { addr: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum InputKind {
    Pose,
    Button,
    RecorderControl,
}

fn input_kind(topic: &TopicName) -> Option<InputKind> {
    match topic.base() {
        topics::PHONE_POSE => Some(InputKind::Pose),
        topics::BUTTON => Some(InputKind::Button),
        topics::RECORDER_CONTROL => Some(InputKind::RecorderControl),
        _ => None,
    }
}

/// Per-connection counters, readable while the server runs.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ConnectionStats {
    pub id: u64,
    pub peer: String,
    pub open: bool,
    pub namespaces: Vec<String>,
    pub accepted: u64,
    pub rejected: u64,
    /// Arrival statistics of pose frames, measured on server wall time.
    pub pose_rate: Option<RateReport>,
}

#[derive(Default)]
struct Shared {
    shutdown: AtomicBool,
    next_id: AtomicU64,
    stats: Mutex<Vec<Arc<Mutex<ConnectionStats>>>>,
    workers: Mutex<Vec<JoinHandle<()>>>,
}

/// Running WebSocket server. Dropping it stops the server.
pub struct GatewayHandle {
    addr: SocketAddr,
    shared: Arc<Shared>,
    acceptor: Option<JoinHandle<()>>,
}

impl GatewayHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("ws://{}", self.addr)
    }

    pub fn connections(&self) -> Vec<ConnectionStats> {
        self.shared.stats.lock().unwrap().iter().map(|s| s.lock().unwrap().clone()).collect()
    }

    pub fn stop(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        self.shared.shutdown.store(true, Ordering::Release);
        if let Some(t) = self.acceptor.take() {
            let _ = t.join();
        }
        let workers: Vec<_> = self.shared.workers.lock().unwrap().drain(..).collect();
        for w in workers {
            let _ = w.join();
        }
    }
}

impl Drop for GatewayHandle {
    fn drop(&mut self) {
        self.shutdown();
    }
}

/// Binds `bind` and serves phone clients until the handle is stopped.
pub fn serve(bind: &str, bus: &Bus) -> Result<GatewayHandle, GatewayError> {
    let bind_err = |e: std::io::Error| GatewayError::Bind { addr: bind.to_string(), reason: e.to_string() };
    let listener = TcpListener::bind(bind).map_err(bind_err)?;
    listener.set_nonblocking(true).map_err(bind_err)?;
    let addr = listener.local_addr().map_err(bind_err)?;
    let shared = Arc::new(Shared::default());
    let acceptor = {
        let shared = shared.clone();
        let bus = bus.clone();
        std::thread::Builder::new()
            .name("gateway-accept".into())
            .spawn(move || accept_loop(listener, bus, shared))
            .map_err(bind_err)?
    };
    info!(%addr, "gateway listening");
    Ok(GatewayHandle { addr, shared, acceptor: Some(acceptor) })
}

fn accept_loop(listener: TcpListener, bus: Bus, shared: Arc<Shared>) {
    while !shared.shutdown.load(Ordering::Acquire) {
        match listener.accept() {
            Ok((stream, peer)) => {
                let id = shared.next_id.fetch_add(1, Ordering::Relaxed);
                let stats = Arc::new(Mutex::new(ConnectionStats {
                    id,
                    peer: peer.to_string(),
                    open: true,
                    ..Default::default()
                }));
                shared.stats.lock().unwrap().push(stats.clone());
                let (bus, shared2) = (bus.clone(), shared.clone());
                let spawned = std::thread::Builder::new()
                    .name(format!("gateway-conn-{id}"))
                    .spawn(move || {
                        if let Err(e) = run_connection(stream, bus, &shared2, &stats) {
                            debug!(peer = %peer, "connection ended: {e}");
                        }
                        stats.lock().unwrap().open = false;
                    });
                match spawned {
                    Ok(h) => {
                        let mut workers = shared.workers.lock().unwrap();
                        workers.retain(|w| !w.is_finished());
                        workers.push(h);
                    }
                    Err(e) => warn!("cannot spawn connection thread: {e}"),
                }
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => std::thread::sleep(Duration::from_millis(5)),
            Err(e) => {
                warn!("accept failed: {e}");
                std::thread::sleep(Duration::from_millis(5));
            }
        }
    }
}

fn run_connection(
    stream: TcpStream,
    bus: Bus,
    shared: &Shared,
    stats: &Mutex<ConnectionStats>,
) -> Result<(), String> {
    stream.set_nonblocking(false).map_err(|e| e.to_string())?;
    stream.set_nodelay(true).map_err(|e| e.to_string())?;
    stream.set_read_timeout(Some(HANDSHAKE_TIMEOUT)).map_err(|e| e.to_string())?;
    stream.set_write_timeout(Some(WRITE_TIMEOUT)).map_err(|e| e.to_string())?;
    let ws = tungstenite::accept(stream).map_err(|e| format!("handshake: {e}"))?;
    ws.get_ref().set_read_timeout(Some(POLL_INTERVAL)).map_err(|e| e.to_string())?;
    let mut conn = Connection {
        ws,
        bus,
        namespaces: BTreeSet::new(),
        subs: Vec::new(),
        last_stamp: HashMap::new(),
        rate: RateMonitor::default(),
        epoch: Instant::now(),
    };
    let result = conn.serve(shared, stats);
    conn.end_sessions();
    result
}

struct Connection {
    ws: WebSocket<TcpStream>,
    bus: Bus,
    namespaces: BTreeSet<String>,
    subs: Vec<(String, Subscription)>,
    last_stamp: HashMap<TopicName, f64>,
    rate: RateMonitor,
    epoch: Instant,
}

impl Connection {
    fn serve(&mut self, shared: &Shared, stats: &Mutex<ConnectionStats>) -> Result<(), String> {
        loop {
            if shared.shutdown.load(Ordering::Acquire) {
                let _ = self.ws.close(None);
                let _ = self.ws.flush();
                return Ok(());
            }
            match self.ws.read() {
                Ok(Message::Text(text)) => {
                    let outcome = self.handle_text(&text);
                    {
                        let mut s = stats.lock().unwrap();
                        match outcome {
                            Ok(()) => s.accepted += 1,
                            Err(_) => s.rejected += 1,
                        }
                        s.namespaces = self.namespaces.iter().cloned().collect();
                        s.pose_rate = self.rate.report();
                    }
                    if let Err(e) = outcome {
                        self.send(error_frame(&e))?;
                    }
                }
                Ok(Message::Binary(_)) => {
                    stats.lock().unwrap().rejected += 1;
                    self.send(error_frame("binary frames are not supported; send JSON text"))?;
                }
                Ok(_) => {}
                Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
                Err(tungstenite::Error::ConnectionClosed) | Err(tungstenite::Error::AlreadyClosed) => return Ok(()),
                Err(e) => return Err(e.to_string()),
            }
            self.forward_subscriptions()?;
        }
    }

    fn send(&mut self, text: String) -> Result<(), String> {
        match self.ws.send(Message::Text(text)) {
            Ok(()) => Ok(()),
            Err(tungstenite::Error::Io(e)) if e.kind() == ErrorKind::WouldBlock => Ok(()),
            Err(e) => Err(e.to_string()),
        }
    }

    fn topic(&mut self, raw: &str) -> Result<TopicName, String> {
        let topic = TopicName::parse(raw).map_err(|e| e.to_string())?;
        if self.namespaces.insert(topic.namespace().to_string()) {
            // first frame for this namespace on this connection
            let session = TopicName::new(topic.namespace(), topics::SESSION).map_err(|e| e.to_string())?;
            self.bus
                .publish(&session, Payload::Session(SessionEvent::Connected))
                .map_err(|e| e.to_string())?;
        }
        Ok(topic)
    }

    fn handle_text(&mut self, text: &str) -> Result<(), String> {
        let m = WireMessage::parse(text).map_err(|e| e.to_string())?;
        match m.op {
            Op::Advertise => {
                let topic = self.topic(&m.topic)?;
                input_kind(&topic).ok_or_else(|| unsupported(&topic))?;
                Ok(())
            }
            Op::Publish => {
                let topic = self.topic(&m.topic)?;
                let kind = input_kind(&topic).ok_or_else(|| unsupported(&topic))?;
                let msg = m.msg.as_ref().expect("checked by parse");
                let payload = match kind {
                    InputKind::Pose => {
                        let sample = decode_pose(msg).map_err(|e| e.to_string())?;
                        let last = self.last_stamp.entry(topic.clone()).or_insert(f64::NEG_INFINITY);
                        if sample.stamp_ms < *last {
                            return Err(DecodeError::Invalid {
                                field: "stamp".into(),
                                reason: format!("went backwards ({} < {})", sample.stamp_ms, last),
                            }
                            .to_string());
                        }
                        *last = sample.stamp_ms;
                        self.rate.record(self.epoch.elapsed().as_nanos() as u64);
                        Payload::Pose(sample)
                    }
                    InputKind::Button => Payload::Button(decode_button(msg).map_err(|e| e.to_string())?),
                    InputKind::RecorderControl => {
                        Payload::RecorderControl(decode_recorder_control(msg).map_err(|e| e.to_string())?)
                    }
                };
                self.bus.publish(&topic, payload).map_err(|e| e.to_string())?;
                Ok(())
            }
            Op::Subscribe => {
                let topic = TopicName::parse(&m.topic).map_err(|e| e.to_string())?;
                if !self.subs.iter().any(|(t, _)| t == &m.topic) {
                    let sub = self
                        .bus
                        .subscribe(&topic, QosProfile::best_effort(SUBSCRIPTION_DEPTH))
                        .map_err(|e| e.to_string())?;
                    self.subs.push((m.topic, sub));
                }
                Ok(())
            }
            Op::Unsubscribe => {
                self.subs.retain(|(t, _)| t != &m.topic);
                Ok(())
            }
            Op::Status => Err("status frames are server-to-client only".into()),
        }
    }

    fn forward_subscriptions(&mut self) -> Result<(), String> {
        let mut out = Vec::new();
        for (name, sub) in &self.subs {
            for env in sub.drain() {
                if let Some(msg) = payload_json(&env.payload) {
                    out.push(publish_frame(name, msg));
                }
            }
        }
        for text in out {
            self.send(text)?;
        }
        Ok(())
    }

    fn end_sessions(&mut self) {
        for ns in &self.namespaces {
            if let Ok(t) = TopicName::new(ns, topics::SESSION) {
                let _ = self.bus.publish(&t, Payload::Session(SessionEvent::Disconnected));
            }
        }
    }
}

fn unsupported(topic: &TopicName) -> String {
    format!(
        "unsupported topic `{topic}`; clients may publish {}, {} or {} under any namespace",
        topics::PHONE_POSE,
        topics::BUTTON,
        topics::RECORDER_CONTROL
    )
}
