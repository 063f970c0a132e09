use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use tracing::warn;

use super::controller::SharedController;
use super::wire::{grip_line, WireCommand, WireLine, WireState, GET_STATE_LINE};
use super::{BridgeError, RobotBridge};

/// Bridge to a controller speaking the line protocol over TCP.
///
/// Nagle is disabled and every command is written with a single `write_all`,
/// so small commands leave immediately instead of being coalesced.
pub struct TcpLineBridge {
    addr: String,
    timeout: Duration,
    conn: Option<(TcpStream, BufReader<TcpStream>)>,
}

impl TcpLineBridge {
    pub fn new(addr: impl Into<String>) -> Self {
        Self { addr: addr.into(), timeout: Duration::from_secs(2), conn: None }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    fn resolve(&self) -> Result<SocketAddr, BridgeError> {
        self.addr
            .to_socket_addrs()
            .map_err(|e| BridgeError::Connect(format!("{}: {e}", self.addr)))?
            .next()
            .ok_or_else(|| BridgeError::Connect(format!("{}: no address", self.addr)))
    }

    fn write_line(&mut self, line: &str) -> Result<(), BridgeError> {
        let Some((w, _)) = self.conn.as_mut() else {
            return Err(BridgeError::NotConnected);
        };
        if let Err(e) = w.write_all(line.as_bytes()) {
            self.conn = None;
            return Err(BridgeError::Io(e.to_string()));
        }
        Ok(())
    }
}

impl RobotBridge for TcpLineBridge {
    fn connect(&mut self) -> Result<(), BridgeError> {
        let addr = self.resolve()?;
        let stream = TcpStream::connect_timeout(&addr, self.timeout)
            .map_err(|e| BridgeError::Connect(format!("{addr}: {e}")))?;
        stream.set_nodelay(true).map_err(|e| BridgeError::Io(e.to_string()))?;
        stream.set_read_timeout(Some(self.timeout)).map_err(|e| BridgeError::Io(e.to_string()))?;
        let reader = BufReader::new(stream.try_clone().map_err(|e| BridgeError::Io(e.to_string()))?);
        self.conn = Some((stream, reader));
        Ok(())
    }

    fn send_command(&mut self, cmd: &WireCommand) -> Result<(), BridgeError> {
        self.write_line(&cmd.to_line())
    }

    fn send_gripper(&mut self, closed: bool, seq: u64) -> Result<(), BridgeError> {
        self.write_line(&grip_line(closed, seq))
    }

    fn read_state(&mut self) -> Result<WireState, BridgeError> {
        self.write_line(GET_STATE_LINE)?;
        let Some((_, reader)) = self.conn.as_mut() else {
            return Err(BridgeError::NotConnected);
        };
        let mut line = String::new();
        loop {
            line.clear();
            match reader.read_line(&mut line) {
                Ok(0) => {
                    self.conn = None;
                    return Err(BridgeError::Io("controller closed the connection".into()));
                }
                Ok(_) => match WireLine::parse(&line) {
                    Ok(WireLine::State(s)) => return Ok(s),
                    Ok(WireLine::Err(msg)) => warn!("controller error: {msg}"),
                    Ok(other) => warn!("unexpected controller line {other:?}"),
                    Err(e) => return Err(BridgeError::Wire(e)),
                },
                Err(e) => {
                    self.conn = None;
                    let kind = if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) {
                        "timed out waiting for state"
                    } else {
                        "read failed"
                    };
                    return Err(BridgeError::Io(format!("{kind}: {e}")));
                }
            }
        }
    }
}

/// Test hook that blocks writes while closed, like a socket whose peer stopped reading.
#[derive(Debug, Default)]
pub struct StallGate {
    stalled: Mutex<bool>,
    cond: Condvar,
    blocked: AtomicUsize,
}

impl StallGate {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    pub fn set_stalled(&self, stalled: bool) {
        *self.stalled.lock().unwrap() = stalled;
        self.cond.notify_all();
    }

    pub fn is_stalled(&self) -> bool {
        *self.stalled.lock().unwrap()
    }

    /// Number of writers currently parked on the closed gate.
    pub fn blocked_writers(&self) -> usize {
        self.blocked.load(Ordering::Acquire)
    }

    fn wait_open(&self) {
        let guard = self.stalled.lock().unwrap();
        if !*guard {
            return;
        }
        self.blocked.fetch_add(1, Ordering::AcqRel);
        let _open = self.cond.wait_while(guard, |s| *s).unwrap();
        self.blocked.fetch_sub(1, Ordering::AcqRel);
    }
}

/// Direct in-process link to a [`MockController`](super::controller::MockController),
/// passing the same protocol lines a socket would carry.
pub struct InProcessBridge {
    controller: SharedController,
    gate: Arc<StallGate>,
    connected: bool,
}

impl InProcessBridge {
    pub fn new(controller: SharedController) -> Self {
        Self { controller, gate: StallGate::new(), connected: false }
    }

    pub fn stall_gate(&self) -> Arc<StallGate> {
        self.gate.clone()
    }

    fn line(&mut self, line: &str) -> Result<Option<String>, BridgeError> {
        if !self.connected {
            return Err(BridgeError::NotConnected);
        }
        self.gate.wait_open();
        Ok(self.controller.lock().unwrap().handle_line(line))
    }
}

impl RobotBridge for InProcessBridge {
    fn connect(&mut self) -> Result<(), BridgeError> {
        self.connected = true;
        Ok(())
    }

    fn send_command(&mut self, cmd: &WireCommand) -> Result<(), BridgeError> {
        self.line(&cmd.to_line()).map(|_| ())
    }

    fn send_gripper(&mut self, closed: bool, seq: u64) -> Result<(), BridgeError> {
        self.line(&grip_line(closed, seq)).map(|_| ())
    }

    fn read_state(&mut self) -> Result<WireState, BridgeError> {
        match self.line(GET_STATE_LINE)?.as_deref().map(WireLine::parse) {
            Some(Ok(WireLine::State(s))) => Ok(s),
            other => Err(BridgeError::Io(format!("unexpected reply {other:?}"))),
        }
    }
}
