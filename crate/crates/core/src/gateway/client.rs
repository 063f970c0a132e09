use std::io::ErrorKind;
use std::net::TcpStream;
use std::time::Duration;

use serde_json::Value;
use tungstenite::{Message, WebSocket};

use super::protocol::{
    advertise_frame, button_msg, pose_msg, publish_frame, recorder_control_msg, subscribe_frame,
};
use crate::messages::{ButtonEvent, PoseSample, RecorderControl};

/// Minimal blocking client for the gateway protocol, used by the replay
/// driver, the latency harness and tests.
pub struct GatewayClient {
    ws: WebSocket<TcpStream>,
}

impl GatewayClient {
    /// `addr` is `host:port`.
    pub fn connect(addr: &str) -> Result<Self, String> {
        let stream = TcpStream::connect(addr).map_err(|e| format!("{addr}: {e}"))?;
        stream.set_nodelay(true).map_err(|e| e.to_string())?;
        let (ws, _) = tungstenite::client(format!("ws://{addr}/"), stream).map_err(|e| e.to_string())?;
        Ok(Self { ws })
    }

    /// Local socket address; matches the server's `ConnectionStats::peer`.
    pub fn local_addr(&self) -> Result<std::net::SocketAddr, String> {
        self.ws.get_ref().local_addr().map_err(|e| e.to_string())
    }

    pub fn send_text(&mut self, text: impl Into<String>) -> Result<(), String> {
        self.ws.send(Message::Text(text.into())).map_err(|e| e.to_string())
    }

    pub fn send_binary(&mut self, bytes: Vec<u8>) -> Result<(), String> {
        self.ws.send(Message::Binary(bytes)).map_err(|e| e.to_string())
    }

    pub fn advertise(&mut self, topic: &str) -> Result<(), String> {
        self.send_text(advertise_frame(topic))
    }

    pub fn subscribe(&mut self, topic: &str) -> Result<(), String> {
        self.send_text(subscribe_frame(topic))
    }

    pub fn publish(&mut self, topic: &str, msg: Value) -> Result<(), String> {
        self.send_text(publish_frame(topic, msg))
    }

    pub fn publish_pose(&mut self, topic: &str, sample: &PoseSample) -> Result<(), String> {
        self.publish(topic, pose_msg(sample))
    }

    pub fn publish_button(&mut self, topic: &str, event: &ButtonEvent) -> Result<(), String> {
        self.publish(topic, button_msg(event))
    }

    pub fn publish_recorder(&mut self, topic: &str, ctl: &RecorderControl) -> Result<(), String> {
        self.publish(topic, recorder_control_msg(ctl))
    }

    /// Next JSON frame from the server, or `None` after `timeout`.
    pub fn recv(&mut self, timeout: Duration) -> Result<Option<Value>, String> {
        self.ws.get_ref().set_read_timeout(Some(timeout.max(Duration::from_millis(1)))).map_err(|e| e.to_string())?;
        loop {
            match self.ws.read() {
                Ok(Message::Text(t)) => return serde_json::from_str(&t).map(Some).map_err(|e| e.to_string()),
                Ok(Message::Close(_)) => return Err("server closed the connection".into()),
                Ok(_) => continue,
                Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                    return Ok(None)
                }
                Err(e) => return Err(e.to_string()),
            }
        }
    }

    pub fn close(mut self) {
        let _ = self.ws.close(None);
        let _ = self.ws.get_ref().set_read_timeout(Some(Duration::from_millis(200)));
        // drain until the close handshake completes
        while self.ws.read().is_ok() {}
    }
}
