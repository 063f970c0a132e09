//! WebSocket ingress for phone-like clients.
//!
//! Speaks a three-op, rosbridge-style JSON protocol (see [`protocol`]). Each
//! frame's topic decides the bus namespace it feeds, so `/left/...` and
//! `/right/...` clients can share one server. Envelopes are stamped with the
//! bus clock; client stamps are carried along but only checked for monotonicity.

mod client;
pub mod protocol;
pub mod rate;
mod server;

pub use client::GatewayClient;
pub use protocol::{decode_pose, DecodeError, WireMessage};
pub use rate::{RateMonitor, RateReport};
pub use server::{serve, ConnectionStats, GatewayError, GatewayHandle};

/// Default listen port.
pub const DEFAULT_PORT: u16 = 9090;
