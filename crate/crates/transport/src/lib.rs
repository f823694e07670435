//! QUIC binding for the protocol cores.
//!
//! A [`Channel`] is one QUIC connection to a peer. Every envelope exchange
//! opens a fresh bidirectional stream, writes the request frame, finishes
//! the send side and reads one reply frame. Servers see the mirror image
//! through [`ServerConnection::accept_exchange`].

mod client;
mod server;
mod tls;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use odoq_core::envelope::{EnvelopeError, TargetUri};
use thiserror::Error;

pub use client::{Channel, Connector};
pub use server::{Listener, Responder, ServerConnection};
pub use tls::{fingerprint, fingerprint_hex, ServerTrust, TlsError, TlsIdentity};

pub const ALPN: &[u8] = b"odoq/1";
pub const DEFAULT_RESOLVER_PORT: u16 = 8853;
pub const DEFAULT_PROXY_PORT: u16 = 8443;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(5);
pub const IDLE_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("connect failed: {0}")]
    ConnectFailed(String),
    #[error("TLS failed: {0}")]
    TlsFailed(String),
    #[error("timed out")]
    Timeout,
    #[error("stream reset by peer")]
    StreamReset,
    #[error("framing error: {0}")]
    FramingError(String),
    #[error("connection lost: {0}")]
    ConnectionLost(String),
    #[error("bind failed: {0}")]
    Bind(String),
    #[error(transparent)]
    Tls(#[from] TlsError),
}

impl From<EnvelopeError> for TransportError {
    fn from(e: EnvelopeError) -> Self {
        Self::FramingError(e.to_string())
    }
}

/// QUIC endpoint named by a target URI or a bare `host:port`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EndpointAddr {
    pub host: String,
    pub port: u16,
}

impl EndpointAddr {
    pub const SCHEME: &'static str = "quic";

    pub fn new(host: impl Into<String>, port: u16) -> Self {
        Self {
            host: host.into(),
            port,
        }
    }

    /// Name presented for SNI and certificate checks.
    fn server_name(&self) -> &str {
        &self.host
    }

    pub async fn resolve(&self) -> Result<std::net::SocketAddr, TransportError> {
        tokio::net::lookup_host((self.host.as_str(), self.port))
            .await
            .map_err(|e| TransportError::ConnectFailed(format!("{self}: {e}")))?
            .next()
            .ok_or_else(|| TransportError::ConnectFailed(format!("{self}: no addresses")))
    }
}

impl From<TargetUri> for EndpointAddr {
    fn from(t: TargetUri) -> Self {
        Self::new(t.host, t.port)
    }
}

impl FromStr for EndpointAddr {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.contains("://") {
            return s.parse::<TargetUri>().map(Into::into).map_err(|e| e.to_string());
        }
        format!("{}://{s}", Self::SCHEME)
            .parse::<TargetUri>()
            .map(Into::into)
            .map_err(|e| e.to_string())
    }
}

impl fmt::Display for EndpointAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        TargetUri {
            host: self.host.clone(),
            port: self.port,
        }
        .fmt(f)
    }
}

fn transport_config() -> std::sync::Arc<quinn::TransportConfig> {
    let mut config = quinn::TransportConfig::default();
    config.max_idle_timeout(Some(IDLE_TIMEOUT.try_into().expect("30 s fits a VarInt")));
    std::sync::Arc::new(config)
}

fn is_crypto_code(code: quinn::TransportErrorCode) -> bool {
    (0x100..0x200).contains(&u64::from(code))
}

fn map_connection_error(e: quinn::ConnectionError) -> TransportError {
    use quinn::ConnectionError as C;
    match e {
        C::TransportError(ref t) if is_crypto_code(t.code) => TransportError::TlsFailed(e.to_string()),
        C::ConnectionClosed(ref c) if is_crypto_code(c.error_code) => TransportError::TlsFailed(e.to_string()),
        C::TimedOut => TransportError::Timeout,
        other => TransportError::ConnectionLost(other.to_string()),
    }
}

fn map_read_error(e: quinn::ReadToEndError) -> TransportError {
    match e {
        quinn::ReadToEndError::TooLong => TransportError::FramingError("frame exceeds the envelope limit".into()),
        quinn::ReadToEndError::Read(quinn::ReadError::Reset(_)) => TransportError::StreamReset,
        quinn::ReadToEndError::Read(quinn::ReadError::ConnectionLost(c)) => map_connection_error(c),
        quinn::ReadToEndError::Read(other) => TransportError::ConnectionLost(other.to_string()),
    }
}

fn map_write_error(e: quinn::WriteError) -> TransportError {
    match e {
        quinn::WriteError::Stopped(_) => TransportError::StreamReset,
        quinn::WriteError::ConnectionLost(c) => map_connection_error(c),
        other => TransportError::ConnectionLost(other.to_string()),
    }
}

async fn with_timeout<T>(
    limit: Duration,
    fut: impl std::future::Future<Output = Result<T, TransportError>>,
) -> Result<T, TransportError> {
    tokio::time::timeout(limit, fut).await.unwrap_or(Err(TransportError::Timeout))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_addr_forms() {
        let a: EndpointAddr = "quic://resolver.example:8853".parse().unwrap();
        assert_eq!(a, EndpointAddr::new("resolver.example", 8853));
        let b: EndpointAddr = "127.0.0.1:8443".parse().unwrap();
        assert_eq!(b.to_string(), "quic://127.0.0.1:8443");
        let c: EndpointAddr = "[::1]:9".parse().unwrap();
        assert_eq!(c.host, "::1");
        assert!("https://x:1".parse::<EndpointAddr>().is_err());
        assert!("nohost".parse::<EndpointAddr>().is_err());
    }
}
