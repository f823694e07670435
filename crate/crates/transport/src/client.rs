use std::collections::HashMap;
use std::net::{Ipv4Addr, Ipv6Addr, SocketAddr};
use std::time::Duration;

use odoq_core::envelope::{decode_envelope, encode_envelope, Envelope, MAX_ENVELOPE_LEN};
use tokio::sync::Mutex;

use crate::{
    map_connection_error, map_read_error, map_write_error, with_timeout, EndpointAddr, ServerTrust, TransportError,
    DEFAULT_TIMEOUT,
};

/// Opens and pools connections; at most one live [`Channel`] per peer.
pub struct Connector {
    config: quinn::ClientConfig,
    timeout: Duration,
    state: Mutex<Pool>,
}

#[derive(Default)]
struct Pool {
    v4: Option<quinn::Endpoint>,
    v6: Option<quinn::Endpoint>,
    channels: HashMap<EndpointAddr, Channel>,
    establishments: HashMap<EndpointAddr, u64>,
}

impl Pool {
    fn endpoint(&mut self, remote: &SocketAddr) -> Result<quinn::Endpoint, TransportError> {
        let (slot, local): (_, SocketAddr) = match remote {
            SocketAddr::V4(_) => (&mut self.v4, (Ipv4Addr::UNSPECIFIED, 0).into()),
            SocketAddr::V6(_) => (&mut self.v6, (Ipv6Addr::UNSPECIFIED, 0).into()),
        };
        if let Some(ep) = slot {
            return Ok(ep.clone());
        }
        let ep = quinn::Endpoint::client(local).map_err(|e| TransportError::Bind(format!("{local}: {e}")))?;
        *slot = Some(ep.clone());
        Ok(ep)
    }
}

impl Connector {
    pub fn new(trust: &ServerTrust) -> Result<Self, TransportError> {
        Ok(Self {
            config: trust.client_config()?,
            timeout: DEFAULT_TIMEOUT,
            state: Mutex::new(Pool::default()),
        })
    }

    /// Applies to connection setup and to each exchange.
    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// The pooled channel to `addr`, establishing a connection only when
    /// there is none or the previous one has closed.
    ///
    /// A handshake with no reply within the timeout is `ConnectFailed`:
    /// over UDP a closed port usually looks exactly like that.
    pub async fn connect(&self, addr: &EndpointAddr) -> Result<Channel, TransportError> {
        let mut pool = self.state.lock().await;
        if let Some(ch) = pool.channels.get(addr) {
            if ch.conn.close_reason().is_none() {
                return Ok(ch.clone());
            }
            pool.channels.remove(addr);
        }
        let remote = with_timeout(self.timeout, addr.resolve()).await?;
        let endpoint = pool.endpoint(&remote)?;
        let connecting = endpoint
            .connect_with(self.config.clone(), remote, addr.server_name())
            .map_err(|e| TransportError::ConnectFailed(format!("{addr}: {e}")))?;
        let conn = match tokio::time::timeout(self.timeout, connecting).await {
            Ok(Ok(conn)) => conn,
            Ok(Err(e)) => {
                return Err(match map_connection_error(e) {
                    TransportError::Timeout => TransportError::ConnectFailed(format!("{addr}: no response")),
                    TransportError::ConnectionLost(m) => TransportError::ConnectFailed(m),
                    other => other,
                })
            }
            Err(_) => return Err(TransportError::ConnectFailed(format!("{addr}: no response"))),
        };
        let count = pool.establishments.entry(addr.clone()).or_default();
        *count += 1;
        log::debug!("connected to {addr} ({remote}), establishment #{count}");
        let channel = Channel {
            conn,
            peer: addr.clone(),
            establishment_count: *count,
            timeout: self.timeout,
        };
        pool.channels.insert(addr.clone(), channel.clone());
        Ok(channel)
    }

    /// Connections set up to `addr` so far by this connector.
    pub async fn establishment_count(&self, addr: &EndpointAddr) -> u64 {
        self.state.lock().await.establishments.get(addr).copied().unwrap_or(0)
    }

    /// Closes every pooled connection.
    pub async fn close(&self) {
        let mut pool = self.state.lock().await;
        for (_, ch) in pool.channels.drain() {
            ch.conn.close(0u32.into(), b"done");
        }
        for ep in [pool.v4.take(), pool.v6.take()].into_iter().flatten() {
            ep.wait_idle().await;
        }
    }
}

/// An established connection. Cloning shares the connection.
#[derive(Clone)]
pub struct Channel {
    conn: quinn::Connection,
    peer: EndpointAddr,
    establishment_count: u64,
    timeout: Duration,
}

impl std::fmt::Debug for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Channel")
            .field("peer", &self.peer)
            .field("establishment_count", &self.establishment_count)
            .finish()
    }
}

impl Channel {
    pub fn peer(&self) -> &EndpointAddr {
        &self.peer
    }

    /// Connections to this peer set up by the pool, this one included.
    pub fn establishment_count(&self) -> u64 {
        self.establishment_count
    }

    pub fn is_open(&self) -> bool {
        self.conn.close_reason().is_none()
    }

    /// Sends one envelope on a new stream and waits for its single reply.
    pub async fn exchange(&self, envelope: &Envelope) -> Result<Envelope, TransportError> {
        self.exchange_frame(&encode_envelope(envelope)).await
    }

    /// As [`Channel::exchange`], with a pre-encoded request frame.
    pub async fn exchange_frame(&self, frame: &[u8]) -> Result<Envelope, TransportError> {
        if frame.len() > MAX_ENVELOPE_LEN {
            return Err(TransportError::FramingError(format!(
                "{} byte frame exceeds {MAX_ENVELOPE_LEN}",
                frame.len()
            )));
        }
        with_timeout(self.timeout, async {
            let (mut send, mut recv) = self.conn.open_bi().await.map_err(map_connection_error)?;
            send.write_all(frame).await.map_err(map_write_error)?;
            send.finish().map_err(|_| TransportError::StreamReset)?;
            let reply = recv.read_to_end(MAX_ENVELOPE_LEN).await.map_err(map_read_error)?;
            Ok(decode_envelope(&reply)?)
        })
        .await
    }
}
