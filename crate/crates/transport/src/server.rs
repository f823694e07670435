use std::net::SocketAddr;
use std::time::Duration;

use odoq_core::envelope::{decode_envelope, encode_envelope, Envelope, MAX_ENVELOPE_LEN};

use crate::{map_connection_error, map_read_error, map_write_error, with_timeout, TlsIdentity, TransportError};

/// Application error code sent when a stream is abandoned without a reply.
const RESET_CODE: u32 = 1;

pub struct Listener {
    endpoint: quinn::Endpoint,
}

impl Listener {
    /// Must be called inside a tokio runtime.
    pub fn bind(addr: SocketAddr, identity: &TlsIdentity) -> Result<Self, TransportError> {
        let config = identity.server_config()?;
        let endpoint = quinn::Endpoint::server(config, addr).map_err(|e| TransportError::Bind(format!("{addr}: {e}")))?;
        Ok(Self { endpoint })
    }

    pub fn local_addr(&self) -> Result<SocketAddr, TransportError> {
        self.endpoint.local_addr().map_err(|e| TransportError::Bind(e.to_string()))
    }

    /// Next connection with its handshake complete. `None` once the listener
    /// is closed; a failed handshake yields `Some(Err(_))`.
    pub async fn accept(&self) -> Option<Result<ServerConnection, TransportError>> {
        let incoming = self.endpoint.accept().await?;
        Some(match incoming.await {
            Ok(conn) => Ok(ServerConnection { conn }),
            Err(e) => Err(map_connection_error(e)),
        })
    }

    pub fn close(&self) {
        self.endpoint.close(0u32.into(), b"shutdown");
    }
}

#[derive(Clone)]
pub struct ServerConnection {
    conn: quinn::Connection,
}

impl ServerConnection {
    pub fn remote_addr(&self) -> SocketAddr {
        self.conn.remote_address()
    }

    /// Stable for the life of the connection; distinct across live connections.
    pub fn id(&self) -> usize {
        self.conn.stable_id()
    }

    /// Waits for the peer's next stream and reads its request.
    ///
    /// `Ok(None)` means the connection is gone. A malformed or oversized
    /// request resets that stream and returns `FramingError`; the
    /// connection stays usable.
    pub async fn accept_exchange(&self, read_timeout: Duration) -> Result<Option<(Envelope, Responder)>, TransportError> {
        let (mut send, mut recv) = match self.conn.accept_bi().await {
            Ok(pair) => pair,
            Err(_) => return Ok(None),
        };
        let read = with_timeout(read_timeout, async {
            recv.read_to_end(MAX_ENVELOPE_LEN).await.map_err(map_read_error)
        })
        .await;
        let frame = match read {
            Ok(frame) => frame,
            Err(e) => {
                let _ = send.reset(RESET_CODE.into());
                return Err(e);
            }
        };
        match decode_envelope(&frame) {
            Ok(envelope) => Ok(Some((envelope, Responder { send, done: false }))),
            Err(e) => {
                let _ = send.reset(RESET_CODE.into());
                Err(e.into())
            }
        }
    }
}

/// Reply half of one exchange. Dropping it without replying resets the stream.
pub struct Responder {
    send: quinn::SendStream,
    done: bool,
}

impl Responder {
    pub async fn reply(mut self, envelope: &Envelope) -> Result<(), TransportError> {
        let frame = encode_envelope(envelope);
        self.send.write_all(&frame).await.map_err(map_write_error)?;
        self.send.finish().map_err(|_| TransportError::StreamReset)?;
        self.done = true;
        // Leave the stream open until the peer has it, or the connection dies.
        let _ = self.send.stopped().await;
        Ok(())
    }

    pub fn reset(self) {
        drop(self);
    }
}

impl Drop for Responder {
    fn drop(&mut self) {
        if !self.done {
            let _ = self.send.reset(RESET_CODE.into());
        }
    }
}
