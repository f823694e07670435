//! Hop-by-hop framing.
//!
//! ```text
//! version u8 | msg_type u8 | target_len u16 | target_uri | payload_len u32 | payload
//! ```
//!
//! The target URI is only present on a query travelling from the client to
//! the proxy; the proxy strips it before forwarding.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub const VERSION: u8 = 0x01;
pub const MAX_PAYLOAD_LEN: usize = 1 << 20;
/// Fixed bytes around the variable fields.
pub const FRAME_OVERHEAD: usize = 1 + 1 + 2 + 4;
/// Upper bound on an encoded envelope.
pub const MAX_ENVELOPE_LEN: usize = FRAME_OVERHEAD + u16::MAX as usize + MAX_PAYLOAD_LEN;

const URI_SCHEME: &str = "quic://";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvelopeError {
    #[error("unsupported envelope version {0:#04x}")]
    BadVersion(u8),
    #[error("unknown message type {0:#04x}")]
    UnknownMsgType(u8),
    #[error("envelope truncated")]
    Truncated,
    #[error("trailing bytes after envelope")]
    TrailingBytes,
    #[error("payload of {0} bytes exceeds the 1 MiB limit")]
    PayloadTooLarge(usize),
    #[error("invalid target: {0}")]
    InvalidTarget(&'static str),
    #[error("operation not valid for this message type")]
    WrongType,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MsgType {
    ObliviousQuery,
    ObliviousResponse,
    KeyUpdate,
}

impl MsgType {
    pub fn to_byte(self) -> u8 {
        match self {
            Self::ObliviousQuery => 0x01,
            Self::ObliviousResponse => 0x02,
            Self::KeyUpdate => 0x03,
        }
    }

    pub fn from_byte(b: u8) -> Result<Self, EnvelopeError> {
        match b {
            0x01 => Ok(Self::ObliviousQuery),
            0x02 => Ok(Self::ObliviousResponse),
            0x03 => Ok(Self::KeyUpdate),
            other => Err(EnvelopeError::UnknownMsgType(other)),
        }
    }
}

impl fmt::Display for MsgType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ObliviousQuery => "OBLIVIOUS_QUERY",
            Self::ObliviousResponse => "OBLIVIOUS_RESPONSE",
            Self::KeyUpdate => "KEY_UPDATE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    msg_type: MsgType,
    target_uri: Option<String>,
    payload: Vec<u8>,
}

impl Envelope {
    /// A client query addressed to `target_uri` via the proxy.
    pub fn query(target_uri: impl Into<String>, payload: Vec<u8>) -> Result<Self, EnvelopeError> {
        let target_uri = target_uri.into();
        check_target(&target_uri)?;
        Self::new(MsgType::ObliviousQuery, Some(target_uri), payload)
    }

    pub fn response(payload: Vec<u8>) -> Result<Self, EnvelopeError> {
        Self::new(MsgType::ObliviousResponse, None, payload)
    }

    pub fn key_update(payload: Vec<u8>) -> Result<Self, EnvelopeError> {
        Self::new(MsgType::KeyUpdate, None, payload)
    }

    fn new(
        msg_type: MsgType,
        target_uri: Option<String>,
        payload: Vec<u8>,
    ) -> Result<Self, EnvelopeError> {
        if payload.len() > MAX_PAYLOAD_LEN {
            return Err(EnvelopeError::PayloadTooLarge(payload.len()));
        }
        if target_uri.is_some() && msg_type != MsgType::ObliviousQuery {
            return Err(EnvelopeError::InvalidTarget("only queries carry a target"));
        }
        Ok(Self {
            msg_type,
            target_uri,
            payload,
        })
    }

    pub fn msg_type(&self) -> MsgType {
        self.msg_type
    }

    pub fn target_uri(&self) -> Option<&str> {
        self.target_uri.as_deref()
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    pub fn into_payload(self) -> Vec<u8> {
        self.payload
    }

    pub fn encoded_len(&self) -> usize {
        FRAME_OVERHEAD + self.target_uri.as_ref().map_or(0, String::len) + self.payload.len()
    }
}

fn check_target(uri: &str) -> Result<(), EnvelopeError> {
    if uri.is_empty() {
        return Err(EnvelopeError::InvalidTarget("empty"));
    }
    if !uri.is_ascii() {
        return Err(EnvelopeError::InvalidTarget("not ASCII"));
    }
    if uri.len() > usize::from(u16::MAX) {
        return Err(EnvelopeError::InvalidTarget("too long"));
    }
    Ok(())
}

pub fn encode_envelope(e: &Envelope) -> Vec<u8> {
    let target = e.target_uri.as_deref().unwrap_or("");
    let mut out = Vec::with_capacity(e.encoded_len());
    out.push(VERSION);
    out.push(e.msg_type.to_byte());
    // lengths were bounded at construction
    out.extend_from_slice(&(target.len() as u16).to_be_bytes());
    out.extend_from_slice(target.as_bytes());
    out.extend_from_slice(&(e.payload.len() as u32).to_be_bytes());
    out.extend_from_slice(&e.payload);
    out
}

pub fn decode_envelope(bytes: &[u8]) -> Result<Envelope, EnvelopeError> {
    fn take<'a>(buf: &mut &'a [u8], n: usize) -> Result<&'a [u8], EnvelopeError> {
        if buf.len() < n {
            return Err(EnvelopeError::Truncated);
        }
        let (head, tail) = buf.split_at(n);
        *buf = tail;
        Ok(head)
    }

    let mut buf = bytes;
    let version = take(&mut buf, 1)?[0];
    if version != VERSION {
        return Err(EnvelopeError::BadVersion(version));
    }
    let msg_type = MsgType::from_byte(take(&mut buf, 1)?[0])?;
    let t = take(&mut buf, 2)?;
    let target_len = usize::from(u16::from_be_bytes([t[0], t[1]]));
    let target = take(&mut buf, target_len)?;
    let p = take(&mut buf, 4)?;
    let payload_len = u32::from_be_bytes([p[0], p[1], p[2], p[3]]) as usize;
    if payload_len > MAX_PAYLOAD_LEN {
        return Err(EnvelopeError::PayloadTooLarge(payload_len));
    }
    let payload = take(&mut buf, payload_len)?.to_vec();
    if !buf.is_empty() {
        return Err(EnvelopeError::TrailingBytes);
    }

    let target_uri = if target.is_empty() {
        None
    } else {
        let uri = std::str::from_utf8(target)
            .map_err(|_| EnvelopeError::InvalidTarget("not ASCII"))?
            .to_owned();
        check_target(&uri)?;
        Some(uri)
    };
    Envelope::new(msg_type, target_uri, payload)
}

/// Drops the destination metadata from a client query. The payload is moved,
/// never inspected.
pub fn strip_target(e: Envelope) -> Result<Envelope, EnvelopeError> {
    if e.msg_type != MsgType::ObliviousQuery {
        return Err(EnvelopeError::WrongType);
    }
    Ok(Envelope {
        target_uri: None,
        ..e
    })
}

/// `quic://host:port`
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TargetUri {
    pub host: String,
    pub port: u16,
}

impl FromStr for TargetUri {
    type Err = EnvelopeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let rest = s
            .strip_prefix(URI_SCHEME)
            .ok_or(EnvelopeError::InvalidTarget("scheme must be quic://"))?;
        let (host, port) = rest
            .rsplit_once(':')
            .ok_or(EnvelopeError::InvalidTarget("missing port"))?;
        let host = host
            .strip_prefix('[')
            .and_then(|h| h.strip_suffix(']'))
            .unwrap_or(host);
        if host.is_empty() || !host.is_ascii() || host.contains(['/', ' ']) {
            return Err(EnvelopeError::InvalidTarget("bad host"));
        }
        let port = port
            .parse()
            .map_err(|_| EnvelopeError::InvalidTarget("bad port"))?;
        Ok(Self {
            host: host.to_owned(),
            port,
        })
    }
}

impl fmt::Display for TargetUri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.host.contains(':') {
            write!(f, "{URI_SCHEME}[{}]:{}", self.host, self.port)
        } else {
            write!(f, "{URI_SCHEME}{}:{}", self.host, self.port)
        }
    }
}
