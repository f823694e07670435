//! Oblivious DNS-over-QUIC protocol core.
//!
//! Everything here is sans-IO: the client, proxy and resolver roles are
//! plain state machines over [`envelope::Envelope`] values, so the same code
//! runs under the deterministic [`simnet`] and under a real transport.

pub mod client;
pub mod dns_wire;
pub mod envelope;
pub mod proxy;
pub mod resolver;
pub mod seal;
pub mod simnet;

pub use client::{start_session, ClientOutcome, ClientSession, RejectReason, SessionState};
pub use dns_wire::{decode_message, encode_message, make_a_response, DnsMessage, DnsName};
pub use envelope::{decode_envelope, encode_envelope, strip_target, Envelope, MsgType, TargetUri};
pub use proxy::{DenyReason, ForwardDecision, Proxy, ProxyConfig, RelayDecision, SlotId};
pub use resolver::{load_zone, HandleOutcome, Resolver, ZoneStore};
pub use seal::{
    decode_key_config, encode_key_config, generate_keypair, KeyConfig, ResolverKeyPair,
    SessionSecrets, Suite,
};
