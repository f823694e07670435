//! Client side of a single oblivious resolution.
//!
//! A [`ClientSession`] produces the initial query envelope, then consumes
//! whatever the proxy relays back. A `KEY_UPDATE` reply triggers exactly one
//! re-seal of the same query and secrets under the new key; the caller sends
//! it on the connection it already has.

use std::net::Ipv4Addr;

use rand::{CryptoRng, Rng, RngCore};
use thiserror::Error;

use crate::dns_wire::{self, DnsMessage, DnsName, Rcode, RecordType, WireError};
use crate::envelope::{Envelope, EnvelopeError, MsgType, TargetUri};
use crate::seal::{
    self, decode_key_config, KeyConfig, SealError, SealedResponse, SessionSecrets,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClientError {
    #[error(transparent)]
    InvalidName(#[from] WireError),
    #[error(transparent)]
    Seal(#[from] SealError),
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionState {
    AwaitingResponse,
    Done,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    DecryptFailure,
    MalformedResponse,
    DomainMismatch,
    NonceMismatch,
    TxidMismatch,
    QuestionMismatch,
    /// Verified, but the resolver reported an error other than NXDOMAIN.
    ServerFailure(u8),
    BadKeyUpdate,
    RepeatedKeyUpdate,
    UnexpectedMessage,
    /// The session already finished.
    NotAwaiting,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClientOutcome {
    Answer { addrs: Vec<Ipv4Addr>, ttl: u32 },
    NameError,
    /// Send this envelope on the same connection and keep waiting.
    Retry(Envelope),
    Reject(RejectReason),
}

#[derive(Debug, Clone)]
pub struct ClientSession {
    domain: DnsName,
    resolver_uri: String,
    key_config: KeyConfig,
    secrets: SessionSecrets,
    query: DnsMessage,
    query_wire: Vec<u8>,
    state: SessionState,
    retried: bool,
    queries_sent: u8,
}

impl ClientSession {
    pub fn start<R: CryptoRng + RngCore>(
        domain: DnsName,
        resolver_uri: &str,
        key_config: KeyConfig,
        rng: &mut R,
    ) -> Result<(Self, Envelope), ClientError> {
        resolver_uri.parse::<TargetUri>()?;
        let query = DnsMessage::query(rng.gen(), domain.clone(), RecordType::A);
        let query_wire = dns_wire::encode_message(&query)?;
        let secrets = SessionSecrets::generate(rng);
        let mut session = Self {
            domain,
            resolver_uri: resolver_uri.to_owned(),
            key_config,
            secrets,
            query,
            query_wire,
            state: SessionState::AwaitingResponse,
            retried: false,
            queries_sent: 0,
        };
        let envelope = session.seal_query(rng)?;
        Ok((session, envelope))
    }

    fn seal_query<R: CryptoRng + RngCore>(&mut self, rng: &mut R) -> Result<Envelope, ClientError> {
        let sealed = seal::seal_request(&self.key_config, &self.query_wire, &self.secrets, rng)?;
        let envelope = Envelope::query(self.resolver_uri.clone(), sealed.encode())?;
        self.queries_sent += 1;
        Ok(envelope)
    }

    pub fn domain(&self) -> &DnsName {
        &self.domain
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn retried(&self) -> bool {
        self.retried
    }

    pub fn queries_sent(&self) -> u8 {
        self.queries_sent
    }

    pub fn query(&self) -> &DnsMessage {
        &self.query
    }

    pub fn query_wire(&self) -> &[u8] {
        &self.query_wire
    }

    pub fn secrets(&self) -> &SessionSecrets {
        &self.secrets
    }

    pub fn key_config(&self) -> &KeyConfig {
        &self.key_config
    }

    pub fn on_envelope<R: CryptoRng + RngCore>(&mut self, e: Envelope, rng: &mut R) -> ClientOutcome {
        if self.state != SessionState::AwaitingResponse {
            return ClientOutcome::Reject(RejectReason::NotAwaiting);
        }
        let outcome = match e.msg_type() {
            MsgType::ObliviousResponse => self.verify_response(e.into_payload()),
            MsgType::KeyUpdate => self.retry_under_new_key(e.payload(), rng),
            MsgType::ObliviousQuery => ClientOutcome::Reject(RejectReason::UnexpectedMessage),
        };
        self.state = match outcome {
            ClientOutcome::Answer { .. } | ClientOutcome::NameError => SessionState::Done,
            ClientOutcome::Retry(_) => SessionState::AwaitingResponse,
            ClientOutcome::Reject(_) => SessionState::Failed,
        };
        outcome
    }

    /// Convenience for byte-oriented drivers; undecodable input is a reject.
    pub fn on_bytes<R: CryptoRng + RngCore>(&mut self, bytes: &[u8], rng: &mut R) -> ClientOutcome {
        match crate::envelope::decode_envelope(bytes) {
            Ok(e) => self.on_envelope(e, rng),
            Err(_) if self.state != SessionState::AwaitingResponse => {
                ClientOutcome::Reject(RejectReason::NotAwaiting)
            }
            Err(_) => {
                self.state = SessionState::Failed;
                ClientOutcome::Reject(RejectReason::MalformedResponse)
            }
        }
    }

    fn retry_under_new_key<R: CryptoRng + RngCore>(&mut self, payload: &[u8], rng: &mut R) -> ClientOutcome {
        if self.retried {
            return ClientOutcome::Reject(RejectReason::RepeatedKeyUpdate);
        }
        let Ok(config) = decode_key_config(payload) else {
            return ClientOutcome::Reject(RejectReason::BadKeyUpdate);
        };
        self.key_config = config;
        self.retried = true;
        match self.seal_query(rng) {
            Ok(envelope) => ClientOutcome::Retry(envelope),
            Err(_) => ClientOutcome::Reject(RejectReason::BadKeyUpdate),
        }
    }

    fn verify_response(&self, payload: Vec<u8>) -> ClientOutcome {
        use RejectReason::*;

        let sealed = SealedResponse {
            ciphertext: payload,
        };
        let (wire, domain, nonce) = match seal::open_response(&self.secrets, &sealed) {
            Ok(opened) => opened,
            Err(SealError::MalformedBody) => return ClientOutcome::Reject(MalformedResponse),
            Err(_) => return ClientOutcome::Reject(DecryptFailure),
        };
        if !domain.eq_ignore_case(&self.domain) {
            return ClientOutcome::Reject(DomainMismatch);
        }
        if &nonce != self.secrets.nonce() {
            return ClientOutcome::Reject(NonceMismatch);
        }
        let Ok(response) = dns_wire::decode_message(&wire) else {
            return ClientOutcome::Reject(MalformedResponse);
        };
        if !response.is_response {
            return ClientOutcome::Reject(MalformedResponse);
        }
        if response.txid != self.query.txid {
            return ClientOutcome::Reject(TxidMismatch);
        }
        if response.question.qtype != self.query.question.qtype
            || !response.question.name.eq_ignore_case(&self.domain)
        {
            return ClientOutcome::Reject(QuestionMismatch);
        }

        match response.rcode {
            Rcode::NOERROR => {
                let addrs: Vec<Ipv4Addr> = response.ipv4_answers().collect();
                let ttl = response
                    .answers
                    .iter()
                    .filter(|rr| rr.ipv4().is_some())
                    .map(|rr| rr.ttl)
                    .min()
                    .unwrap_or(0);
                ClientOutcome::Answer { addrs, ttl }
            }
            Rcode::NXDOMAIN => ClientOutcome::NameError,
            Rcode(other) => ClientOutcome::Reject(ServerFailure(other)),
        }
    }
}

/// Starts a session and returns the encoded first envelope alongside it.
pub fn start_session<R: CryptoRng + RngCore>(
    domain: &str,
    resolver_uri: &str,
    key_config: KeyConfig,
    rng: &mut R,
) -> Result<(ClientSession, Envelope), ClientError> {
    ClientSession::start(DnsName::from_ascii(domain)?, resolver_uri, key_config, rng)
}
