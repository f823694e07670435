//! Resolver role: open sealed queries, answer from a local zone, seal the
//! answer under the client's key.
//!
//! Key rotation is hard: once rotated, the previous key no longer opens
//! anything, and a query sealed under it is answered with `KEY_UPDATE`
//! carrying the current config.

use std::collections::{HashMap, HashSet, VecDeque};
use std::net::Ipv4Addr;
use std::sync::{Arc, Mutex, RwLock};

use rand::{CryptoRng, RngCore};
use thiserror::Error;

use crate::dns_wire::{
    self, make_a_response, make_error_response, DnsMessage, DnsName, Rcode, RecordClass,
    RecordType,
};
use crate::envelope::{decode_envelope, Envelope, MsgType};
use crate::seal::{
    self, encode_key_config, generate_keypair, KeyConfig, ResolverKeyPair, SealedRequest,
    SESSION_NONCE_LEN,
};

pub const DEFAULT_TTL: u32 = 300;
pub const NONCE_CACHE_CAPACITY: usize = 65536;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResolverError {
    /// Not a stripped OBLIVIOUS_QUERY; the connection-level caller drops it.
    #[error("malformed envelope")]
    MalformedEnvelope,
    /// The query opened but its DNS bytes are unusable; nothing to answer.
    #[error("malformed DNS query inside a valid seal")]
    MalformedQuery,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("zone line {line}: {message}")]
pub struct ZoneError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZoneEntry {
    pub addrs: Vec<Ipv4Addr>,
    pub ttl: u32,
}

/// Local stand-in for the DNS hierarchy. Keys are lowercased names.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ZoneStore {
    records: HashMap<(DnsName, RecordType), ZoneEntry>,
}

impl ZoneStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an A record; repeated names accumulate addresses and keep the
    /// smallest ttl seen.
    pub fn insert_a(&mut self, name: &DnsName, addr: Ipv4Addr, ttl: u32) {
        let entry = self
            .records
            .entry((name.to_lowercase(), RecordType::A))
            .or_insert_with(|| ZoneEntry {
                addrs: Vec::new(),
                ttl,
            });
        entry.addrs.push(addr);
        entry.ttl = entry.ttl.min(ttl);
    }

    pub fn entry(&self, name: &DnsName, rtype: RecordType) -> Option<&ZoneEntry> {
        self.records.get(&(name.to_lowercase(), rtype))
    }

    pub fn lookup(&self, name: &DnsName) -> Vec<Ipv4Addr> {
        self.entry(name, RecordType::A)
            .map(|e| e.addrs.clone())
            .unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &DnsName> {
        self.records.keys().map(|(n, _)| n)
    }
}

/// Parses `<name> A <dotted-quad> [ttl]` lines. `#` starts a comment.
pub fn load_zone(text: &str) -> Result<ZoneStore, ZoneError> {
    let mut zone = ZoneStore::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let err = |message: String| ZoneError { line, message };
        let content = raw.split('#').next().unwrap_or("");
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if !(3..=4).contains(&fields.len()) {
            return Err(err(format!("expected `<name> A <addr> [ttl]`, got {} fields", fields.len())));
        }
        let name = DnsName::from_ascii(fields[0]).map_err(|e| err(e.to_string()))?;
        if name.is_root() {
            return Err(err("record for the root name".into()));
        }
        if fields[1] != "A" {
            return Err(err(format!("unsupported record type `{}`", fields[1])));
        }
        let addr: Ipv4Addr = fields[2]
            .parse()
            .map_err(|_| err(format!("invalid IPv4 address `{}`", fields[2])))?;
        let ttl = match fields.get(3) {
            Some(t) => t.parse().map_err(|_| err(format!("invalid ttl `{t}`")))?,
            None => DEFAULT_TTL,
        };
        zone.insert_a(&name, addr, ttl);
    }
    Ok(zone)
}

pub fn lookup(zone: &ZoneStore, name: &DnsName) -> Vec<Ipv4Addr> {
    zone.lookup(name)
}

/// What the resolver did with a query, for logs and the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HandleOutcome {
    Answered,
    NameError,
    NotImplemented,
    Replay,
    KeyUpdate,
}

/// Bounded FIFO set of seen client nonces.
#[derive(Debug)]
struct NonceCache {
    capacity: usize,
    order: VecDeque<[u8; SESSION_NONCE_LEN]>,
    seen: HashSet<[u8; SESSION_NONCE_LEN]>,
}

impl NonceCache {
    fn new(capacity: usize) -> Self {
        Self {
            capacity,
            order: VecDeque::new(),
            seen: HashSet::new(),
        }
    }

    /// Returns false if the nonce was already present.
    fn insert(&mut self, nonce: [u8; SESSION_NONCE_LEN]) -> bool {
        if self.capacity == 0 {
            return true;
        }
        if !self.seen.insert(nonce) {
            return false;
        }
        self.order.push_back(nonce);
        if self.order.len() > self.capacity {
            if let Some(old) = self.order.pop_front() {
                self.seen.remove(&old);
            }
        }
        true
    }
}

#[derive(Debug)]
struct KeyState {
    current: Arc<ResolverKeyPair>,
    previous: Option<Arc<ResolverKeyPair>>,
}

#[derive(Debug)]
pub struct Resolver {
    keys: RwLock<KeyState>,
    zone: ZoneStore,
    seen_nonces: Mutex<NonceCache>,
}

impl Resolver {
    pub fn new(keypair: ResolverKeyPair, zone: ZoneStore) -> Self {
        Self::with_nonce_capacity(keypair, zone, NONCE_CACHE_CAPACITY)
    }

    pub fn with_nonce_capacity(keypair: ResolverKeyPair, zone: ZoneStore, capacity: usize) -> Self {
        Self {
            keys: RwLock::new(KeyState {
                current: Arc::new(keypair),
                previous: None,
            }),
            zone,
            seen_nonces: Mutex::new(NonceCache::new(capacity.min(NONCE_CACHE_CAPACITY))),
        }
    }

    pub fn zone(&self) -> &ZoneStore {
        &self.zone
    }

    fn current_keypair(&self) -> Arc<ResolverKeyPair> {
        Arc::clone(&self.keys.read().unwrap_or_else(|e| e.into_inner()).current)
    }

    pub fn current_config(&self) -> KeyConfig {
        self.current_keypair().config().clone()
    }

    pub fn previous_config(&self) -> Option<KeyConfig> {
        let keys = self.keys.read().unwrap_or_else(|e| e.into_inner());
        keys.previous.as_ref().map(|k| k.config().clone())
    }

    /// The current key pair, e.g. for persisting after a rotation.
    pub fn current_keypair_snapshot(&self) -> ResolverKeyPair {
        (*self.current_keypair()).clone()
    }

    /// Replaces the current key with a fresh one under the next key id.
    pub fn rotate_keys<R: CryptoRng + RngCore>(&self, rng: &mut R) -> KeyConfig {
        let mut keys = self.keys.write().unwrap_or_else(|e| e.into_inner());
        let old = keys.current.config();
        let fresh = generate_keypair(old.suite(), old.key_id().wrapping_add(1), rng)
            .expect("current suite is supported");
        let config = fresh.config().clone();
        let old = std::mem::replace(&mut keys.current, Arc::new(fresh));
        keys.previous = Some(old);
        config
    }

    pub fn handle_query(&self, e: Envelope) -> Result<Envelope, ResolverError> {
        self.handle_query_detailed(e).map(|(reply, _)| reply)
    }

    pub fn handle_bytes(&self, bytes: &[u8]) -> Result<(Envelope, HandleOutcome), ResolverError> {
        let e = decode_envelope(bytes).map_err(|_| ResolverError::MalformedEnvelope)?;
        self.handle_query_detailed(e)
    }

    pub fn handle_query_detailed(&self, e: Envelope) -> Result<(Envelope, HandleOutcome), ResolverError> {
        if e.msg_type() != MsgType::ObliviousQuery || e.target_uri().is_some() {
            return Err(ResolverError::MalformedEnvelope);
        }
        // Captured once so a concurrent rotation cannot switch keys mid-open.
        let keypair = self.current_keypair();

        let opened = SealedRequest::decode(e.payload())
            .and_then(|q| seal::open_request(&keypair, &q));
        let (query_wire, secrets) = match opened {
            Ok(opened) => opened,
            Err(_) => {
                let update = Envelope::key_update(encode_key_config(keypair.config()))
                    .expect("key config fits in an envelope");
                return Ok((update, HandleOutcome::KeyUpdate));
            }
        };

        let fresh = self
            .seen_nonces
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert(*secrets.nonce());

        let query = dns_wire::decode_message(&query_wire).map_err(|_| ResolverError::MalformedQuery)?;
        if query.is_response {
            return Err(ResolverError::MalformedQuery);
        }

        let (response, outcome) = if !fresh {
            // NOTE: this reuses the response AEAD nonce of the first answer
            // for these secrets, on a different body.
            (make_error_response(&query, Rcode::SERVFAIL), HandleOutcome::Replay)
        } else {
            self.answer(&query)
        };

        let wire = dns_wire::encode_message(&response).map_err(|_| ResolverError::MalformedQuery)?;
        let sealed = seal::seal_response(&secrets, &wire, &query.question.name)
            .map_err(|_| ResolverError::MalformedQuery)?;
        let reply = Envelope::response(sealed.ciphertext).map_err(|_| ResolverError::MalformedQuery)?;
        Ok((reply, outcome))
    }

    fn answer(&self, query: &DnsMessage) -> (DnsMessage, HandleOutcome) {
        let q = &query.question;
        if q.qtype != RecordType::A || q.qclass != RecordClass::IN {
            return (make_error_response(query, Rcode::NOTIMP), HandleOutcome::NotImplemented);
        }
        match self.zone.entry(&q.name, RecordType::A) {
            Some(entry) if !entry.addrs.is_empty() => (
                make_a_response(query, &entry.addrs, entry.ttl),
                HandleOutcome::Answered,
            ),
            _ => (make_a_response(query, &[], DEFAULT_TTL), HandleOutcome::NameError),
        }
    }
}
