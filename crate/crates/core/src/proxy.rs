//! The oblivious relay.
//!
//! The proxy sees who is asking but only ever handles sealed payloads: it has
//! no access to resolver keys or client secrets, and it moves payload bytes
//! without reading them. Its only state is a table of relay slots that map a
//! forwarded query back to the client channel it came from.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Mutex;

use thiserror::Error;

use crate::envelope::{decode_envelope, strip_target, Envelope, MsgType};

pub const DEFAULT_MAX_SLOTS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProxyError {
    #[error("proxy needs at least one allowed resolver")]
    EmptyAllowlist,
    #[error("no live relay slot {0}")]
    UnknownSlot(SlotId),
    #[error("resolver sent a {0} envelope")]
    UnexpectedType(MsgType),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProxyConfig {
    allowed_resolvers: BTreeSet<String>,
    max_slots: usize,
}

impl ProxyConfig {
    pub fn new<I, S>(allowed_resolvers: I) -> Result<Self, ProxyError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let allowed_resolvers: BTreeSet<String> =
            allowed_resolvers.into_iter().map(Into::into).collect();
        if allowed_resolvers.is_empty() {
            return Err(ProxyError::EmptyAllowlist);
        }
        Ok(Self {
            allowed_resolvers,
            max_slots: DEFAULT_MAX_SLOTS,
        })
    }

    pub fn with_max_slots(mut self, max_slots: usize) -> Self {
        self.max_slots = max_slots;
        self
    }

    pub fn is_allowed(&self, uri: &str) -> bool {
        self.allowed_resolvers.contains(uri)
    }

    pub fn allowed_resolvers(&self) -> impl Iterator<Item = &str> {
        self.allowed_resolvers.iter().map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SlotId(pub u64);

impl fmt::Display for SlotId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// A forwarded query awaiting its reply. Holds a channel handle, never a
/// network address.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelaySlot<C> {
    pub slot_id: SlotId,
    pub client_channel: C,
    pub resolver_uri: String,
    awaiting_retry: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DenyReason {
    NotAllowed,
    Malformed,
    Busy,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ForwardDecision {
    Forward {
        resolver_uri: String,
        envelope: Envelope,
        slot: SlotId,
    },
    Deny(DenyReason),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelayDecision<C> {
    pub client_channel: C,
    pub envelope: Envelope,
    /// False after a KEY_UPDATE: the slot stays up for the client's retry.
    pub slot_retired: bool,
}

#[derive(Debug)]
struct SlotTable<C> {
    next_id: u64,
    live: BTreeMap<SlotId, RelaySlot<C>>,
}

#[derive(Debug)]
pub struct Proxy<C> {
    config: ProxyConfig,
    slots: Mutex<SlotTable<C>>,
}

impl<C: Clone + PartialEq> Proxy<C> {
    pub fn new(config: ProxyConfig) -> Self {
        Self {
            config,
            slots: Mutex::new(SlotTable {
                next_id: 0,
                live: BTreeMap::new(),
            }),
        }
    }

    pub fn config(&self) -> &ProxyConfig {
        &self.config
    }

    pub fn live_slots(&self) -> usize {
        self.table().live.len()
    }

    fn table(&self) -> std::sync::MutexGuard<'_, SlotTable<C>> {
        // a panic while holding the lock cannot leave the table half-updated
        self.slots.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn on_client_bytes(&self, bytes: &[u8], client_channel: C) -> ForwardDecision {
        match decode_envelope(bytes) {
            Ok(e) => self.on_client_query(e, client_channel),
            Err(_) => ForwardDecision::Deny(DenyReason::Malformed),
        }
    }

    pub fn on_client_query(&self, e: Envelope, client_channel: C) -> ForwardDecision {
        if e.msg_type() != MsgType::ObliviousQuery {
            return ForwardDecision::Deny(DenyReason::Malformed);
        }
        let Some(resolver_uri) = e.target_uri().map(str::to_owned) else {
            return ForwardDecision::Deny(DenyReason::Malformed);
        };
        if !self.config.is_allowed(&resolver_uri) {
            return ForwardDecision::Deny(DenyReason::NotAllowed);
        }
        let Ok(envelope) = strip_target(e) else {
            return ForwardDecision::Deny(DenyReason::Malformed);
        };

        let mut table = self.table();
        // A retry after KEY_UPDATE picks up the slot that relayed the update.
        let resumed = table
            .live
            .values_mut()
            .find(|s| s.awaiting_retry && s.client_channel == client_channel && s.resolver_uri == resolver_uri);
        let slot = if let Some(slot) = resumed {
            slot.awaiting_retry = false;
            slot.slot_id
        } else {
            if table.live.len() >= self.config.max_slots {
                return ForwardDecision::Deny(DenyReason::Busy);
            }
            let slot_id = SlotId(table.next_id);
            table.next_id += 1;
            table.live.insert(
                slot_id,
                RelaySlot {
                    slot_id,
                    client_channel,
                    resolver_uri: resolver_uri.clone(),
                    awaiting_retry: false,
                },
            );
            slot_id
        };
        ForwardDecision::Forward {
            resolver_uri,
            envelope,
            slot,
        }
    }

    pub fn on_resolver_reply(&self, slot: SlotId, e: Envelope) -> Result<RelayDecision<C>, ProxyError> {
        let mut table = self.table();
        let Some(live) = table.live.get_mut(&slot) else {
            return Err(ProxyError::UnknownSlot(slot));
        };
        match e.msg_type() {
            MsgType::KeyUpdate => {
                live.awaiting_retry = true;
                Ok(RelayDecision {
                    client_channel: live.client_channel.clone(),
                    envelope: e,
                    slot_retired: false,
                })
            }
            MsgType::ObliviousResponse => {
                let retired = table.live.remove(&slot).expect("slot present");
                Ok(RelayDecision {
                    client_channel: retired.client_channel,
                    envelope: e,
                    slot_retired: true,
                })
            }
            other => {
                table.live.remove(&slot);
                Err(ProxyError::UnexpectedType(other))
            }
        }
    }

    /// Retires a slot whose resolver exchange failed; returns the channel to
    /// notify.
    pub fn abandon(&self, slot: SlotId) -> Option<C> {
        self.table().live.remove(&slot).map(|s| s.client_channel)
    }

    /// Drops every slot belonging to a closed client channel.
    pub fn release_channel(&self, client_channel: &C) -> usize {
        let mut table = self.table();
        let before = table.live.len();
        table.live.retain(|_, s| &s.client_channel != client_channel);
        before - table.live.len()
    }
}
