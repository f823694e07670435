use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::net::Ipv4Addr;

use super::{contains_subslice, Hop, Latencies, NodeId, ProxyEvent, ResolverEvent, ScenarioKind, Transcript};
use crate::client::{ClientOutcome, RejectReason};
use crate::dns_wire::{decode_message, Rcode};
use crate::envelope::decode_envelope;
use crate::proxy::DenyReason;
use crate::resolver::HandleOutcome;
use crate::seal::{open_response, SealedResponse, SessionSecrets};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assertion {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct ScenarioReport {
    pub scenario: ScenarioKind,
    pub seed: u64,
    pub client: NodeId,
    pub proxy: Option<NodeId>,
    pub resolver: NodeId,
    pub domain: String,
    /// Zone contents for the queried name at the time of the query.
    pub expected_addrs: Vec<Ipv4Addr>,
    pub qname_wire: Vec<u8>,
    pub final_outcome: Option<ClientOutcome>,
    pub end_to_end_latency_ms: Option<u64>,
    pub client_outcomes: Vec<(u64, ClientOutcome)>,
    pub resolver_events: Vec<(u64, ResolverEvent)>,
    pub proxy_events: Vec<(u64, ProxyEvent)>,
    /// Keyed by (from, to, message type).
    pub message_counts: BTreeMap<(NodeId, NodeId, String), usize>,
    /// Keyed by (initiator, acceptor).
    pub connection_establishments: BTreeMap<(NodeId, NodeId), u32>,
    pub hops: Vec<Hop>,
    /// Rcode of each sealed response the resolver emitted, opened with the
    /// client's secrets; `None` if it did not open.
    pub sealed_rcodes: Vec<Option<u8>>,
    /// Offset and mask of the last bit flip applied in flight.
    pub tamper: Option<(usize, u8)>,
    pub undeliverable: usize,
    pub client_queries_sent: u8,
    pub transcripts: BTreeMap<NodeId, Transcript>,
    pub assertions: Vec<Assertion>,
}

#[derive(Debug, Clone)]
pub struct OverheadReport {
    pub latencies: Latencies,
    pub oblivious_rtt_ms: u64,
    pub direct_rtt_ms: u64,
    pub overhead_ms: i64,
    pub oblivious_hops: Vec<Hop>,
    pub direct_hops: Vec<Hop>,
}

pub(super) fn open_rcode(secrets: &SessionSecrets, payload: &[u8]) -> Option<u8> {
    let sealed = SealedResponse {
        ciphertext: payload.to_vec(),
    };
    let (wire, _, _) = open_response(secrets, &sealed).ok()?;
    decode_message(&wire).ok().map(|m| m.rcode.0)
}

impl ScenarioReport {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn assertion(&self, name: &str) -> Option<&Assertion> {
        self.assertions.iter().find(|a| a.name == name)
    }

    pub fn transcript(&self, node: &str) -> Option<&Transcript> {
        self.transcripts.get(node)
    }

    pub fn count(&self, from: &str, to: &str, msg_type: &str) -> usize {
        self.message_counts
            .get(&(from.to_owned(), to.to_owned(), msg_type.to_owned()))
            .copied()
            .unwrap_or(0)
    }

    pub fn establishments(&self, initiator: &str, acceptor: &str) -> u32 {
        self.connection_establishments
            .get(&(initiator.to_owned(), acceptor.to_owned()))
            .copied()
            .unwrap_or(0)
    }

    pub fn resolver_outcomes(&self) -> Vec<HandleOutcome> {
        self.resolver_events
            .iter()
            .filter_map(|(_, e)| match e {
                ResolverEvent::Handled(o) => Some(*o),
                ResolverEvent::Dropped(_) => None,
            })
            .collect()
    }

    fn check(&mut self, name: &'static str, passed: bool, detail: impl Into<String>) {
        self.assertions.push(Assertion {
            name,
            passed,
            detail: detail.into(),
        });
    }

    fn answered(&self) -> bool {
        self.client_outcomes
            .iter()
            .any(|(_, o)| matches!(o, ClientOutcome::Answer { .. }))
    }

    pub(super) fn evaluate(&mut self) {
        use ScenarioKind::*;

        if let Some(proxy) = self.proxy.clone() {
            self.check_proxy_blindness(&proxy);
            self.check_resolver_blindness(&proxy);
        }

        let outcome = self.final_outcome.clone();
        let outcome_text = format!("{outcome:?}");
        let resolver_outcomes = self.resolver_outcomes();
        match self.scenario {
            HappyPath | DirectPath => {
                let ok = matches!(&outcome, Some(ClientOutcome::Answer { addrs, .. }) if *addrs == self.expected_addrs)
                    && !self.expected_addrs.is_empty();
                self.check("client_answer_matches_zone", ok, outcome_text);
                let ok = self.client_queries_sent == 1;
                self.check("single_query", ok, format!("{} queries", self.client_queries_sent));
            }
            NxDomain => {
                let ok = outcome == Some(ClientOutcome::NameError);
                self.check("client_name_error", ok, outcome_text);
                let ok = resolver_outcomes == [HandleOutcome::NameError];
                self.check("resolver_nxdomain", ok, format!("{resolver_outcomes:?}"));
            }
            KeyRotation => {
                let ok = matches!(&outcome, Some(ClientOutcome::Answer { addrs, .. }) if *addrs == self.expected_addrs);
                self.check("client_answer_after_retry", ok, outcome_text);
                let ok = resolver_outcomes == [HandleOutcome::KeyUpdate, HandleOutcome::Answered];
                self.check("key_update_then_answer", ok, format!("{resolver_outcomes:?}"));
                let ok = self.client_queries_sent == 2;
                self.check("exactly_one_retry", ok, format!("{} queries", self.client_queries_sent));
                let proxy = self.proxy.clone().unwrap_or_default();
                let n = self.establishments(&self.client.clone(), &proxy);
                self.check("client_connection_reused", n == 1, format!("{n} establishments"));
                let n = self.establishments(&proxy, &self.resolver.clone());
                self.check("resolver_connection_reused", n == 1, format!("{n} establishments"));
            }
            ReplayDuplicate => {
                let ok = matches!(&outcome, Some(ClientOutcome::Answer { addrs, .. }) if *addrs == self.expected_addrs);
                self.check("client_answer", ok, outcome_text);
                let ok = resolver_outcomes == [HandleOutcome::Answered, HandleOutcome::Replay];
                self.check("resolver_flags_replay", ok, format!("{resolver_outcomes:?}"));
                let servfail = Some(Rcode::SERVFAIL.0);
                let ok = self.sealed_rcodes.get(1) == Some(&servfail);
                self.check("replay_sealed_servfail", ok, format!("{:?}", self.sealed_rcodes));
                let delivered = self
                    .transcripts
                    .get(&self.client)
                    .map_or(0, |t| t.entries.iter().filter(|e| e.direction == super::Direction::Received).count());
                self.check("client_gets_one_reply", delivered == 1, format!("{delivered} replies"));
            }
            TamperResponse | TamperRequest => {
                self.check("tamper_applied", self.tamper.is_some(), format!("{:?}", self.tamper));
                let answered = self.answered();
                self.check("no_answer_accepted", !answered, format!("{:?}", self.client_outcomes));
                let ok = self.client_outcomes.iter().all(|(_, o)| {
                    matches!(
                        o,
                        ClientOutcome::Retry(_)
                            | ClientOutcome::Reject(
                                RejectReason::DecryptFailure
                                    | RejectReason::MalformedResponse
                                    | RejectReason::RepeatedKeyUpdate
                                    | RejectReason::BadKeyUpdate
                                    | RejectReason::UnexpectedMessage
                            )
                    )
                });
                self.check("client_rejects_or_waits", ok, outcome_text);
                if self.scenario == TamperRequest {
                    let ok = !resolver_outcomes.contains(&HandleOutcome::Answered);
                    self.check("resolver_never_answers", ok, format!("{resolver_outcomes:?}"));
                }
            }
            DenyUnlistedResolver => {
                let ok = self
                    .proxy_events
                    .iter()
                    .any(|(_, e)| *e == ProxyEvent::Denied(DenyReason::NotAllowed));
                self.check("proxy_denies", ok, format!("{:?}", self.proxy_events));
                let quiet = self.transcripts.get(&self.resolver).is_none_or(|t| t.entries.is_empty());
                self.check("resolver_untouched", quiet, "");
                self.check("client_gets_nothing", outcome.is_none(), outcome_text);
            }
        }
    }

    fn check_proxy_blindness(&mut self, proxy: &str) {
        let Some(t) = self.transcripts.get(proxy) else {
            self.check("proxy_blind", false, "no proxy transcript");
            return;
        };
        let bytes = t.concatenated();
        let mut leaks = Vec::new();
        if contains_subslice(&bytes, &self.qname_wire) {
            leaks.push("qname wire".to_owned());
        }
        if contains_subslice(&bytes, self.domain.trim_end_matches('.').as_bytes()) {
            leaks.push("qname text".to_owned());
        }
        for addr in &self.expected_addrs {
            if contains_subslice(&bytes, &addr.octets()) {
                leaks.push(format!("answer {addr}"));
            }
        }
        let ok = leaks.is_empty();
        self.check("proxy_blind", ok, leaks.join(", "));
    }

    fn check_resolver_blindness(&mut self, proxy: &str) {
        let Some(t) = self.transcripts.get(&self.resolver) else {
            self.check("resolver_blind", false, "no resolver transcript");
            return;
        };
        let mut problems = Vec::new();
        for entry in &t.entries {
            if entry.peer != proxy {
                problems.push(format!("peer {}", entry.peer));
            }
            if entry.direction == super::Direction::Received {
                if let Ok(e) = decode_envelope(&entry.bytes) {
                    if e.target_uri().is_some() {
                        problems.push("target in received envelope".into());
                    }
                }
            }
        }
        if t.contains(self.client.as_bytes()) {
            problems.push("client id bytes".into());
        }
        let ok = problems.is_empty();
        self.check("resolver_blind", ok, problems.join(", "));
    }

    /// Line-oriented summary; identical inputs give identical text.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scenario {} seed {}", self.scenario, self.seed);
        let _ = writeln!(out, "domain {}", self.domain);
        let _ = writeln!(out, "outcome {:?}", self.final_outcome);
        match self.end_to_end_latency_ms {
            Some(ms) => {
                let _ = writeln!(out, "latency_ms {ms}");
            }
            None => {
                let _ = writeln!(out, "latency_ms none");
            }
        }
        for hop in &self.hops {
            let _ = writeln!(out, "hop t={} {} -> {} +{}ms", hop.sent_ms, hop.from, hop.to, hop.latency_ms);
        }
        for ((from, to, kind), n) in &self.message_counts {
            let _ = writeln!(out, "msg {from} -> {to} {kind} x{n}");
        }
        for ((a, b), n) in &self.connection_establishments {
            let _ = writeln!(out, "conn {a} -> {b} x{n}");
        }
        for (t, e) in &self.resolver_events {
            let _ = writeln!(out, "resolver t={t} {e:?}");
        }
        for (t, e) in &self.proxy_events {
            let _ = writeln!(out, "proxy t={t} {e:?}");
        }
        for a in &self.assertions {
            let verdict = if a.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "{verdict} {} {}", a.name, a.detail);
        }
        out
    }
}
