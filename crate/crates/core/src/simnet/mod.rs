//! Deterministic in-process network for exercising the three roles.
//!
//! Virtual time is integer milliseconds. A packet sent at `t` over a link
//! with latency `L` is delivered at `t + L`; nodes process instantly unless
//! given a processing delay. Events at the same instant run in the order
//! they were scheduled. All randomness (keys, session secrets, HPKE
//! ephemerals, tamper positions) comes from one seeded generator, so a
//! topology and scenario always produce the same transcripts.
//!
//! Each node pair gets at most one connection, opened by whichever side
//! sends first; each request travels on a fresh stream of that connection
//! and its reply comes back on the same stream. Connection setup is counted
//! but costs no time.

mod report;
mod spec;

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::client::{ClientOutcome, ClientSession};
use crate::dns_wire::DnsName;
use crate::envelope::{decode_envelope, encode_envelope, strip_target, MsgType, TargetUri};
use crate::proxy::{DenyReason, ForwardDecision, Proxy, ProxyConfig, ProxyError, SlotId};
use crate::resolver::{load_zone, HandleOutcome, Resolver, ResolverError, ZoneError};
use crate::seal::{generate_keypair, Suite};

pub use report::{Assertion, OverheadReport, ScenarioReport};
pub use spec::{
    Latencies, LinkSpec, NodeSpec, Role, Scenario, ScenarioKind, TopologySpec, FIXTURE_ZONE,
};

pub type NodeId = String;

pub const RESOLVER_PORT: u16 = 8853;
pub const UNLISTED_RESOLVER_URI: &str = "quic://evil.example:1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("duplicate node `{0}`")]
    DuplicateNode(NodeId),
    #[error("link endpoint `{0}` is not a node")]
    UnknownEndpoint(NodeId),
    #[error("duplicate link between `{0}` and `{1}`")]
    DuplicateLink(NodeId, NodeId),
    #[error("no {role} node `{id}` in the topology")]
    UnknownNode { id: NodeId, role: Role },
    #[error("the network went quiet before the client finished `{0}`")]
    Deadlock(ScenarioKind),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Zone(#[from] ZoneError),
    #[error("setup failed: {0}")]
    Setup(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Sent,
    Received,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptEntry {
    pub time_ms: u64,
    pub direction: Direction,
    pub peer: NodeId,
    pub bytes: Vec<u8>,
}

/// Every byte a node put on or took off the wire, in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    pub node_id: NodeId,
    pub entries: Vec<TranscriptEntry>,
}

impl Transcript {
    fn new(node_id: &str) -> Self {
        Self {
            node_id: node_id.to_owned(),
            entries: Vec::new(),
        }
    }

    pub fn concatenated(&self) -> Vec<u8> {
        self.entries.iter().flat_map(|e| e.bytes.iter().copied()).collect()
    }

    pub fn contains(&self, needle: &[u8]) -> bool {
        contains_subslice(&self.concatenated(), needle)
    }
}

pub fn contains_subslice(haystack: &[u8], needle: &[u8]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConnId(pub u64);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResolverEvent {
    Handled(HandleOutcome),
    Dropped(ResolverError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProxyEvent {
    Forwarded(SlotId),
    Denied(DenyReason),
    Relayed(MsgType),
    /// Resolver reply with no live slot or an unusable frame.
    Dropped(String),
}

/// One traversal of one link.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hop {
    pub from: NodeId,
    pub to: NodeId,
    pub sent_ms: u64,
    pub latency_ms: u64,
}

#[derive(Debug, Clone)]
struct Packet {
    from: NodeId,
    to: NodeId,
    conn: ConnId,
    stream: u64,
    bytes: Vec<u8>,
}

#[derive(Debug)]
enum EventKind {
    Deliver(Packet),
    Process(Packet),
}

#[derive(Debug)]
struct Event {
    time: u64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

#[derive(Debug, Clone)]
enum Fault {
    Flip {
        from: NodeId,
        to: NodeId,
        offset: Option<usize>,
        mask: Option<u8>,
    },
    DuplicateFirst {
        from: NodeId,
        to: NodeId,
        done: bool,
    },
}

#[derive(Debug)]
struct ClientDriver {
    session: Option<ClientSession>,
    upstream: NodeId,
    direct: bool,
}

#[derive(Debug)]
struct ProxyDriver {
    core: Proxy<ConnId>,
    client_streams: HashMap<SlotId, (ConnId, u64, NodeId)>,
    resolver_streams: HashMap<(ConnId, u64), SlotId>,
}

#[derive(Debug)]
enum NodeState {
    Client(ClientDriver),
    Proxy(ProxyDriver),
    Resolver(Resolver),
}

#[derive(Debug)]
struct Node {
    role: Role,
    processing_ms: u64,
    state: NodeState,
}

#[derive(Debug, Default)]
struct RunLog {
    client_outcomes: Vec<(u64, ClientOutcome)>,
    resolver_events: Vec<(u64, ResolverEvent)>,
    proxy_events: Vec<(u64, ProxyEvent)>,
    message_counts: BTreeMap<(NodeId, NodeId, String), usize>,
    hops: Vec<Hop>,
    resolver_responses: Vec<Vec<u8>>,
    undeliverable: usize,
    tamper: Option<(usize, u8)>,
}

pub struct Sim {
    seed: u64,
    nodes: BTreeMap<NodeId, Node>,
    links: HashMap<(NodeId, NodeId), u64>,
    clock: u64,
    seq: u64,
    queue: BinaryHeap<Reverse<Event>>,
    conns: BTreeMap<(NodeId, NodeId), (ConnId, u64)>,
    next_conn: u64,
    establishments: BTreeMap<(NodeId, NodeId), u32>,
    transcripts: BTreeMap<NodeId, Transcript>,
    faults: Vec<Fault>,
    rng: ChaCha20Rng,
    log: RunLog,
}

pub fn resolver_uri(node_id: &str) -> String {
    format!("quic://{node_id}:{RESOLVER_PORT}")
}

pub fn build_topology(spec: &TopologySpec) -> Result<Sim, SimError> {
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let zone = load_zone(&spec.zone.join("\n"))?;

    let mut roles = BTreeMap::new();
    for n in &spec.nodes {
        if roles.insert(n.id.clone(), n.role).is_some() {
            return Err(SimError::DuplicateNode(n.id.clone()));
        }
    }
    let mut links = HashMap::new();
    for l in &spec.links {
        for end in [&l.a, &l.b] {
            if !roles.contains_key(end) {
                return Err(SimError::UnknownEndpoint(end.clone()));
            }
        }
        if links.insert((l.a.clone(), l.b.clone()), l.latency_ms).is_some()
            || links.insert((l.b.clone(), l.a.clone()), l.latency_ms).is_some()
        {
            return Err(SimError::DuplicateLink(l.a.clone(), l.b.clone()));
        }
    }

    let allowlist: Vec<String> = spec
        .nodes
        .iter()
        .filter(|n| n.role == Role::Resolver)
        .map(|n| resolver_uri(&n.id))
        .collect();

    let mut nodes = BTreeMap::new();
    let mut transcripts = BTreeMap::new();
    for n in &spec.nodes {
        let state = match n.role {
            Role::Client => NodeState::Client(ClientDriver {
                session: None,
                upstream: String::new(),
                direct: false,
            }),
            Role::Proxy => {
                let config = ProxyConfig::new(allowlist.clone())
                    .map_err(|_| SimError::Setup(format!("proxy `{}` has no resolver to serve", n.id)))?;
                NodeState::Proxy(ProxyDriver {
                    core: Proxy::new(config),
                    client_streams: HashMap::new(),
                    resolver_streams: HashMap::new(),
                })
            }
            Role::Resolver => {
                let keys = generate_keypair(Suite::DEFAULT, 0, &mut rng)
                    .map_err(|e| SimError::Setup(e.to_string()))?;
                NodeState::Resolver(Resolver::new(keys, zone.clone()))
            }
        };
        nodes.insert(
            n.id.clone(),
            Node {
                role: n.role,
                processing_ms: n.processing_ms,
                state,
            },
        );
        transcripts.insert(n.id.clone(), Transcript::new(&n.id));
    }

    Ok(Sim {
        seed: spec.seed,
        nodes,
        links,
        clock: 0,
        seq: 0,
        queue: BinaryHeap::new(),
        conns: BTreeMap::new(),
        next_conn: 0,
        establishments: BTreeMap::new(),
        transcripts,
        faults: Vec::new(),
        rng,
        log: RunLog::default(),
    })
}

enum Route {
    NewStream,
    Reply { conn: ConnId, stream: u64 },
}

impl Sim {
    pub fn now(&self) -> u64 {
        self.clock
    }

    pub fn node_ids(&self) -> impl Iterator<Item = &str> {
        self.nodes.keys().map(String::as_str)
    }

    pub fn resolver(&self, id: &str) -> Option<&Resolver> {
        match self.nodes.get(id).map(|n| &n.state) {
            Some(NodeState::Resolver(r)) => Some(r),
            _ => None,
        }
    }

    fn schedule(&mut self, time: u64, kind: EventKind) {
        let seq = self.seq;
        self.seq += 1;
        self.queue.push(Reverse(Event { time, seq, kind }));
    }

    /// Runs until no events remain; returns the number of events handled.
    pub fn run_until_quiescent(&mut self) -> usize {
        let mut handled = 0;
        while let Some(Reverse(event)) = self.queue.pop() {
            self.clock = event.time;
            handled += 1;
            match event.kind {
                EventKind::Deliver(packet) => self.deliver(packet),
                EventKind::Process(packet) => self.process(packet),
            }
        }
        handled
    }

    fn send(&mut self, from: &str, to: &str, route: Route, mut bytes: Vec<u8>) -> Option<(ConnId, u64)> {
        let Some(&latency) = self.links.get(&(from.to_owned(), to.to_owned())) else {
            self.log.undeliverable += 1;
            return None;
        };
        let (conn, stream) = match route {
            Route::Reply { conn, stream } => (conn, stream),
            Route::NewStream => {
                let key = (from.to_owned(), to.to_owned());
                if !self.conns.contains_key(&key) {
                    let id = ConnId(self.next_conn);
                    self.next_conn += 1;
                    self.conns.insert(key.clone(), (id, 0));
                    *self.establishments.entry(key.clone()).or_default() += 1;
                }
                let entry = self.conns.get_mut(&key).expect("inserted above");
                let stream = entry.1;
                entry.1 += 1;
                (entry.0, stream)
            }
        };

        let kind = decode_envelope(&bytes)
            .map(|e| e.msg_type().to_string())
            .unwrap_or_else(|_| "MALFORMED".into());
        *self
            .log
            .message_counts
            .entry((from.to_owned(), to.to_owned(), kind))
            .or_default() += 1;
        self.log.hops.push(Hop {
            from: from.to_owned(),
            to: to.to_owned(),
            sent_ms: self.clock,
            latency_ms: latency,
        });
        self.record(from, Direction::Sent, to, &bytes);

        let duplicate = self.apply_faults(from, to, &mut bytes);
        let packet = Packet {
            from: from.to_owned(),
            to: to.to_owned(),
            conn,
            stream,
            bytes,
        };
        let at = self.clock + latency;
        if duplicate {
            self.schedule(at, EventKind::Deliver(packet.clone()));
        }
        self.schedule(at, EventKind::Deliver(packet));
        Some((conn, stream))
    }

    /// Mutates bytes in flight; returns true if the packet should be duplicated.
    fn apply_faults(&mut self, from: &str, to: &str, bytes: &mut [u8]) -> bool {
        let mut duplicate = false;
        for fault in &mut self.faults {
            match fault {
                Fault::Flip {
                    from: f,
                    to: t,
                    offset,
                    mask,
                } if f == from && t == to && !bytes.is_empty() => {
                    let off = *offset.get_or_insert_with(|| self.rng.gen_range(0..bytes.len()));
                    let m = *mask.get_or_insert_with(|| self.rng.gen_range(1..=255));
                    let off = off % bytes.len();
                    bytes[off] ^= m;
                    self.log.tamper = Some((off, m));
                }
                Fault::DuplicateFirst { from: f, to: t, done } if f == from && t == to && !*done => {
                    *done = true;
                    duplicate = true;
                }
                _ => {}
            }
        }
        duplicate
    }

    fn record(&mut self, node: &str, direction: Direction, peer: &str, bytes: &[u8]) {
        if let Some(t) = self.transcripts.get_mut(node) {
            t.entries.push(TranscriptEntry {
                time_ms: self.clock,
                direction,
                peer: peer.to_owned(),
                bytes: bytes.to_vec(),
            });
        }
    }

    fn deliver(&mut self, packet: Packet) {
        self.record(&packet.to, Direction::Received, &packet.from, &packet.bytes);
        let delay = self.nodes.get(&packet.to).map_or(0, |n| n.processing_ms);
        if delay == 0 {
            self.process(packet);
        } else {
            self.schedule(self.clock + delay, EventKind::Process(packet));
        }
    }

    fn process(&mut self, packet: Packet) {
        let Some(mut node) = self.nodes.remove(&packet.to) else {
            return;
        };
        match &mut node.state {
            NodeState::Client(driver) => self.client_receive(&packet, driver),
            NodeState::Proxy(driver) => self.proxy_receive(&packet, driver),
            NodeState::Resolver(resolver) => self.resolver_receive(&packet, resolver),
        }
        self.nodes.insert(packet.to.clone(), node);
    }

    fn client_receive(&mut self, packet: &Packet, driver: &mut ClientDriver) {
        let Some(session) = driver.session.as_mut() else {
            return;
        };
        let outcome = session.on_bytes(&packet.bytes, &mut self.rng);
        self.log.client_outcomes.push((self.clock, outcome.clone()));
        if let ClientOutcome::Retry(envelope) = outcome {
            let bytes = if driver.direct {
                encode_envelope(&strip_target(envelope).expect("retry is a query"))
            } else {
                encode_envelope(&envelope)
            };
            let upstream = driver.upstream.clone();
            self.send(&packet.to, &upstream, Route::NewStream, bytes);
        }
    }

    fn proxy_receive(&mut self, packet: &Packet, driver: &mut ProxyDriver) {
        let me = packet.to.as_str();
        if let Some(&slot) = driver.resolver_streams.get(&(packet.conn, packet.stream)) {
            let envelope = match decode_envelope(&packet.bytes) {
                Ok(e) => e,
                Err(e) => {
                    driver.core.abandon(slot);
                    self.log.proxy_events.push((self.clock, ProxyEvent::Dropped(e.to_string())));
                    return;
                }
            };
            match driver.core.on_resolver_reply(slot, envelope) {
                Ok(relay) => {
                    let msg_type = relay.envelope.msg_type();
                    let (conn, stream, client) = driver.client_streams[&slot].clone();
                    if relay.slot_retired {
                        driver.client_streams.remove(&slot);
                    }
                    self.log.proxy_events.push((self.clock, ProxyEvent::Relayed(msg_type)));
                    self.send(me, &client, Route::Reply { conn, stream }, encode_envelope(&relay.envelope));
                }
                Err(e) => {
                    if let ProxyError::UnexpectedType(_) = e {
                        driver.client_streams.remove(&slot);
                    }
                    self.log.proxy_events.push((self.clock, ProxyEvent::Dropped(e.to_string())));
                }
            }
            return;
        }

        if self.conns.get(&(packet.from.clone(), me.to_owned())).map(|c| c.0) != Some(packet.conn) {
            self.log.proxy_events.push((self.clock, ProxyEvent::Dropped("unknown stream".into())));
            return;
        }
        match driver.core.on_client_bytes(&packet.bytes, packet.conn) {
            ForwardDecision::Forward {
                resolver_uri,
                envelope,
                slot,
            } => {
                let target = resolver_uri
                    .parse::<TargetUri>()
                    .ok()
                    .map(|t| t.host)
                    .filter(|host| self.nodes.get(host).is_some_and(|n| n.role == Role::Resolver));
                let Some(target) = target else {
                    driver.core.abandon(slot);
                    self.log.proxy_events.push((self.clock, ProxyEvent::Denied(DenyReason::Timeout)));
                    return;
                };
                driver
                    .client_streams
                    .insert(slot, (packet.conn, packet.stream, packet.from.clone()));
                self.log.proxy_events.push((self.clock, ProxyEvent::Forwarded(slot)));
                match self.send(me, &target, Route::NewStream, encode_envelope(&envelope)) {
                    Some(key) => {
                        driver.resolver_streams.insert(key, slot);
                    }
                    None => {
                        driver.core.abandon(slot);
                    }
                }
            }
            ForwardDecision::Deny(reason) => {
                self.log.proxy_events.push((self.clock, ProxyEvent::Denied(reason)));
            }
        }
    }

    fn resolver_receive(&mut self, packet: &Packet, resolver: &Resolver) {
        match resolver.handle_bytes(&packet.bytes) {
            Ok((reply, outcome)) => {
                self.log.resolver_events.push((self.clock, ResolverEvent::Handled(outcome)));
                if reply.msg_type() == MsgType::ObliviousResponse {
                    self.log.resolver_responses.push(reply.payload().to_vec());
                }
                self.send(
                    &packet.to,
                    &packet.from,
                    Route::Reply {
                        conn: packet.conn,
                        stream: packet.stream,
                    },
                    encode_envelope(&reply),
                );
            }
            Err(e) => self.log.resolver_events.push((self.clock, ResolverEvent::Dropped(e))),
        }
    }

    fn pick(&self, requested: &Option<String>, role: Role) -> Result<NodeId, SimError> {
        match requested {
            Some(id) => match self.nodes.get(id) {
                Some(n) if n.role == role => Ok(id.clone()),
                _ => Err(SimError::UnknownNode { id: id.clone(), role }),
            },
            None => self
                .nodes
                .iter()
                .find(|(_, n)| n.role == role)
                .map(|(id, _)| id.clone())
                .ok_or_else(|| SimError::UnknownNode {
                    id: "<any>".into(),
                    role,
                }),
        }
    }
}

/// Drives one scripted resolution to quiescence and checks its properties.
pub fn run_scenario(mut sim: Sim, scenario: &Scenario) -> Result<ScenarioReport, SimError> {
    use ScenarioKind::*;

    let client = sim.pick(&scenario.client, Role::Client)?;
    let resolver = sim.pick(&scenario.resolver, Role::Resolver)?;
    let direct = scenario.kind == DirectPath;
    let proxy = if direct {
        None
    } else {
        Some(sim.pick(&scenario.proxy, Role::Proxy)?)
    };
    let domain = DnsName::from_ascii(&scenario.domain).map_err(|e| SimError::Setup(e.to_string()))?;

    let fault_link = |from: &Option<String>, to: &Option<String>| {
        (from.clone().unwrap_or_default(), to.clone().unwrap_or_default())
    };
    let resolver_opt = Some(resolver.clone());
    match scenario.kind {
        TamperRequest | TamperResponse => {
            let (from, to) = if scenario.kind == TamperRequest {
                fault_link(&proxy, &resolver_opt)
            } else {
                fault_link(&resolver_opt, &proxy)
            };
            sim.faults.push(Fault::Flip {
                from,
                to,
                offset: scenario.tamper_offset,
                mask: scenario.tamper_mask.filter(|&m| m != 0),
            });
        }
        ReplayDuplicate => {
            let (from, to) = fault_link(&proxy, &resolver_opt);
            sim.faults.push(Fault::DuplicateFirst { from, to, done: false });
        }
        _ => {}
    }

    // The client learns the resolver's key out of band, before any rotation.
    let rr = sim.resolver(&resolver).expect("picked by role");
    let config = rr.current_config();
    let answer_addrs = rr.zone().lookup(&domain);
    if scenario.kind == KeyRotation {
        let rr = match &sim.nodes[&resolver].state {
            NodeState::Resolver(r) => r,
            _ => unreachable!(),
        };
        rr.rotate_keys(&mut sim.rng);
    }

    let target_uri = if scenario.kind == DenyUnlistedResolver {
        UNLISTED_RESOLVER_URI.to_owned()
    } else {
        resolver_uri(&resolver)
    };
    let (session, first) = ClientSession::start(domain.clone(), &target_uri, config, &mut sim.rng)
        .map_err(|e| SimError::Setup(e.to_string()))?;
    let qname_wire = session.query().question.name.to_wire();
    let upstream = proxy.clone().unwrap_or_else(|| resolver.clone());
    let first = if direct {
        strip_target(first).expect("first envelope is a query")
    } else {
        first
    };
    match &mut sim.nodes.get_mut(&client).expect("picked").state {
        NodeState::Client(driver) => {
            driver.session = Some(session);
            driver.upstream = upstream.clone();
            driver.direct = direct;
        }
        _ => unreachable!(),
    }
    let start = sim.clock;
    sim.send(&client, &upstream, Route::NewStream, encode_envelope(&first));
    sim.run_until_quiescent();

    let session = match &sim.nodes[&client].state {
        NodeState::Client(driver) => driver.session.clone().expect("installed above"),
        _ => unreachable!(),
    };
    let final_outcome = sim
        .log
        .client_outcomes
        .iter()
        .rev()
        .find(|(_, o)| !matches!(o, ClientOutcome::Retry(_)))
        .cloned();
    if scenario.kind.expects_completion() && final_outcome.is_none() {
        return Err(SimError::Deadlock(scenario.kind));
    }

    let sealed_rcodes = sim
        .log
        .resolver_responses
        .iter()
        .map(|payload| report::open_rcode(session.secrets(), payload))
        .collect();

    let mut report = ScenarioReport {
        scenario: scenario.kind,
        seed: sim.seed,
        client: client.clone(),
        proxy: proxy.clone(),
        resolver: resolver.clone(),
        domain: scenario.domain.clone(),
        expected_addrs: answer_addrs,
        qname_wire,
        final_outcome: final_outcome.as_ref().map(|(_, o)| o.clone()),
        end_to_end_latency_ms: final_outcome.map(|(t, _)| t - start),
        client_outcomes: std::mem::take(&mut sim.log.client_outcomes),
        resolver_events: std::mem::take(&mut sim.log.resolver_events),
        proxy_events: std::mem::take(&mut sim.log.proxy_events),
        message_counts: std::mem::take(&mut sim.log.message_counts),
        connection_establishments: std::mem::take(&mut sim.establishments),
        hops: std::mem::take(&mut sim.log.hops),
        sealed_rcodes,
        tamper: sim.log.tamper,
        undeliverable: sim.log.undeliverable,
        client_queries_sent: session.queries_sent(),
        transcripts: std::mem::take(&mut sim.transcripts),
        assertions: Vec::new(),
    };
    report.evaluate();
    Ok(report)
}

/// Runs the same lookup through the proxy and directly, on the standard
/// three-node layout with the given one-way latencies.
pub fn compare_direct_vs_oblivious(latencies: Latencies) -> Result<OverheadReport, SimError> {
    let spec = TopologySpec::chain(latencies);
    let oblivious = run_scenario(build_topology(&spec)?, &Scenario::new(ScenarioKind::HappyPath))?;
    let direct = run_scenario(build_topology(&spec)?, &Scenario::new(ScenarioKind::DirectPath))?;
    let rtt = |r: &ScenarioReport| r.end_to_end_latency_ms.ok_or(SimError::Deadlock(r.scenario));
    let oblivious_rtt_ms = rtt(&oblivious)?;
    let direct_rtt_ms = rtt(&direct)?;
    Ok(OverheadReport {
        latencies,
        oblivious_rtt_ms,
        direct_rtt_ms,
        overhead_ms: oblivious_rtt_ms as i64 - direct_rtt_ms as i64,
        oblivious_hops: oblivious.hops,
        direct_hops: direct.hops,
    })
}
