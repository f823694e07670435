//! Topology and scenario descriptions, with their line-oriented text form.
//!
//! ```text
//! seed = 7
//! node = client client
//! node = proxy proxy 2        # optional processing delay, ms
//! node = resolver resolver
//! link = client proxy 10
//! link = proxy resolver 10
//! zone = example.com A 10.0.2.5
//! ```

use std::fmt;
use std::str::FromStr;

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Client,
    Proxy,
    Resolver,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Client => "client",
            Self::Proxy => "proxy",
            Self::Resolver => "resolver",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "client" => Ok(Self::Client),
            "proxy" => Ok(Self::Proxy),
            "resolver" => Ok(Self::Resolver),
            other => Err(format!("unknown role `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSpec {
    pub id: String,
    pub role: Role,
    pub processing_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkSpec {
    pub a: String,
    pub b: String,
    pub latency_ms: u64,
}

/// One-way link latencies for the standard three-node layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Latencies {
    pub client_proxy: u64,
    pub proxy_resolver: u64,
    pub client_resolver: u64,
}

impl Latencies {
    pub fn uniform(ms: u64) -> Self {
        Self {
            client_proxy: ms,
            proxy_resolver: ms,
            client_resolver: ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TopologySpec {
    pub seed: u64,
    pub nodes: Vec<NodeSpec>,
    pub links: Vec<LinkSpec>,
    /// Zone file lines served by every resolver node.
    pub zone: Vec<String>,
}

pub const FIXTURE_ZONE: &str = "example.com A 10.0.2.5";

impl TopologySpec {
    /// client, proxy and resolver, fully meshed, serving the fixture zone.
    pub fn chain(latencies: Latencies) -> Self {
        let node = |id: &str, role| NodeSpec {
            id: id.into(),
            role,
            processing_ms: 0,
        };
        let link = |a: &str, b: &str, latency_ms| LinkSpec {
            a: a.into(),
            b: b.into(),
            latency_ms,
        };
        Self {
            seed: 1,
            nodes: vec![
                node("client", Role::Client),
                node("proxy", Role::Proxy),
                node("resolver", Role::Resolver),
            ],
            links: vec![
                link("client", "proxy", latencies.client_proxy),
                link("proxy", "resolver", latencies.proxy_resolver),
                link("client", "resolver", latencies.client_resolver),
            ],
            zone: vec![FIXTURE_ZONE.into()],
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_zone<I: IntoIterator<Item = String>>(mut self, lines: I) -> Self {
        self.zone = lines.into_iter().collect();
        self
    }

    pub fn parse(text: &str) -> Result<Self, SimError> {
        let mut spec = Self::default();
        for (line, key, value) in key_values(text)? {
            let err = |message: String| SimError::Parse { line, message };
            let fields: Vec<&str> = value.split_whitespace().collect();
            match key {
                "seed" => spec.seed = value.parse().map_err(|_| err(format!("bad seed `{value}`")))?,
                "node" => {
                    let (id, role, delay) = match fields.as_slice() {
                        [id, role] => (id, role, "0"),
                        [id, role, delay] => (id, role, *delay),
                        _ => return Err(err("expected `node = <id> <role> [processing_ms]`".into())),
                    };
                    spec.nodes.push(NodeSpec {
                        id: (*id).to_owned(),
                        role: role.parse().map_err(err)?,
                        processing_ms: delay.parse().map_err(|_| err(format!("bad delay `{delay}`")))?,
                    });
                }
                "link" => {
                    let [a, b, latency] = fields.as_slice() else {
                        return Err(err("expected `link = <a> <b> <latency_ms>`".into()));
                    };
                    spec.links.push(LinkSpec {
                        a: (*a).to_owned(),
                        b: (*b).to_owned(),
                        latency_ms: latency
                            .parse()
                            .map_err(|_| err(format!("bad latency `{latency}`")))?,
                    });
                }
                "zone" => spec.zone.push(value.to_owned()),
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        Ok(spec)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("seed = {}\n", self.seed);
        for n in &self.nodes {
            out += &format!("node = {} {} {}\n", n.id, n.role, n.processing_ms);
        }
        for l in &self.links {
            out += &format!("link = {} {} {}\n", l.a, l.b, l.latency_ms);
        }
        for z in &self.zone {
            out += &format!("zone = {z}\n");
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScenarioKind {
    HappyPath,
    NxDomain,
    KeyRotation,
    ReplayDuplicate,
    TamperResponse,
    TamperRequest,
    DenyUnlistedResolver,
    /// Client talks to the resolver with no proxy; the latency baseline.
    DirectPath,
}

impl ScenarioKind {
    /// Every scenario that routes through the proxy.
    pub const OBLIVIOUS: [Self; 7] = [
        Self::HappyPath,
        Self::NxDomain,
        Self::KeyRotation,
        Self::ReplayDuplicate,
        Self::TamperResponse,
        Self::TamperRequest,
        Self::DenyUnlistedResolver,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::HappyPath => "happy_path",
            Self::NxDomain => "nxdomain",
            Self::KeyRotation => "key_rotation",
            Self::ReplayDuplicate => "replay_duplicate",
            Self::TamperResponse => "tamper_response",
            Self::TamperRequest => "tamper_request",
            Self::DenyUnlistedResolver => "deny_unlisted_resolver",
            Self::DirectPath => "direct_path",
        }
    }

    /// Scenarios where the client must reach a final outcome.
    pub fn expects_completion(self) -> bool {
        matches!(
            self,
            Self::HappyPath | Self::NxDomain | Self::KeyRotation | Self::ReplayDuplicate | Self::DirectPath
        )
    }

    fn default_domain(self) -> &'static str {
        match self {
            Self::NxDomain => "unknown.test",
            _ => "example.com",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::OBLIVIOUS
            .into_iter()
            .chain([Self::DirectPath])
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown scenario `{s}`"))
    }
}

/// A scripted run. Unset node ids default to the first node with that role;
/// an unset tamper offset or mask is drawn from the simulation seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub domain: String,
    pub client: Option<String>,
    pub proxy: Option<String>,
    pub resolver: Option<String>,
    pub tamper_offset: Option<usize>,
    pub tamper_mask: Option<u8>,
}

impl Scenario {
    pub fn new(kind: ScenarioKind) -> Self {
        Self {
            kind,
            domain: kind.default_domain().to_owned(),
            client: None,
            proxy: None,
            resolver: None,
            tamper_offset: None,
            tamper_mask: None,
        }
    }

    pub fn with_domain(mut self, domain: impl Into<String>) -> Self {
        self.domain = domain.into();
        self
    }

    pub fn with_tamper(mut self, offset: usize, mask: u8) -> Self {
        self.tamper_offset = Some(offset);
        self.tamper_mask = Some(mask);
        self
    }

    pub fn parse(text: &str) -> Result<Self, SimError> {
        let mut kind = None;
        let mut rest = Vec::new();
        for (line, key, value) in key_values(text)? {
            if key == "scenario" {
                kind = Some(value.parse().map_err(|message| SimError::Parse { line, message })?);
            } else {
                rest.push((line, key, value));
            }
        }
        let mut scenario = Self::new(kind.ok_or(SimError::Parse {
            line: 0,
            message: "missing `scenario = <name>`".into(),
        })?);
        for (line, key, value) in rest {
            let err = |message: String| SimError::Parse { line, message };
            match key {
                "domain" => scenario.domain = value.to_owned(),
                "client" => scenario.client = Some(value.to_owned()),
                "proxy" => scenario.proxy = Some(value.to_owned()),
                "resolver" => scenario.resolver = Some(value.to_owned()),
                "tamper_offset" => {
                    scenario.tamper_offset =
                        Some(value.parse().map_err(|_| err(format!("bad offset `{value}`")))?)
                }
                "tamper_mask" => {
                    let digits = value.trim_start_matches("0x");
                    scenario.tamper_mask = Some(
                        u8::from_str_radix(digits, 16).map_err(|_| err(format!("bad mask `{value}`")))?,
                    )
                }
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        Ok(scenario)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("scenario = {}\ndomain = {}\n", self.kind, self.domain);
        for (key, value) in [("client", &self.client), ("proxy", &self.proxy), ("resolver", &self.resolver)] {
            if let Some(v) = value {
                out += &format!("{key} = {v}\n");
            }
        }
        if let Some(o) = self.tamper_offset {
            out += &format!("tamper_offset = {o}\n");
        }
        if let Some(m) = self.tamper_mask {
            out += &format!("tamper_mask = 0x{m:02x}\n");
        }
        out
    }
}

fn key_values(text: &str) -> Result<Vec<(usize, &str, &str)>, SimError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| SimError::Parse {
            line,
            message: "expected `key = value`".into(),
        })?;
        out.push((line, key.trim(), value.trim()));
    }
    Ok(out)
}
