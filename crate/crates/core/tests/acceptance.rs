//! Acceptance checks for the protocol core, one line per criterion.
//!
//! Runs without the libtest harness so each verdict is printed even when
//! output capture is on. Exits non-zero if any criterion fails.

mod common;

use std::net::Ipv4Addr;
use std::time::{Duration, Instant};

use aes_gcm::aead::{Aead, KeyInit, Payload};
use aes_gcm::{Aes128Gcm, Nonce};
use odoq_core::dns_wire::{RecordType, Rcode};
use odoq_core::seal::{
    open_request, open_response, seal_request, seal_response, SealedRequest, SealedResponse, SessionSecrets,
};
use odoq_core::simnet::{
    build_topology, compare_direct_vs_oblivious, run_scenario, Direction, Latencies, LinkSpec, NodeSpec, Role,
    Scenario, ScenarioKind, ScenarioReport, TopologySpec,
};
use odoq_core::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

type Verdict = Result<String, String>;
type Check = (&'static str, fn() -> Verdict);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn run(name: &str, f: fn() -> Verdict) -> bool {
    let started = Instant::now();
    let verdict = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
    let ms = started.elapsed().as_millis();
    match &verdict {
        Ok(detail) => println!("PASS {name} ({ms} ms): {detail}"),
        Err(detail) => println!("FAIL {name} ({ms} ms): {detail}"),
    }
    verdict.is_ok()
}

fn main() {
    let criteria: [Check; 8] = [
        ("criterion 1 end-to-end happy path", happy_path),
        ("criterion 2 proxy blindness", proxy_blindness),
        ("criterion 3 resolver identity blindness", resolver_blindness),
        ("criterion 4 tamper rejection", tamper_rejection),
        ("criterion 5 nonce binding", nonce_binding),
        ("criterion 6 key rotation recovery", key_rotation),
        ("criterion 7 latency model", latency_model),
        ("criterion 8 codec properties", codec_properties),
    ];
    let failed = criteria.iter().filter(|(name, f)| !run(name, *f)).count();
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn chain(lat: u64) -> TopologySpec {
    TopologySpec::chain(Latencies::uniform(lat))
}

fn scenario(spec: &TopologySpec, s: &Scenario) -> Result<ScenarioReport, String> {
    let sim = build_topology(spec).map_err(|e| e.to_string())?;
    run_scenario(sim, s).map_err(|e| e.to_string())
}

fn contains(haystack: &[u8], needle: &[u8]) -> bool {
    haystack.windows(needle.len()).any(|w| w == needle)
}

fn happy_path() -> Verdict {
    let started = Instant::now();
    let report = scenario(&chain(10), &Scenario::new(ScenarioKind::HappyPath))?;
    let wall = started.elapsed();
    let expected = vec![Ipv4Addr::new(10, 0, 2, 5)];
    match &report.final_outcome {
        Some(ClientOutcome::Answer { addrs, .. }) if *addrs == expected => {}
        other => return Err(format!("outcome {other:?}")),
    }
    ensure!(wall < Duration::from_secs(1), "took {wall:?}");
    Ok(format!("Answer([10.0.2.5]) in {wall:?} wall"))
}

/// Hand-written wire form of the question name, independent of the codec.
fn qname_oracle(domain: &str) -> Vec<u8> {
    let mut out = Vec::new();
    for label in domain.split('.') {
        out.push(label.len() as u8);
        out.extend_from_slice(label.as_bytes());
    }
    out.push(0);
    out
}

fn proxy_blindness() -> Verdict {
    let mut rng = ChaCha20Rng::seed_from_u64(0x0b11_d0e5);
    let mut runner = TestRunner::new_with_rng(
        Config::default(),
        proptest::test_runner::TestRng::from_seed(proptest::test_runner::RngAlgorithm::ChaCha, &rng.gen::<[u8; 32]>()),
    );
    let domains = common::domain_text(10);
    let addrs = common::answer_addr();
    let mut cases = 0;
    while cases < 100 {
        use proptest::strategy::{Strategy, ValueTree};
        let domain = domains.new_tree(&mut runner).map_err(|e| e.to_string())?.current();
        let addr = addrs.new_tree(&mut runner).map_err(|e| e.to_string())?.current();
        let spec = chain(5)
            .with_seed(rng.gen())
            .with_zone([format!("{domain} A {addr}")]);
        let report = scenario(&spec, &Scenario::new(ScenarioKind::HappyPath).with_domain(domain.clone()))?;
        match &report.final_outcome {
            Some(ClientOutcome::Answer { addrs, .. }) if *addrs == [addr] => {}
            other => return Err(format!("{domain}: outcome {other:?}")),
        }
        let proxy = report.transcript("proxy").ok_or("no proxy transcript")?.concatenated();
        ensure!(!proxy.is_empty(), "proxy saw nothing");
        ensure!(!contains(&proxy, &qname_oracle(&domain)), "{domain}: QNAME wire visible to proxy");
        ensure!(!contains(&proxy, &addr.octets()), "{domain}: answer {addr} visible to proxy");
        cases += 1;
    }
    Ok(format!("{cases} domains, 0 occurrences"))
}

fn resolver_blindness() -> Verdict {
    // Distinctive client name so any leak of it is unambiguous.
    let client = "alice-laptop-4242";
    let mut spec = chain(7);
    spec.nodes[0] = NodeSpec {
        id: client.into(),
        role: Role::Client,
        processing_ms: 0,
    };
    for link in &mut spec.links {
        for end in [&mut link.a, &mut link.b] {
            if end == "client" {
                *end = client.into();
            }
        }
    }
    let mut checked = 0;
    for seed in 1..=8 {
        let spec = spec.clone().with_seed(seed);
        for kind in ScenarioKind::OBLIVIOUS {
            let report = scenario(&spec, &Scenario::new(kind))?;
            let t = report.transcript("resolver").ok_or("no resolver transcript")?;
            for entry in &t.entries {
                ensure!(entry.peer == "proxy", "{kind}: resolver talked to {}", entry.peer);
                ensure!(!contains(&entry.bytes, client.as_bytes()), "{kind}: client id in resolver bytes");
                if entry.direction == Direction::Received {
                    if let Ok(e) = decode_envelope(&entry.bytes) {
                        ensure!(e.target_uri().is_none(), "{kind}: target reached resolver");
                    }
                }
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} resolver transcript entries, 0 violations"))
}

fn tamper_rejection() -> Verdict {
    let mut rng = ChaCha20Rng::seed_from_u64(0x7a3e_0064);
    let mut summary = Vec::new();
    for kind in [ScenarioKind::TamperRequest, ScenarioKind::TamperResponse] {
        let (mut rejects, mut key_updates, mut drops) = (0, 0, 0);
        for i in 0..64 {
            let offset = rng.gen_range(0..256);
            let mask = rng.gen_range(1..=255u8);
            let spec = chain(10).with_seed(1000 + i);
            let report = scenario(&spec, &Scenario::new(kind).with_tamper(offset, mask))?;
            ensure!(report.tamper.is_some(), "{kind} #{i}: no flip applied");
            let mut saw_reject = false;
            for (_, o) in &report.client_outcomes {
                match o {
                    ClientOutcome::Answer { .. } | ClientOutcome::NameError => {
                        return Err(format!("{kind} #{i}: client accepted {o:?}"))
                    }
                    ClientOutcome::Retry(_) => key_updates += 1,
                    ClientOutcome::Reject(_) => saw_reject = true,
                }
            }
            if saw_reject {
                rejects += 1;
            } else {
                drops += 1;
            }
        }
        summary.push(format!("{kind}: {rejects} reject, {drops} drop, {key_updates} key updates"));
    }
    Ok(format!("{}; 0 false answers", summary.join("; ")))
}

/// HMAC-SHA256 and one HKDF block, written out from the definitions.
fn hmac_sha256(key: &[u8], msg: &[u8]) -> [u8; 32] {
    let mut k = [0u8; 64];
    if key.len() > 64 {
        k[..32].copy_from_slice(&Sha256::digest(key));
    } else {
        k[..key.len()].copy_from_slice(key);
    }
    let inner: Vec<u8> = k.iter().map(|b| b ^ 0x36).chain(msg.iter().copied()).collect();
    let inner = Sha256::digest(&inner);
    let outer: Vec<u8> = k.iter().map(|b| b ^ 0x5c).chain(inner.iter().copied()).collect();
    Sha256::digest(&outer).into()
}

fn oracle_response_nonce(sym_key: &[u8], client_nonce: &[u8]) -> [u8; 12] {
    let prk = hmac_sha256(client_nonce, sym_key);
    let t1 = hmac_sha256(&prk, b"odoq response\x01");
    t1[..12].try_into().unwrap()
}

/// Seals a response body built by hand, with the body nonce chosen freely.
fn oracle_seal(secrets: &SessionSecrets, body_nonce: &[u8; 16], domain: &str, wire: &[u8]) -> Vec<u8> {
    let mut body = vec![16];
    body.extend_from_slice(body_nonce);
    body.push(domain.len() as u8);
    body.extend_from_slice(domain.as_bytes());
    body.extend_from_slice(&(wire.len() as u16).to_be_bytes());
    body.extend_from_slice(wire);
    let nonce = oracle_response_nonce(secrets.sym_key(), secrets.nonce());
    Aes128Gcm::new(secrets.sym_key().into())
        .encrypt(Nonce::from_slice(&nonce), Payload { msg: &body, aad: &[0x02] })
        .unwrap()
}

fn nonce_binding() -> Verdict {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let zone = load_zone("example.com A 10.0.2.5").unwrap();
    let resolver = Resolver::new(generate_keypair(Suite::DEFAULT, 0, &mut rng).unwrap(), zone);
    let fresh = |rng: &mut ChaCha20Rng| {
        let (session, q) = start_session("example.com", "quic://resolver:8853", resolver.current_config(), rng).unwrap();
        let reply = resolver.handle_query(strip_target(q).unwrap()).unwrap();
        let (wire, _, _) = open_response(session.secrets(), &SealedResponse { ciphertext: reply.into_payload() }).unwrap();
        (session, wire)
    };

    // The oracle's sealing must agree with the implementation byte for byte.
    let (mut session, wire) = fresh(&mut rng);
    let secrets = session.secrets().clone();
    let ours = seal_response(&secrets, &wire, &DnsName::from_ascii("example.com").unwrap()).unwrap();
    ensure!(oracle_seal(&secrets, secrets.nonce(), "example.com", &wire) == ours.ciphertext, "oracle disagrees");
    let ok = session.on_envelope(Envelope::response(ours.ciphertext).unwrap(), &mut rng);
    ensure!(matches!(ok, ClientOutcome::Answer { .. }), "correct response rejected: {ok:?}");

    // Right key, wrong nonce in the key schedule.
    let (mut session, wire) = fresh(&mut rng);
    let mut other = *session.secrets().nonce();
    other[0] ^= 0x80;
    let wrong = SessionSecrets::new(*session.secrets().sym_key(), other);
    let resealed = seal_response(&wrong, &wire, &DnsName::from_ascii("example.com").unwrap()).unwrap();
    let o1 = session.on_envelope(Envelope::response(resealed.ciphertext).unwrap(), &mut rng);
    ensure!(matches!(o1, ClientOutcome::Reject(_)), "wrong-nonce reseal accepted: {o1:?}");

    // Valid AEAD, but the sealed body names a different nonce.
    let (mut session, wire) = fresh(&mut rng);
    let mut other = *session.secrets().nonce();
    other[15] ^= 1;
    let forged = oracle_seal(session.secrets(), &other, "example.com", &wire);
    let o2 = session.on_envelope(Envelope::response(forged).unwrap(), &mut rng);
    ensure!(o2 == ClientOutcome::Reject(RejectReason::NonceMismatch), "body nonce mismatch: {o2:?}");

    let report = scenario(&chain(10), &Scenario::new(ScenarioKind::ReplayDuplicate))?;
    let answers = report
        .client_outcomes
        .iter()
        .filter(|(_, o)| matches!(o, ClientOutcome::Answer { .. }))
        .count();
    let servfails = report.sealed_rcodes.iter().filter(|r| **r == Some(Rcode::SERVFAIL.0)).count();
    let noerrors = report.sealed_rcodes.iter().filter(|r| **r == Some(Rcode::NOERROR.0)).count();
    ensure!(answers == 1, "{answers} answers under replay");
    ensure!(servfails == 1 && noerrors == 1, "sealed rcodes {:?}", report.sealed_rcodes);
    Ok(format!("reseal {o1:?}, forged body {o2:?}; replay gave 1 Answer and 1 sealed SERVFAIL"))
}

fn key_rotation() -> Verdict {
    let report = scenario(&chain(10), &Scenario::new(ScenarioKind::KeyRotation))?;
    let expected = vec![Ipv4Addr::new(10, 0, 2, 5)];
    match &report.final_outcome {
        Some(ClientOutcome::Answer { addrs, .. }) if *addrs == expected => {}
        other => return Err(format!("outcome {other:?}")),
    }
    let updates = report.count("resolver", "proxy", "KEY_UPDATE");
    let relayed = report.count("proxy", "client", "KEY_UPDATE");
    ensure!(updates == 1 && relayed == 1, "KEY_UPDATE sent {updates}, relayed {relayed}");
    let queries = report.count("client", "proxy", "OBLIVIOUS_QUERY");
    ensure!(queries == 2 && report.client_queries_sent == 2, "{queries} client queries");
    let cp = report.establishments("client", "proxy");
    let pr = report.establishments("proxy", "resolver");
    ensure!(cp == 1 && pr == 1, "establishments client-proxy {cp}, proxy-resolver {pr}");
    ensure!(report.connection_establishments.len() == 2, "{:?}", report.connection_establishments);
    Ok("1 KEY_UPDATE, 2 queries, 1 connection per hop".into())
}

fn latency_model() -> Verdict {
    let spot = compare_direct_vs_oblivious(Latencies::uniform(10)).map_err(|e| e.to_string())?;
    ensure!(
        (spot.oblivious_rtt_ms, spot.direct_rtt_ms) == (40, 20),
        "spot {} vs {}",
        spot.oblivious_rtt_ms,
        spot.direct_rtt_ms
    );
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    for _ in 0..200 {
        let l = Latencies {
            client_proxy: rng.gen_range(0..10_000),
            proxy_resolver: rng.gen_range(0..10_000),
            client_resolver: rng.gen_range(0..10_000),
        };
        let r = compare_direct_vs_oblivious(l).map_err(|e| e.to_string())?;
        ensure!(r.oblivious_rtt_ms == 2 * (l.client_proxy + l.proxy_resolver), "{l:?}: {}", r.oblivious_rtt_ms);
        ensure!(r.direct_rtt_ms == 2 * l.client_resolver, "{l:?}: {}", r.direct_rtt_ms);
    }
    // Asymmetric topology: latencies set per link, not derived from a chain.
    let spec = TopologySpec {
        links: vec![
            LinkSpec { a: "proxy".into(), b: "client".into(), latency_ms: 3 },
            LinkSpec { a: "resolver".into(), b: "proxy".into(), latency_ms: 11 },
            LinkSpec { a: "client".into(), b: "resolver".into(), latency_ms: 13 },
        ],
        ..chain(0)
    };
    let r = scenario(&spec, &Scenario::new(ScenarioKind::HappyPath))?;
    ensure!(r.end_to_end_latency_ms == Some(28), "{:?}", r.end_to_end_latency_ms);
    Ok("spot 40 ms vs 20 ms; 200 random latency sets exact".into())
}

fn codec_properties() -> Verdict {
    const EXAMPLE_QUERY: [u8; 29] = [
        0x12, 0x34, 0x01, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x07, b'e', b'x', b'a', b'm', b'p',
        b'l', b'e', 0x03, b'c', b'o', b'm', 0x00, 0x00, 0x01, 0x00, 0x01,
    ];
    let expected = DnsMessage::query(0x1234, DnsName::from_ascii("example.com").unwrap(), RecordType::A);
    let decoded = decode_message(&EXAMPLE_QUERY).map_err(|e| e.to_string())?;
    ensure!(decoded == expected, "decoded {decoded:?}");
    ensure!(encode_message(&expected).unwrap() == EXAMPLE_QUERY, "encoding differs from the 29-byte oracle");

    let config = || Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    };

    TestRunner::new(config())
        .run(&common::message(), |m| {
            let wire = encode_message(&m).unwrap();
            proptest::prop_assert_eq!(decode_message(&wire).unwrap(), m);
            Ok(())
        })
        .map_err(|e| fail_with("DnsMessage", e))?;

    TestRunner::new(config())
        .run(&common::envelope(), |e| {
            proptest::prop_assert_eq!(decode_envelope(&encode_envelope(&e)).unwrap(), e);
            Ok(())
        })
        .map_err(|e| fail_with("Envelope", e))?;

    TestRunner::new(config())
        .run(&(proptest::prelude::any::<u8>(), proptest::prelude::any::<[u8; 32]>()), |(id, pk)| {
            let c = KeyConfig::new(id, Suite::DEFAULT, pk.to_vec()).unwrap();
            let wire = encode_key_config(&c);
            proptest::prop_assert_eq!(wire.len(), 9 + 32);
            proptest::prop_assert_eq!(decode_key_config(&wire).unwrap(), c);
            Ok(())
        })
        .map_err(|e| fail_with("KeyConfig", e))?;

    let mut keys = ChaCha20Rng::seed_from_u64(8);
    let pair = generate_keypair(Suite::DEFAULT, 3, &mut keys).unwrap();
    TestRunner::new(config())
        .run(&(common::secrets(), common::name(), proptest::prelude::any::<u64>()), |(s, q, seed)| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let wire = encode_message(&DnsMessage::query(seed as u16, q, RecordType::A)).unwrap();
            let sealed = seal_request(pair.config(), &wire, &s, &mut rng).unwrap();
            let parsed = SealedRequest::decode(&sealed.encode()).unwrap();
            let (back, secrets) = open_request(&pair, &parsed).unwrap();
            proptest::prop_assert_eq!(back, wire);
            proptest::prop_assert_eq!(secrets, s);
            Ok(())
        })
        .map_err(|e| fail_with("seal/open request", e))?;

    TestRunner::new(config())
        .run(
            &(common::secrets(), common::name(), proptest::collection::vec(proptest::prelude::any::<u8>(), 0..512)),
            |(s, domain, wire)| {
                let sealed = seal_response(&s, &wire, &domain).unwrap();
                let (back, d, nonce) = open_response(&s, &sealed).unwrap();
                proptest::prop_assert_eq!(back, wire);
                proptest::prop_assert_eq!(d, domain);
                proptest::prop_assert_eq!(&nonce, s.nonce());
                Ok(())
            },
        )
        .map_err(|e| fail_with("seal/open response", e))?;

    Ok("29-byte oracle matches; 5 x 1000-case roundtrips pass".into())
}

fn fail_with<T: std::fmt::Debug>(what: &str, e: proptest::test_runner::TestError<T>) -> String {
    format!("{what}: {e}")
}
