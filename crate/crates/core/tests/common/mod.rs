#![allow(dead_code)]

use std::net::Ipv4Addr;

use odoq_core::dns_wire::{Question, Rcode, RecordClass, RecordType, ResourceRecord};
use odoq_core::seal::SessionSecrets;
use odoq_core::{strip_target, DnsMessage, DnsName, Envelope};
use proptest::prelude::*;

pub fn label() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9][a-zA-Z0-9-]{0,14}"
}

pub fn name() -> impl Strategy<Value = DnsName> {
    prop::collection::vec(label(), 0..5).prop_map(|labels| DnsName::from_labels(labels).unwrap())
}

/// Lowercase presentation name of at least `min` characters.
pub fn domain_text(min: usize) -> impl Strategy<Value = String> {
    prop::collection::vec("[a-z][a-z0-9]{2,12}", 2..5)
        .prop_map(|labels| labels.join("."))
        .prop_filter("too short", move |d| d.len() >= min)
}

pub fn answer_addr() -> impl Strategy<Value = Ipv4Addr> {
    prop::array::uniform4(1u8..=254).prop_map(Ipv4Addr::from)
}

fn record() -> impl Strategy<Value = ResourceRecord> {
    (name(), any::<u16>(), any::<u32>(), prop::collection::vec(any::<u8>(), 0..20)).prop_map(
        |(name, rtype, ttl, rdata)| ResourceRecord {
            name,
            rtype: RecordType(rtype),
            rclass: RecordClass::IN,
            ttl,
            rdata,
        },
    )
}

pub fn message() -> impl Strategy<Value = DnsMessage> {
    (
        any::<u16>(),
        any::<bool>(),
        any::<bool>(),
        prop::sample::select(vec![Rcode::NOERROR, Rcode::SERVFAIL, Rcode::NXDOMAIN, Rcode::NOTIMP]),
        name(),
        prop::sample::select(vec![RecordType::A, RecordType::AAAA, RecordType(16)]),
        prop::collection::vec(record(), 0..4),
    )
        .prop_map(|(txid, is_response, rd, rcode, qname, qtype, answers)| DnsMessage {
            txid,
            is_response,
            recursion_desired: rd,
            rcode: if is_response { rcode } else { Rcode::NOERROR },
            question: Question {
                name: qname,
                qtype,
                qclass: RecordClass::IN,
            },
            answers: if is_response { answers } else { Vec::new() },
        })
}

pub fn envelope() -> impl Strategy<Value = Envelope> {
    let payload = prop::collection::vec(any::<u8>(), 0..600);
    prop_oneof![
        ("[a-z][a-z0-9.-]{0,30}", any::<u16>(), payload.clone())
            .prop_map(|(host, port, p)| Envelope::query(format!("quic://{host}:{port}"), p).unwrap()),
        payload.clone().prop_map(|p| strip_target(Envelope::query("quic://r:1", p).unwrap()).unwrap()),
        payload.clone().prop_map(|p| Envelope::response(p).unwrap()),
        payload.prop_map(|p| Envelope::key_update(p).unwrap()),
    ]
}

pub fn secrets() -> impl Strategy<Value = SessionSecrets> {
    (any::<[u8; 16]>(), any::<[u8; 16]>()).prop_map(|(k, n)| SessionSecrets::new(k, n))
}
