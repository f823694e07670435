//! Fixtures shared by the benchmarks.

use odoq_core::dns_wire::RecordType;
use odoq_core::{make_a_response, DnsMessage, DnsName};

pub fn example_query() -> DnsMessage {
    DnsMessage::query(0x1234, DnsName::from_ascii("example.com").unwrap(), RecordType::A)
}

pub fn example_response() -> DnsMessage {
    make_a_response(&example_query(), &["10.0.2.5".parse().unwrap(), "10.0.2.6".parse().unwrap()], 300)
}
