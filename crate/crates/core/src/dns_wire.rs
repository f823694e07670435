//! Minimal DNS message codec: one question, A-record answers.
//!
//! Encoding never emits compression pointers. Decoding accepts them as long
//! as every pointer jumps strictly backwards from the segment it appears in,
//! which rules out both forward references and loops.

use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use thiserror::Error;

/// Size of the fixed DNS header.
pub const HEADER_LEN: usize = 12;
/// Longest permitted label.
pub const MAX_LABEL_LEN: usize = 63;
/// Longest permitted encoded name, length octets and root terminator included.
pub const MAX_NAME_LEN: usize = 255;

const FLAG_QR: u16 = 0x8000;
const FLAG_RD: u16 = 0x0100;
const FLAG_RA: u16 = 0x0080;
const OPCODE_MASK: u16 = 0x7800;
const RCODE_MASK: u16 = 0x000f;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("invalid name: {0}")]
    InvalidName(&'static str),
    #[error("message truncated")]
    Truncated,
    #[error("bad compression pointer")]
    BadPointer,
    #[error("malformed message: {0}")]
    Malformed(&'static str),
}

/// A domain name as an ordered list of labels. Zero labels is the root.
///
/// Labels are kept exactly as given; comparisons that need DNS semantics go
/// through [`DnsName::eq_ignore_case`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct DnsName {
    labels: Vec<Vec<u8>>,
}

impl DnsName {
    pub fn root() -> Self {
        Self::default()
    }

    pub fn from_labels<I, L>(labels: I) -> Result<Self, WireError>
    where
        I: IntoIterator<Item = L>,
        L: Into<Vec<u8>>,
    {
        let name = Self {
            labels: labels.into_iter().map(Into::into).collect(),
        };
        name.validate()?;
        Ok(name)
    }

    /// Parses presentation form (`example.com`, optional trailing dot).
    pub fn from_ascii(text: &str) -> Result<Self, WireError> {
        let text = text.strip_suffix('.').unwrap_or(text);
        if text.is_empty() {
            return Ok(Self::root());
        }
        Self::from_labels(text.split('.').map(|l| l.as_bytes().to_vec()))
    }

    fn validate(&self) -> Result<(), WireError> {
        for label in &self.labels {
            if label.is_empty() {
                return Err(WireError::InvalidName("empty label"));
            }
            if label.len() > MAX_LABEL_LEN {
                return Err(WireError::InvalidName("label longer than 63 bytes"));
            }
            if !label.iter().all(|&b| b.is_ascii_graphic() && b != b'.') {
                return Err(WireError::InvalidName("label is not printable ASCII"));
            }
        }
        if self.wire_len() > MAX_NAME_LEN {
            return Err(WireError::InvalidName("name longer than 255 bytes"));
        }
        Ok(())
    }

    pub fn labels(&self) -> impl Iterator<Item = &[u8]> {
        self.labels.iter().map(Vec::as_slice)
    }

    pub fn is_root(&self) -> bool {
        self.labels.is_empty()
    }

    /// Encoded length: one length octet per label plus the terminal zero.
    pub fn wire_len(&self) -> usize {
        self.labels.iter().map(|l| l.len() + 1).sum::<usize>() + 1
    }

    /// Uncompressed wire form.
    pub fn to_wire(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.wire_len());
        self.encode_into(&mut out);
        out
    }

    fn encode_into(&self, out: &mut Vec<u8>) {
        for label in &self.labels {
            out.push(label.len() as u8);
            out.extend_from_slice(label);
        }
        out.push(0);
    }

    pub fn eq_ignore_case(&self, other: &Self) -> bool {
        self.labels.len() == other.labels.len()
            && self
                .labels
                .iter()
                .zip(&other.labels)
                .all(|(a, b)| a.eq_ignore_ascii_case(b))
    }

    pub fn to_lowercase(&self) -> Self {
        Self {
            labels: self.labels.iter().map(|l| l.to_ascii_lowercase()).collect(),
        }
    }
}

impl fmt::Display for DnsName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, label) in self.labels.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            // validated printable ASCII
            f.write_str(std::str::from_utf8(label).map_err(|_| fmt::Error)?)?;
        }
        Ok(())
    }
}

impl FromStr for DnsName {
    type Err = WireError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_ascii(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RecordType(pub u16);

impl RecordType {
    pub const A: Self = Self(1);
    pub const AAAA: Self = Self(28);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RecordClass(pub u16);

impl RecordClass {
    pub const IN: Self = Self(1);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rcode(pub u8);

impl Rcode {
    pub const NOERROR: Self = Self(0);
    pub const SERVFAIL: Self = Self(2);
    pub const NXDOMAIN: Self = Self(3);
    pub const NOTIMP: Self = Self(4);
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Question {
    pub name: DnsName,
    pub qtype: RecordType,
    pub qclass: RecordClass,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResourceRecord {
    pub name: DnsName,
    pub rtype: RecordType,
    pub rclass: RecordClass,
    pub ttl: u32,
    pub rdata: Vec<u8>,
}

impl ResourceRecord {
    /// The IPv4 address, if this is an IN A record.
    pub fn ipv4(&self) -> Option<Ipv4Addr> {
        if self.rtype != RecordType::A || self.rclass != RecordClass::IN {
            return None;
        }
        <[u8; 4]>::try_from(self.rdata.as_slice()).ok().map(Ipv4Addr::from)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DnsMessage {
    pub txid: u16,
    pub is_response: bool,
    pub recursion_desired: bool,
    pub rcode: Rcode,
    pub question: Question,
    pub answers: Vec<ResourceRecord>,
}

impl DnsMessage {
    /// A recursion-desired query for `name`.
    pub fn query(txid: u16, name: DnsName, qtype: RecordType) -> Self {
        Self {
            txid,
            is_response: false,
            recursion_desired: true,
            rcode: Rcode::NOERROR,
            question: Question {
                name,
                qtype,
                qclass: RecordClass::IN,
            },
            answers: Vec::new(),
        }
    }

    pub fn ipv4_answers(&self) -> impl Iterator<Item = Ipv4Addr> + '_ {
        self.answers.iter().filter_map(ResourceRecord::ipv4)
    }
}

fn check_rdata(rtype: RecordType, rclass: RecordClass, rdata: &[u8]) -> Result<(), WireError> {
    if rtype == RecordType::A && rclass == RecordClass::IN && rdata.len() != 4 {
        return Err(WireError::Malformed("A record rdata must be 4 bytes"));
    }
    Ok(())
}

pub fn encode_message(msg: &DnsMessage) -> Result<Vec<u8>, WireError> {
    msg.question.name.validate()?;
    if msg.rcode.0 > 0x0f {
        return Err(WireError::Malformed("rcode does not fit in 4 bits"));
    }
    if msg.answers.len() > usize::from(u16::MAX) {
        return Err(WireError::Malformed("too many answers"));
    }

    let mut flags = u16::from(msg.rcode.0);
    if msg.is_response {
        flags |= FLAG_QR;
        if msg.recursion_desired {
            flags |= FLAG_RA;
        }
    }
    if msg.recursion_desired {
        flags |= FLAG_RD;
    }

    let mut out = Vec::with_capacity(HEADER_LEN + msg.question.name.wire_len() + 4);
    out.extend_from_slice(&msg.txid.to_be_bytes());
    out.extend_from_slice(&flags.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&(msg.answers.len() as u16).to_be_bytes());
    out.extend_from_slice(&[0, 0, 0, 0]);

    msg.question.name.encode_into(&mut out);
    out.extend_from_slice(&msg.question.qtype.0.to_be_bytes());
    out.extend_from_slice(&msg.question.qclass.0.to_be_bytes());

    for rr in &msg.answers {
        rr.name.validate()?;
        check_rdata(rr.rtype, rr.rclass, &rr.rdata)?;
        let rdlen = u16::try_from(rr.rdata.len()).map_err(|_| WireError::Malformed("rdata too long"))?;
        rr.name.encode_into(&mut out);
        out.extend_from_slice(&rr.rtype.0.to_be_bytes());
        out.extend_from_slice(&rr.rclass.0.to_be_bytes());
        out.extend_from_slice(&rr.ttl.to_be_bytes());
        out.extend_from_slice(&rdlen.to_be_bytes());
        out.extend_from_slice(&rr.rdata);
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        let end = self.pos.checked_add(n).ok_or(WireError::Truncated)?;
        let out = self.buf.get(self.pos..end).ok_or(WireError::Truncated)?;
        self.pos = end;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16, WireError> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, WireError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn name(&mut self) -> Result<DnsName, WireError> {
        let mut labels = Vec::new();
        let mut encoded_len = 1;
        // Offset where the current run of labels began; pointers must go below it.
        let mut segment_start = self.pos;
        let mut cursor = self.pos;
        let mut resume: Option<usize> = None;

        loop {
            let len = *self.buf.get(cursor).ok_or(WireError::Truncated)?;
            match len & 0xc0 {
                0x00 => {
                    if len == 0 {
                        cursor += 1;
                        break;
                    }
                    let len = usize::from(len);
                    let start = cursor + 1;
                    let label = self
                        .buf
                        .get(start..start + len)
                        .ok_or(WireError::Malformed("label overruns message"))?;
                    encoded_len += len + 1;
                    if encoded_len > MAX_NAME_LEN {
                        return Err(WireError::Malformed("name longer than 255 bytes"));
                    }
                    labels.push(label.to_vec());
                    cursor = start + len;
                }
                0xc0 => {
                    let lo = *self.buf.get(cursor + 1).ok_or(WireError::Truncated)?;
                    let target = usize::from(u16::from_be_bytes([len & 0x3f, lo]));
                    if target >= segment_start {
                        return Err(WireError::BadPointer);
                    }
                    if resume.is_none() {
                        resume = Some(cursor + 2);
                    }
                    segment_start = target;
                    cursor = target;
                }
                _ => return Err(WireError::Malformed("reserved label type")),
            }
        }

        self.pos = resume.unwrap_or(cursor);
        let name = DnsName { labels };
        name.validate().map_err(|_| WireError::Malformed("invalid label bytes"))?;
        Ok(name)
    }

    fn record(&mut self) -> Result<ResourceRecord, WireError> {
        let name = self.name()?;
        let rtype = RecordType(self.u16()?);
        let rclass = RecordClass(self.u16()?);
        let ttl = self.u32()?;
        let rdlen = usize::from(self.u16()?);
        let rdata = self.take(rdlen)?.to_vec();
        check_rdata(rtype, rclass, &rdata)?;
        Ok(ResourceRecord {
            name,
            rtype,
            rclass,
            ttl,
            rdata,
        })
    }
}

pub fn decode_message(wire: &[u8]) -> Result<DnsMessage, WireError> {
    let mut r = Reader { buf: wire, pos: 0 };
    let txid = r.u16()?;
    let flags = r.u16()?;
    let qdcount = r.u16()?;
    let ancount = r.u16()?;
    let nscount = r.u16()?;
    let arcount = r.u16()?;

    if flags & OPCODE_MASK != 0 {
        return Err(WireError::Malformed("unsupported opcode"));
    }
    if qdcount != 1 {
        return Err(WireError::Malformed("expected exactly one question"));
    }

    let question = Question {
        name: r.name()?,
        qtype: RecordType(r.u16()?),
        qclass: RecordClass(r.u16()?),
    };
    let answers = (0..ancount).map(|_| r.record()).collect::<Result<Vec<_>, _>>()?;
    // authority and additional sections are parsed for bounds and dropped
    for _ in 0..u32::from(nscount) + u32::from(arcount) {
        r.record()?;
    }
    if r.pos != wire.len() {
        return Err(WireError::Malformed("trailing bytes"));
    }

    Ok(DnsMessage {
        txid,
        is_response: flags & FLAG_QR != 0,
        recursion_desired: flags & FLAG_RD != 0,
        rcode: Rcode((flags & RCODE_MASK) as u8),
        question,
        answers,
    })
}

/// Builds the response to an A query. No addresses means NXDOMAIN.
pub fn make_a_response(query: &DnsMessage, addrs: &[Ipv4Addr], ttl: u32) -> DnsMessage {
    let rcode = if addrs.is_empty() {
        Rcode::NXDOMAIN
    } else {
        Rcode::NOERROR
    };
    let mut response = make_error_response(query, rcode);
    response.answers = addrs
        .iter()
        .map(|addr| ResourceRecord {
            name: query.question.name.clone(),
            rtype: RecordType::A,
            rclass: RecordClass::IN,
            ttl,
            rdata: addr.octets().to_vec(),
        })
        .collect();
    response
}

/// An answerless response echoing the query's id and question.
pub fn make_error_response(query: &DnsMessage, rcode: Rcode) -> DnsMessage {
    DnsMessage {
        txid: query.txid,
        is_response: true,
        recursion_desired: query.recursion_desired,
        rcode,
        question: query.question.clone(),
        answers: Vec::new(),
    }
}
