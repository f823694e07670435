//! Request and response sealing.
//!
//! A query travels to the resolver as an HPKE base-mode single-shot seal of
//! `(query, sym_key, nonce)` under the resolver's public key. The resolver
//! answers with an AES-GCM seal of `(nonce, domain, response)` under the
//! client's `sym_key`, so only the client can read it.

use std::fmt;

use aes_gcm::aead::{Aead as _, KeyInit, Payload};
use aes_gcm::{Aes128Gcm, Nonce};
use hkdf::Hkdf;
use hpke::{Deserializable, Kem as _, OpModeR, OpModeS, Serializable};
use rand::{CryptoRng, RngCore};
use sha2::Sha256;
use thiserror::Error;

use crate::dns_wire::DnsName;

type SuiteKem = hpke::kem::X25519HkdfSha256;
type SuiteKdf = hpke::kdf::HkdfSha256;
type SuiteAead = hpke::aead::AesGcm128;

pub const KEM_X25519_HKDF_SHA256: u16 = 0x0020;
pub const KDF_HKDF_SHA256: u16 = 0x0001;
pub const AEAD_AES_128_GCM: u16 = 0x0001;

/// X25519 public keys and encapsulated keys are both 32 bytes.
pub const X25519_PUBLIC_KEY_LEN: usize = 32;
pub const SYM_KEY_LEN: usize = 16;
pub const SESSION_NONCE_LEN: usize = 16;
pub const AEAD_TAG_LEN: usize = 16;
const AEAD_NONCE_LEN: usize = 12;

const REQUEST_INFO: &[u8] = b"odoq request";
const RESPONSE_NONCE_INFO: &[u8] = b"odoq response";
const REQUEST_AAD_TAG: u8 = 0x01;
const RESPONSE_AAD: &[u8] = &[0x02];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SealError {
    #[error("unsupported HPKE suite")]
    UnsupportedSuite,
    /// Wrong key, wrong key id, or failed authentication. Deliberately opaque.
    #[error("decryption failed")]
    DecryptFailure,
    #[error("decrypted body is malformed")]
    MalformedBody,
    #[error("malformed encoding: {0}")]
    Malformed(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Suite {
    pub kem_id: u16,
    pub kdf_id: u16,
    pub aead_id: u16,
}

impl Suite {
    pub const DEFAULT: Self = Self {
        kem_id: KEM_X25519_HKDF_SHA256,
        kdf_id: KDF_HKDF_SHA256,
        aead_id: AEAD_AES_128_GCM,
    };

    pub fn is_supported(&self) -> bool {
        *self == Self::DEFAULT
    }

    fn public_key_len(&self) -> usize {
        X25519_PUBLIC_KEY_LEN
    }
}

impl Default for Suite {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// The resolver's public key as distributed to clients.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KeyConfig {
    key_id: u8,
    suite: Suite,
    public_key: Vec<u8>,
}

impl KeyConfig {
    pub fn new(key_id: u8, suite: Suite, public_key: Vec<u8>) -> Result<Self, SealError> {
        if !suite.is_supported() || public_key.len() != suite.public_key_len() {
            return Err(SealError::UnsupportedSuite);
        }
        Ok(Self {
            key_id,
            suite,
            public_key,
        })
    }

    pub fn key_id(&self) -> u8 {
        self.key_id
    }

    pub fn suite(&self) -> Suite {
        self.suite
    }

    pub fn public_key(&self) -> &[u8] {
        &self.public_key
    }

    pub fn encoded_len(&self) -> usize {
        9 + self.public_key.len()
    }
}

/// `key_id u8 | kem_id u16 | kdf_id u16 | aead_id u16 | pk_len u16 | pk`
pub fn encode_key_config(config: &KeyConfig) -> Vec<u8> {
    let mut out = Vec::with_capacity(config.encoded_len());
    out.push(config.key_id);
    out.extend_from_slice(&config.suite.kem_id.to_be_bytes());
    out.extend_from_slice(&config.suite.kdf_id.to_be_bytes());
    out.extend_from_slice(&config.suite.aead_id.to_be_bytes());
    out.extend_from_slice(&(config.public_key.len() as u16).to_be_bytes());
    out.extend_from_slice(&config.public_key);
    out
}

pub fn decode_key_config(bytes: &[u8]) -> Result<KeyConfig, SealError> {
    let mut r = Cursor::new(bytes);
    let key_id = r.u8()?;
    let suite = Suite {
        kem_id: r.u16()?,
        kdf_id: r.u16()?,
        aead_id: r.u16()?,
    };
    let pk_len = usize::from(r.u16()?);
    let public_key = r.take(pk_len)?.to_vec();
    r.finish()?;
    KeyConfig::new(key_id, suite, public_key)
}

/// Resolver key pair. The private half never leaves this type except through
/// [`encode_keypair`] for on-disk storage.
#[derive(Clone)]
pub struct ResolverKeyPair {
    config: KeyConfig,
    private_key: Vec<u8>,
}

impl fmt::Debug for ResolverKeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ResolverKeyPair")
            .field("config", &self.config)
            .field("private_key", &"<redacted>")
            .finish()
    }
}

impl ResolverKeyPair {
    pub fn config(&self) -> &KeyConfig {
        &self.config
    }
}

pub fn generate_keypair<R: CryptoRng + RngCore>(
    suite: Suite,
    key_id: u8,
    rng: &mut R,
) -> Result<ResolverKeyPair, SealError> {
    if !suite.is_supported() {
        return Err(SealError::UnsupportedSuite);
    }
    let (sk, pk) = SuiteKem::gen_keypair(rng);
    Ok(ResolverKeyPair {
        config: KeyConfig::new(key_id, suite, pk.to_bytes().to_vec())?,
        private_key: sk.to_bytes().to_vec(),
    })
}

/// Key file layout: encoded KeyConfig, then `sk_len u16 | sk`.
pub fn encode_keypair(pair: &ResolverKeyPair) -> Vec<u8> {
    let mut out = encode_key_config(&pair.config);
    out.extend_from_slice(&(pair.private_key.len() as u16).to_be_bytes());
    out.extend_from_slice(&pair.private_key);
    out
}

pub fn decode_keypair(bytes: &[u8]) -> Result<ResolverKeyPair, SealError> {
    let mut r = Cursor::new(bytes);
    let key_id = r.u8()?;
    let suite = Suite {
        kem_id: r.u16()?,
        kdf_id: r.u16()?,
        aead_id: r.u16()?,
    };
    let pk_len = usize::from(r.u16()?);
    let public_key = r.take(pk_len)?.to_vec();
    let sk_len = usize::from(r.u16()?);
    let private_key = r.take(sk_len)?.to_vec();
    r.finish()?;

    let config = KeyConfig::new(key_id, suite, public_key)?;
    let sk = <SuiteKem as hpke::Kem>::PrivateKey::from_bytes(&private_key)
        .map_err(|_| SealError::Malformed("private key"))?;
    if SuiteKem::sk_to_pk(&sk).to_bytes().as_slice() != config.public_key() {
        return Err(SealError::Malformed("private key does not match public key"));
    }
    Ok(ResolverKeyPair {
        config,
        private_key,
    })
}

/// Per-query secrets chosen by the client.
#[derive(Clone, PartialEq, Eq)]
pub struct SessionSecrets {
    sym_key: [u8; SYM_KEY_LEN],
    nonce: [u8; SESSION_NONCE_LEN],
}

impl fmt::Debug for SessionSecrets {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SessionSecrets")
            .field("sym_key", &"<redacted>")
            .field("nonce", &self.nonce)
            .finish()
    }
}

impl SessionSecrets {
    pub fn new(sym_key: [u8; SYM_KEY_LEN], nonce: [u8; SESSION_NONCE_LEN]) -> Self {
        Self { sym_key, nonce }
    }

    pub fn generate<R: CryptoRng + RngCore>(rng: &mut R) -> Self {
        let mut secrets = Self::new([0; SYM_KEY_LEN], [0; SESSION_NONCE_LEN]);
        rng.fill_bytes(&mut secrets.sym_key);
        rng.fill_bytes(&mut secrets.nonce);
        secrets
    }

    pub fn sym_key(&self) -> &[u8; SYM_KEY_LEN] {
        &self.sym_key
    }

    pub fn nonce(&self) -> &[u8; SESSION_NONCE_LEN] {
        &self.nonce
    }

    fn response_aead_nonce(&self) -> [u8; AEAD_NONCE_LEN] {
        let hk = Hkdf::<Sha256>::new(Some(&self.nonce), &self.sym_key);
        let mut out = [0u8; AEAD_NONCE_LEN];
        hk.expand(RESPONSE_NONCE_INFO, &mut out)
            .expect("12 bytes is a valid HKDF-SHA256 output length");
        out
    }
}

/// The sealed request `Q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SealedRequest {
    pub key_id: u8,
    pub enc: Vec<u8>,
    pub ciphertext: Vec<u8>,
}

impl SealedRequest {
    /// `key_id u8 | enc_len u16 | enc | ct_len u32 | ct`
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(7 + self.enc.len() + self.ciphertext.len());
        out.push(self.key_id);
        out.extend_from_slice(&(self.enc.len() as u16).to_be_bytes());
        out.extend_from_slice(&self.enc);
        out.extend_from_slice(&(self.ciphertext.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.ciphertext);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, SealError> {
        let mut r = Cursor::new(bytes);
        let key_id = r.u8()?;
        let enc_len = usize::from(r.u16()?);
        let enc = r.take(enc_len)?.to_vec();
        let ct_len = r.u32()? as usize;
        let ciphertext = r.take(ct_len)?.to_vec();
        r.finish()?;
        Ok(Self {
            key_id,
            enc,
            ciphertext,
        })
    }
}

/// The sealed response `M`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SealedResponse {
    pub ciphertext: Vec<u8>,
}

fn request_aad(key_id: u8) -> [u8; 2] {
    [REQUEST_AAD_TAG, key_id]
}

/// `sym_key_len u8 | sym_key | nonce_len u8 | nonce | dns_len u16 | dns`
fn request_body(query_wire: &[u8], secrets: &SessionSecrets) -> Result<Vec<u8>, SealError> {
    let dns_len = u16::try_from(query_wire.len()).map_err(|_| SealError::Malformed("query too long"))?;
    let mut body = Vec::with_capacity(4 + SYM_KEY_LEN + SESSION_NONCE_LEN + query_wire.len());
    body.push(SYM_KEY_LEN as u8);
    body.extend_from_slice(&secrets.sym_key);
    body.push(SESSION_NONCE_LEN as u8);
    body.extend_from_slice(&secrets.nonce);
    body.extend_from_slice(&dns_len.to_be_bytes());
    body.extend_from_slice(query_wire);
    Ok(body)
}

fn parse_request_body(body: &[u8]) -> Result<(Vec<u8>, SessionSecrets), SealError> {
    let mut r = Cursor::new(body);
    let sym_key = r
        .sized::<SYM_KEY_LEN>()
        .map_err(|_| SealError::MalformedBody)?;
    let nonce = r
        .sized::<SESSION_NONCE_LEN>()
        .map_err(|_| SealError::MalformedBody)?;
    let dns_len = usize::from(r.u16().map_err(|_| SealError::MalformedBody)?);
    let dns = r.take(dns_len).map_err(|_| SealError::MalformedBody)?.to_vec();
    r.finish().map_err(|_| SealError::MalformedBody)?;
    Ok((dns, SessionSecrets::new(sym_key, nonce)))
}

/// `Q = HPKE-Seal(pk_RR, (query, sym_key, nonce))` with AAD `[0x01, key_id]`.
pub fn seal_request<R: CryptoRng + RngCore>(
    config: &KeyConfig,
    query_wire: &[u8],
    secrets: &SessionSecrets,
    rng: &mut R,
) -> Result<SealedRequest, SealError> {
    if !config.suite.is_supported() {
        return Err(SealError::UnsupportedSuite);
    }
    let pk = <SuiteKem as hpke::Kem>::PublicKey::from_bytes(&config.public_key)
        .map_err(|_| SealError::UnsupportedSuite)?;
    let body = request_body(query_wire, secrets)?;
    let (enc, ciphertext) = hpke::single_shot_seal::<SuiteAead, SuiteKdf, SuiteKem, _>(
        &OpModeS::Base,
        &pk,
        REQUEST_INFO,
        &body,
        &request_aad(config.key_id),
        rng,
    )
    .map_err(|_| SealError::UnsupportedSuite)?;
    Ok(SealedRequest {
        key_id: config.key_id,
        enc: enc.to_bytes().to_vec(),
        ciphertext,
    })
}

pub fn open_request(
    keypair: &ResolverKeyPair,
    request: &SealedRequest,
) -> Result<(Vec<u8>, SessionSecrets), SealError> {
    if request.key_id != keypair.config.key_id {
        return Err(SealError::DecryptFailure);
    }
    let sk = <SuiteKem as hpke::Kem>::PrivateKey::from_bytes(&keypair.private_key)
        .map_err(|_| SealError::DecryptFailure)?;
    let enc = <SuiteKem as hpke::Kem>::EncappedKey::from_bytes(&request.enc)
        .map_err(|_| SealError::DecryptFailure)?;
    let body = hpke::single_shot_open::<SuiteAead, SuiteKdf, SuiteKem>(
        &OpModeR::Base,
        &sk,
        &enc,
        REQUEST_INFO,
        &request.ciphertext,
        &request_aad(request.key_id),
    )
    .map_err(|_| SealError::DecryptFailure)?;
    parse_request_body(&body)
}

/// `nonce_len u8 | nonce | domain_len u8 | domain | dns_len u16 | dns`
fn response_body(
    secrets: &SessionSecrets,
    response_wire: &[u8],
    domain: &DnsName,
) -> Result<Vec<u8>, SealError> {
    let domain = domain.to_string();
    let domain_len = u8::try_from(domain.len()).map_err(|_| SealError::Malformed("domain too long"))?;
    let dns_len =
        u16::try_from(response_wire.len()).map_err(|_| SealError::Malformed("response too long"))?;
    let mut body = Vec::with_capacity(4 + SESSION_NONCE_LEN + domain.len() + response_wire.len());
    body.push(SESSION_NONCE_LEN as u8);
    body.extend_from_slice(&secrets.nonce);
    body.push(domain_len);
    body.extend_from_slice(domain.as_bytes());
    body.extend_from_slice(&dns_len.to_be_bytes());
    body.extend_from_slice(response_wire);
    Ok(body)
}

fn parse_response_body(
    body: &[u8],
) -> Result<(Vec<u8>, DnsName, [u8; SESSION_NONCE_LEN]), SealError> {
    let mut r = Cursor::new(body);
    let nonce = r
        .sized::<SESSION_NONCE_LEN>()
        .map_err(|_| SealError::MalformedBody)?;
    let domain_len = usize::from(r.u8().map_err(|_| SealError::MalformedBody)?);
    let domain = r.take(domain_len).map_err(|_| SealError::MalformedBody)?;
    let domain = std::str::from_utf8(domain)
        .ok()
        .and_then(|d| DnsName::from_ascii(d).ok())
        .ok_or(SealError::MalformedBody)?;
    let dns_len = usize::from(r.u16().map_err(|_| SealError::MalformedBody)?);
    let dns = r.take(dns_len).map_err(|_| SealError::MalformedBody)?.to_vec();
    r.finish().map_err(|_| SealError::MalformedBody)?;
    Ok((dns, domain, nonce))
}

/// `M = AES-GCM(sym_key, (nonce, domain, response))` with AAD `[0x02]`.
///
/// The AEAD nonce is derived from the secrets, so sealing is deterministic
/// and a given set of secrets must not seal two different bodies. The
/// resolver's replay path is the one place that happens (see
/// `resolver::Resolver::handle_query`).
pub fn seal_response(
    secrets: &SessionSecrets,
    response_wire: &[u8],
    domain: &DnsName,
) -> Result<SealedResponse, SealError> {
    let body = response_body(secrets, response_wire, domain)?;
    let cipher = Aes128Gcm::new(secrets.sym_key.as_ref().into());
    let nonce = secrets.response_aead_nonce();
    let ciphertext = cipher
        .encrypt(
            Nonce::from_slice(&nonce),
            Payload {
                msg: &body,
                aad: RESPONSE_AAD,
            },
        )
        .map_err(|_| SealError::Malformed("response too long"))?;
    Ok(SealedResponse { ciphertext })
}

pub fn open_response(
    secrets: &SessionSecrets,
    response: &SealedResponse,
) -> Result<(Vec<u8>, DnsName, [u8; SESSION_NONCE_LEN]), SealError> {
    if response.ciphertext.len() < AEAD_TAG_LEN {
        return Err(SealError::DecryptFailure);
    }
    let cipher = Aes128Gcm::new(secrets.sym_key.as_ref().into());
    let nonce = secrets.response_aead_nonce();
    let body = cipher
        .decrypt(
            Nonce::from_slice(&nonce),
            Payload {
                msg: &response.ciphertext,
                aad: RESPONSE_AAD,
            },
        )
        .map_err(|_| SealError::DecryptFailure)?;
    parse_response_body(&body)
}

struct Cursor<'a> {
    buf: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], SealError> {
        if self.buf.len() < n {
            return Err(SealError::Malformed("truncated"));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8, SealError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, SealError> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, SealError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    /// A length-prefixed field whose length must be exactly `N`.
    fn sized<const N: usize>(&mut self) -> Result<[u8; N], SealError> {
        if usize::from(self.u8()?) != N {
            return Err(SealError::Malformed("unexpected field length"));
        }
        let mut out = [0u8; N];
        out.copy_from_slice(self.take(N)?);
        Ok(out)
    }

    fn finish(&self) -> Result<(), SealError> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(SealError::Malformed("trailing bytes"))
        }
    }
}
