//! Plumbing shared by the three binaries.

use std::net::{SocketAddr, ToSocketAddrs};
use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use clap::Parser;
use odoq_core::seal::{decode_keypair, encode_keypair, SealError};
use odoq_core::{decode_key_config, encode_key_config, generate_keypair, KeyConfig, ResolverKeyPair, Suite};
use odoq_transport::{fingerprint_hex, ServerTrust, TlsIdentity};

/// Exit status for bad flags, unreadable files and bind failures.
pub const EXIT_CONFIG: i32 = 1;

/// Like `T::parse()`, but usage errors exit 1 rather than clap's 2, which
/// the client reserves for NXDOMAIN.
pub fn parse_args<T: Parser>() -> T {
    match T::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    }
}

pub fn init_logging() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
}

pub fn fail(message: impl std::fmt::Display) -> ! {
    eprintln!("error: {message}");
    std::process::exit(EXIT_CONFIG);
}

pub fn parse_listen(s: &str) -> Result<SocketAddr, String> {
    s.to_socket_addrs()
        .map_err(|e| format!("{s}: {e}"))?
        .next()
        .ok_or_else(|| format!("{s}: no addresses"))
}

pub fn config_to_base64(config: &KeyConfig) -> String {
    STANDARD.encode(encode_key_config(config))
}

/// Accepts the base64 encoding itself, or `@path` to a file holding it.
pub fn config_from_arg(arg: &str) -> Result<KeyConfig, String> {
    let text = match arg.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path).map_err(|e| format!("{path}: {e}"))?,
        None => arg.to_owned(),
    };
    let bytes = STANDARD
        .decode(text.trim())
        .map_err(|e| format!("key is not base64: {e}"))?;
    decode_key_config(&bytes).map_err(|e| format!("key is not a key config: {e}"))
}

/// Reads the resolver key pair, or generates key id 0 and saves it.
pub fn load_or_create_keypair(path: &Path) -> Result<(ResolverKeyPair, bool), String> {
    match std::fs::read(path) {
        Ok(bytes) => decode_keypair(&bytes)
            .map(|k| (k, false))
            .map_err(|e: SealError| format!("{}: {e}", path.display())),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            let pair = generate_keypair(Suite::DEFAULT, 0, &mut rand::rngs::OsRng).map_err(|e| e.to_string())?;
            save_keypair(path, &pair)?;
            Ok((pair, true))
        }
        Err(e) => Err(format!("{}: {e}", path.display())),
    }
}

pub fn save_keypair(path: &Path, pair: &ResolverKeyPair) -> Result<(), String> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, encode_keypair(pair)).map_err(|e| format!("{}: {e}", tmp.display()))?;
    std::fs::rename(&tmp, path).map_err(|e| format!("{}: {e}", path.display()))
}

/// `--cert`/`--cert-key` if given (created when both are missing), else a
/// throwaway self-signed certificate.
pub fn server_identity(cert: Option<&Path>, key: Option<&Path>) -> Result<TlsIdentity, String> {
    let names = ["localhost"];
    let identity = match (cert, key) {
        (Some(cert), Some(key)) => {
            let (id, created) = TlsIdentity::load_or_generate(cert, key, &names).map_err(|e| e.to_string())?;
            if created {
                log::info!("wrote new certificate to {}", cert.display());
            }
            id
        }
        (None, None) => TlsIdentity::self_signed(&names).map_err(|e| e.to_string())?,
        _ => return Err("--cert and --cert-key go together".into()),
    };
    log::info!("certificate sha256 {}", fingerprint_hex(identity.cert_der()));
    Ok(identity)
}

/// Pins the given DER certificates, or falls back to the system trust store.
pub fn server_trust(pins: &[PathBuf]) -> Result<ServerTrust, String> {
    if pins.is_empty() {
        return Ok(ServerTrust::Platform);
    }
    let mut fingerprints = Vec::new();
    for path in pins {
        let der = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
        fingerprints.push(odoq_transport::fingerprint(&der));
    }
    Ok(ServerTrust::Pinned(fingerprints))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn config_arg_forms() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        let pair = generate_keypair(Suite::DEFAULT, 4, &mut rng).unwrap();
        let b64 = config_to_base64(pair.config());
        assert_eq!(&config_from_arg(&b64).unwrap(), pair.config());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("key.b64");
        std::fs::write(&path, format!("{b64}\n")).unwrap();
        assert_eq!(&config_from_arg(&format!("@{}", path.display())).unwrap(), pair.config());

        assert!(config_from_arg("!!!").is_err());
        assert!(config_from_arg("AAAA").is_err());
        assert!(config_from_arg("@/nonexistent/key").is_err());
    }

    #[test]
    fn keypair_file_is_created_once() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("resolver.key");
        let (a, created) = load_or_create_keypair(&path).unwrap();
        assert!(created);
        let (b, created) = load_or_create_keypair(&path).unwrap();
        assert!(!created);
        assert_eq!(a.config(), b.config());

        std::fs::write(&path, b"junk").unwrap();
        assert!(load_or_create_keypair(&path).is_err());
    }
}
