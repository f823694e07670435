//! Oblivious DNS resolver: opens sealed queries, answers from a zone file.

use std::path::PathBuf;
use std::sync::Arc;

use clap::Parser;
use odoq_cli::{config_to_base64, fail, init_logging, load_or_create_keypair, parse_args, parse_listen, save_keypair};
use odoq_core::{load_zone, Resolver};
use odoq_transport::{Listener, ServerConnection, DEFAULT_TIMEOUT};
use tokio::io::{AsyncBufReadExt, BufReader};

/// Serves oblivious queries relayed by a proxy.
///
/// Prints the base64 key config on standard output at startup and after
/// every rotation. Type `rotate` on standard input to switch to a new key.
#[derive(Debug, Parser)]
#[command(name = "odoq-resolver", version)]
struct Args {
    /// Address to listen on, e.g. 127.0.0.1:8853.
    #[arg(long, value_name = "HOST:PORT")]
    listen: String,
    /// Resolver key pair; generated here if the file does not exist.
    #[arg(long, value_name = "PATH")]
    key_file: PathBuf,
    /// Zone file with lines of the form `<name> A <ipv4> [ttl]`.
    #[arg(long, value_name = "PATH")]
    zone: PathBuf,
    /// TLS certificate (DER). Created together with --cert-key if both are missing.
    #[arg(long, value_name = "PATH", requires = "cert_key")]
    cert: Option<PathBuf>,
    /// TLS private key (PKCS#8 DER).
    #[arg(long, value_name = "PATH", requires = "cert")]
    cert_key: Option<PathBuf>,
}

#[tokio::main]
async fn main() {
    let args: Args = parse_args();
    init_logging();

    let listen = parse_listen(&args.listen).unwrap_or_else(|e| fail(e));
    let zone_text = std::fs::read_to_string(&args.zone).unwrap_or_else(|e| fail(format!("{}: {e}", args.zone.display())));
    let zone = load_zone(&zone_text).unwrap_or_else(|e| fail(format!("{}: {e}", args.zone.display())));
    let (keys, created) = load_or_create_keypair(&args.key_file).unwrap_or_else(|e| fail(e));
    if created {
        log::info!("generated key pair in {}", args.key_file.display());
    }
    let identity = odoq_cli::server_identity(args.cert.as_deref(), args.cert_key.as_deref()).unwrap_or_else(|e| fail(e));
    let listener = Listener::bind(listen, &identity).unwrap_or_else(|e| fail(e));
    let local = listener.local_addr().unwrap_or_else(|e| fail(e));

    log::info!("{} names in zone", zone.len());
    let resolver = Arc::new(Resolver::new(keys, zone));
    println!("{}", config_to_base64(&resolver.current_config()));
    eprintln!("odoq-resolver listening on {local}");

    tokio::spawn(read_commands(resolver.clone(), args.key_file));

    while let Some(conn) = listener.accept().await {
        match conn {
            Ok(conn) => {
                tokio::spawn(serve(resolver.clone(), conn));
            }
            Err(e) => log::warn!("handshake failed: {e}"),
        }
    }
}

async fn read_commands(resolver: Arc<Resolver>, key_file: PathBuf) {
    let mut lines = BufReader::new(tokio::io::stdin()).lines();
    while let Ok(Some(line)) = lines.next_line().await {
        match line.trim() {
            "rotate" => {
                let config = resolver.rotate_keys(&mut rand::rngs::OsRng);
                if let Err(e) = save_keypair(&key_file, &resolver.current_keypair_snapshot()) {
                    log::error!("rotated to key {} but could not save it: {e}", config.key_id());
                }
                log::info!("rotated to key {}", config.key_id());
                println!("{}", config_to_base64(&config));
            }
            "" => {}
            other => log::warn!("unknown command `{other}`; the only command is `rotate`"),
        }
    }
}

async fn serve(resolver: Arc<Resolver>, conn: ServerConnection) {
    log::debug!("connection from {}", conn.remote_addr());
    loop {
        match conn.accept_exchange(DEFAULT_TIMEOUT).await {
            Ok(Some((envelope, responder))) => {
                let resolver = resolver.clone();
                tokio::spawn(async move {
                    match resolver.handle_query_detailed(envelope) {
                        Ok((reply, outcome)) => {
                            log::info!("query: {outcome:?}");
                            if let Err(e) = responder.reply(&reply).await {
                                log::warn!("reply failed: {e}");
                            }
                        }
                        Err(e) => log::warn!("dropped query: {e}"),
                    }
                });
            }
            Ok(None) => break,
            Err(e) => log::warn!("bad stream: {e}"),
        }
    }
}
