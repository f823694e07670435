//! Oblivious DNS client: one A lookup through a proxy.

use std::path::PathBuf;
use std::process::exit;
use std::time::Duration;

use clap::Parser;
use odoq_cli::{config_from_arg, fail, init_logging, parse_args, server_trust};
use odoq_core::{start_session, ClientOutcome, TargetUri};
use odoq_transport::{Connector, EndpointAddr};

const EXIT_ANSWER: i32 = 0;
const EXIT_NAME_ERROR: i32 = 2;
const EXIT_REJECT: i32 = 3;
const EXIT_TRANSPORT: i32 = 4;

/// Resolves one name through an oblivious proxy.
///
/// Prints `<domain> <ip>` for each A record. Exit status: 0 answer,
/// 2 no such name, 3 response rejected, 4 transport failure, 1 bad usage.
#[derive(Debug, Parser)]
#[command(name = "odoq-client", version)]
struct Args {
    /// Proxy to send the query through.
    #[arg(long, value_name = "HOST:PORT")]
    proxy: String,
    /// Resolver the proxy should forward to, e.g. quic://127.0.0.1:8853.
    #[arg(long, value_name = "URI")]
    resolver: String,
    /// Resolver key config in base64, or @path to a file holding it.
    #[arg(long, value_name = "BASE64|@PATH")]
    key: String,
    /// Trust a proxy presenting exactly this certificate (DER).
    /// Without it, the proxy is checked against the system trust store.
    #[arg(long, value_name = "PATH")]
    trust_cert: Vec<PathBuf>,
    /// Give up on a connection or exchange after this many milliseconds.
    #[arg(long, value_name = "MS", default_value_t = 5000)]
    timeout_ms: u64,
    /// Name to look up.
    domain: String,
}

#[tokio::main]
async fn main() {
    let args: Args = parse_args();
    init_logging();

    let config = config_from_arg(&args.key).unwrap_or_else(|e| fail(e));
    let proxy: EndpointAddr = args.proxy.parse().unwrap_or_else(|e| fail(format!("--proxy: {e}")));
    if let Err(e) = args.resolver.parse::<TargetUri>() {
        fail(format!("--resolver: {e}"));
    }
    let trust = server_trust(&args.trust_cert).unwrap_or_else(|e| fail(e));
    let (mut session, mut envelope) =
        start_session(&args.domain, &args.resolver, config, &mut rand::rngs::OsRng).unwrap_or_else(|e| fail(e));
    let connector = Connector::new(&trust)
        .unwrap_or_else(|e| fail(e))
        .with_timeout(Duration::from_millis(args.timeout_ms));

    let channel = match connector.connect(&proxy).await {
        Ok(ch) => ch,
        Err(e) => {
            eprintln!("error: {proxy}: {e}");
            exit(EXIT_TRANSPORT);
        }
    };
    let code = loop {
        let reply = match channel.exchange(&envelope).await {
            Ok(reply) => reply,
            Err(e) => {
                eprintln!("error: {e}");
                break EXIT_TRANSPORT;
            }
        };
        match session.on_envelope(reply, &mut rand::rngs::OsRng) {
            ClientOutcome::Answer { addrs, .. } => {
                let domain = args.domain.trim_end_matches('.');
                for addr in addrs {
                    println!("{domain} {addr}");
                }
                break EXIT_ANSWER;
            }
            ClientOutcome::NameError => {
                eprintln!("{}: no such name", args.domain);
                break EXIT_NAME_ERROR;
            }
            ClientOutcome::Retry(next) => {
                log::info!("resolver rotated keys; retrying on the same connection");
                envelope = next;
            }
            ClientOutcome::Reject(reason) => {
                eprintln!("error: response rejected: {reason:?}");
                break EXIT_REJECT;
            }
        }
    };
    connector.close().await;
    exit(code);
}
