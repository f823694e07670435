//! Oblivious proxy: relays sealed queries to allowlisted resolvers.

use std::path::PathBuf;
use std::sync::Arc;

use clap::Parser;
use odoq_cli::{fail, init_logging, parse_args, parse_listen, server_identity, server_trust};
use odoq_core::{DenyReason, Envelope, ForwardDecision, Proxy, ProxyConfig, TargetUri};
use odoq_transport::{Connector, EndpointAddr, Listener, Responder, ServerConnection, TransportError, DEFAULT_TIMEOUT};

/// Relays oblivious queries between clients and resolvers without seeing
/// their contents.
#[derive(Debug, Parser)]
#[command(name = "odoq-proxy", version)]
struct Args {
    /// Address to listen on for clients, e.g. 127.0.0.1:8443.
    #[arg(long, value_name = "HOST:PORT")]
    listen: String,
    /// Resolver URI that clients may target, e.g. quic://127.0.0.1:8853. Repeatable; at least one.
    #[arg(long = "allow", value_name = "RESOLVER-URI", required = true)]
    allow: Vec<String>,
    /// TLS certificate (DER). Created together with --cert-key if both are missing.
    #[arg(long, value_name = "PATH", requires = "cert_key")]
    cert: Option<PathBuf>,
    /// TLS private key (PKCS#8 DER).
    #[arg(long, value_name = "PATH", requires = "cert")]
    cert_key: Option<PathBuf>,
    /// Trust a resolver presenting exactly this certificate (DER). Repeatable.
    /// Without it, resolvers are checked against the system trust store.
    #[arg(long, value_name = "PATH")]
    trust_cert: Vec<PathBuf>,
}

struct Relay {
    core: Proxy<usize>,
    upstream: Connector,
}

#[tokio::main]
async fn main() {
    let args: Args = parse_args();
    init_logging();

    for uri in &args.allow {
        if let Err(e) = uri.parse::<TargetUri>() {
            fail(format!("--allow {uri}: {e}"));
        }
    }
    let listen = parse_listen(&args.listen).unwrap_or_else(|e| fail(e));
    let config = ProxyConfig::new(args.allow.iter().cloned()).unwrap_or_else(|e| fail(e));
    let trust = server_trust(&args.trust_cert).unwrap_or_else(|e| fail(e));
    let upstream = Connector::new(&trust).unwrap_or_else(|e| fail(e));
    let identity = server_identity(args.cert.as_deref(), args.cert_key.as_deref()).unwrap_or_else(|e| fail(e));
    let listener = Listener::bind(listen, &identity).unwrap_or_else(|e| fail(e));
    let local = listener.local_addr().unwrap_or_else(|e| fail(e));

    let relay = Arc::new(Relay {
        core: Proxy::new(config),
        upstream,
    });
    eprintln!("odoq-proxy listening on {local}");

    while let Some(conn) = listener.accept().await {
        match conn {
            Ok(conn) => {
                tokio::spawn(serve_client(relay.clone(), conn));
            }
            Err(e) => log::warn!("client handshake failed: {e}"),
        }
    }
}

async fn serve_client(relay: Arc<Relay>, conn: ServerConnection) {
    let id = conn.id();
    loop {
        match conn.accept_exchange(DEFAULT_TIMEOUT).await {
            Ok(Some((envelope, responder))) => {
                tokio::spawn(relay_one(relay.clone(), id, envelope, responder));
            }
            Ok(None) => break,
            Err(e) => log::warn!("bad client stream: {e}"),
        }
    }
    let dropped = relay.core.release_channel(&id);
    if dropped > 0 {
        log::debug!("client left with {dropped} queries in flight");
    }
}

async fn relay_one(relay: Arc<Relay>, client: usize, envelope: Envelope, responder: Responder) {
    let (uri, envelope, slot) = match relay.core.on_client_query(envelope, client) {
        ForwardDecision::Forward {
            resolver_uri,
            envelope,
            slot,
        } => (resolver_uri, envelope, slot),
        ForwardDecision::Deny(reason) => {
            log::warn!("denied query: {reason:?}");
            return;
        }
    };
    let reply = async {
        let target: EndpointAddr = uri.parse().map_err(TransportError::ConnectFailed)?;
        relay.upstream.connect(&target).await?.exchange(&envelope).await
    }
    .await;
    let reply = match reply {
        Ok(reply) => reply,
        Err(e) => {
            relay.core.abandon(slot);
            match e {
                TransportError::Timeout => log::warn!("denied query: {:?} waiting for {uri}", DenyReason::Timeout),
                e => log::warn!("resolver {uri} failed: {e}"),
            }
            return;
        }
    };
    match relay.core.on_resolver_reply(slot, reply) {
        Ok(relayed) => {
            log::info!("relayed {} from {uri}", relayed.envelope.msg_type());
            if let Err(e) = responder.reply(&relayed.envelope).await {
                log::warn!("client went away: {e}");
            }
        }
        Err(e) => log::warn!("unusable reply from {uri}: {e}"),
    }
}
