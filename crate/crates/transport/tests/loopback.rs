use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use odoq_core::envelope::{Envelope, MsgType, MAX_ENVELOPE_LEN};
use odoq_transport::*;
use tokio::sync::mpsc;

struct Server {
    addr: EndpointAddr,
    identity: TlsIdentity,
    errors: mpsc::UnboundedReceiver<TransportError>,
}

/// Echo server that answers a query carrying payload `b"rotate"` with a
/// KEY_UPDATE, and any other envelope with a RESPONSE of the same payload.
fn spawn_echo() -> Server {
    let identity = TlsIdentity::self_signed(&["localhost"]).unwrap();
    let listener = Listener::bind("127.0.0.1:0".parse().unwrap(), &identity).unwrap();
    let local: SocketAddr = listener.local_addr().unwrap();
    let (tx, errors) = mpsc::unbounded_channel();
    tokio::spawn(async move {
        while let Some(conn) = listener.accept().await {
            let Ok(conn) = conn else { continue };
            let tx = tx.clone();
            tokio::spawn(async move {
                loop {
                    match conn.accept_exchange(DEFAULT_TIMEOUT).await {
                        Ok(Some((e, responder))) => {
                            let reply = if e.payload() == b"rotate" {
                                Envelope::key_update(b"new key".to_vec()).unwrap()
                            } else {
                                Envelope::response(e.payload().to_vec()).unwrap()
                            };
                            tokio::spawn(async move { responder.reply(&reply).await });
                        }
                        Ok(None) => break,
                        Err(err) => {
                            let _ = tx.send(err);
                        }
                    }
                }
            });
        }
    });
    Server {
        addr: EndpointAddr::new("127.0.0.1", local.port()),
        identity,
        errors,
    }
}

fn query(payload: &[u8]) -> Envelope {
    Envelope::query("quic://resolver.example:8853", payload.to_vec()).unwrap()
}

#[tokio::test]
async fn echo_over_loopback() {
    let server = spawn_echo();
    let connector = Connector::new(&ServerTrust::pin(server.identity.cert_der())).unwrap();
    let ch = connector.connect(&server.addr).await.unwrap();
    let reply = ch.exchange(&query(b"hello")).await.unwrap();
    assert_eq!(reply.msg_type(), MsgType::ObliviousResponse);
    assert_eq!(reply.payload(), b"hello");
    assert_eq!(ch.establishment_count(), 1);
    connector.close().await;
}

#[tokio::test]
async fn retry_after_key_update_reuses_connection() {
    let server = spawn_echo();
    let connector = Connector::new(&ServerTrust::pin(server.identity.cert_der())).unwrap();
    let ch = connector.connect(&server.addr).await.unwrap();
    let before = connector.establishment_count(&server.addr).await;

    let first = ch.exchange(&query(b"rotate")).await.unwrap();
    assert_eq!(first.msg_type(), MsgType::KeyUpdate);
    assert!(ch.is_open());

    // A second lookup through the pool must hand back the same connection.
    let again = connector.connect(&server.addr).await.unwrap();
    let retry = again.exchange(&query(b"retry")).await.unwrap();
    assert_eq!(retry.payload(), b"retry");
    assert_eq!(connector.establishment_count(&server.addr).await, before);
    assert_eq!(before, 1);
}

#[tokio::test]
async fn concurrent_exchanges_share_one_connection() {
    let server = spawn_echo();
    let connector = Arc::new(Connector::new(&ServerTrust::pin(server.identity.cert_der())).unwrap());
    let mut tasks = Vec::new();
    for i in 0..16u8 {
        let connector = connector.clone();
        let addr = server.addr.clone();
        tasks.push(tokio::spawn(async move {
            let ch = connector.connect(&addr).await.unwrap();
            ch.exchange(&query(&[i; 3])).await.unwrap()
        }));
    }
    for (i, t) in tasks.into_iter().enumerate() {
        assert_eq!(t.await.unwrap().payload(), &[i as u8; 3]);
    }
    assert_eq!(connector.establishment_count(&server.addr).await, 1);
}

#[tokio::test]
async fn closed_port_is_connect_failed() {
    // Grab a free port, then release it so nothing listens there.
    let port = std::net::UdpSocket::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let connector = Connector::new(&ServerTrust::Pinned(vec![[0; 32]]))
        .unwrap()
        .with_timeout(Duration::from_millis(500));
    let err = connector.connect(&EndpointAddr::new("127.0.0.1", port)).await.unwrap_err();
    assert!(matches!(err, TransportError::ConnectFailed(_)), "{err:?}");
}

#[tokio::test]
async fn wrong_pin_is_tls_failed() {
    let server = spawn_echo();
    let other = TlsIdentity::self_signed(&["localhost"]).unwrap();
    let connector = Connector::new(&ServerTrust::pin(other.cert_der())).unwrap();
    let err = connector.connect(&server.addr).await.unwrap_err();
    assert!(matches!(err, TransportError::TlsFailed(_)), "{err:?}");
    assert_eq!(connector.establishment_count(&server.addr).await, 0);
}

#[tokio::test]
async fn oversized_frame_is_framing_error() {
    let server = spawn_echo();
    let connector = Connector::new(&ServerTrust::pin(server.identity.cert_der())).unwrap();
    let ch = connector.connect(&server.addr).await.unwrap();
    let err = ch.exchange_frame(&vec![0; MAX_ENVELOPE_LEN + 1]).await.unwrap_err();
    assert!(matches!(err, TransportError::FramingError(_)), "{err:?}");
}

#[tokio::test]
async fn server_rejects_frame_claiming_oversized_payload() {
    let mut server = spawn_echo();
    let connector = Connector::new(&ServerTrust::pin(server.identity.cert_der())).unwrap();
    let ch = connector.connect(&server.addr).await.unwrap();
    // Header of a RESPONSE whose payload length field is 2^20 + 1.
    let mut frame = vec![0x01, 0x02, 0x00, 0x00];
    frame.extend_from_slice(&((1u32 << 20) + 1).to_be_bytes());
    let err = ch.exchange_frame(&frame).await.unwrap_err();
    assert!(matches!(err, TransportError::StreamReset), "{err:?}");
    let server_err = server.errors.recv().await.unwrap();
    assert!(matches!(server_err, TransportError::FramingError(_)), "{server_err:?}");

    // The connection survives a bad stream.
    assert_eq!(ch.exchange(&query(b"ok")).await.unwrap().payload(), b"ok");
}
