//! The interactive session service.
//!
//! One listener serves both transports: a connection whose first bytes are
//! `GET ` is upgraded to a websocket, anything else speaks length-prefixed
//! JSON. Sessions live in the service, not the connection, so a viewer may
//! reconnect and continue.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use base64::Engine as _;
use futures_util::{SinkExt, StreamExt};
use oic_core::encoder::EncodedImage;
use oic_core::geom::{Direction, ViewportSpec};
use oic_core::image::PlaneImage;
use oic_core::ordering::OrderKind;
use oic_core::session::Session;
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};
use tokio_tungstenite::tungstenite::Message;

use crate::protocol::{
    BlockEntry, ClientMessage, ErrorKind, Metrics, ServerMessage, ViewRequest, ViewResponse, MAX_FRAME,
};

pub struct Service {
    enc: &'static EncodedImage,
    reference: Option<&'static PlaneImage>,
    order: OrderKind,
    template: ViewportSpec,
    sessions: Mutex<HashMap<u64, Arc<Mutex<Session<'static>>>>>,
    next_id: AtomicU64,
}

fn error(kind: ErrorKind, message: impl Into<String>, session_id: Option<u64>) -> ServerMessage {
    ServerMessage::Error { kind, message: message.into(), session_id }
}

impl Service {
    /// The container and reference live as long as the process.
    pub fn new(
        enc: EncodedImage,
        reference: Option<PlaneImage>,
        order: OrderKind,
        template: ViewportSpec,
    ) -> Arc<Self> {
        Arc::new(Self {
            enc: Box::leak(Box::new(enc)),
            reference: reference.map(|r| &*Box::leak(Box::new(r))),
            order,
            template,
            sessions: Mutex::new(HashMap::new()),
            next_id: AtomicU64::new(1),
        })
    }

    /// Handles one raw message.
    pub fn handle_bytes(&self, raw: &[u8]) -> ServerMessage {
        match serde_json::from_slice::<ClientMessage>(raw) {
            Ok(m) => self.handle(m),
            Err(e) => error(ErrorKind::BadRequest, e.to_string(), None),
        }
    }

    pub fn handle(&self, msg: ClientMessage) -> ServerMessage {
        match msg {
            ClientMessage::Open => match Session::new(self.enc, self.reference, self.order) {
                Ok(s) => {
                    let id = self.next_id.fetch_add(1, Ordering::Relaxed);
                    self.sessions.lock().unwrap().insert(id, Arc::new(Mutex::new(s)));
                    ServerMessage::Opened { session_id: id }
                }
                Err(e) => error(ErrorKind::Internal, e.to_string(), None),
            },
            ClientMessage::Close { session_id } => match self.sessions.lock().unwrap().remove(&session_id) {
                Some(_) => ServerMessage::Closed { session_id },
                None => error(ErrorKind::UnknownSession, format!("no session {session_id}"), Some(session_id)),
            },
            ClientMessage::Request(r) => self.view(r),
        }
    }

    fn view(&self, r: ViewRequest) -> ServerMessage {
        let id = r.session_id;
        let Some(session) = self.sessions.lock().unwrap().get(&id).cloned() else {
            return error(ErrorKind::UnknownSession, format!("no session {id}"), Some(id));
        };
        let mut spec = self.template.with_direction(Direction::new(r.longitude, r.latitude));
        if let Some((h, v)) = r.fov {
            spec.fov_h = h;
            spec.fov_v = v;
        }
        if let Some((w, h)) = r.vp_dims {
            if w * h > MAX_FRAME {
                return error(ErrorKind::InvalidView, format!("viewport {w}x{h} too large"), Some(id));
            }
            spec.vp_width = w;
            spec.vp_height = h;
        }
        if !(r.longitude.is_finite() && r.latitude.is_finite()) {
            return error(ErrorKind::InvalidView, "non-finite direction", Some(id));
        }
        let rep = match session.lock().unwrap().request(&spec) {
            Ok(rep) => rep,
            Err(e) => return error(ErrorKind::InvalidView, e.to_string(), Some(id)),
        };
        let png = match rep.viewport.encode_png() {
            Ok(p) => p,
            Err(e) => return error(ErrorKind::Internal, e.to_string(), Some(id)),
        };
        ServerMessage::View(ViewResponse {
            session_id: id,
            blocks: rep
                .blocks
                .iter()
                .map(|b| BlockEntry { block_id: b.block, context_id: b.context.id(), bits: b.bits })
                .collect(),
            viewport: base64::engine::general_purpose::STANDARD.encode(png),
            metrics: Metrics {
                request_bits: rep.bits,
                accumulated_bits: rep.accumulated_bits,
                usefulness: rep.usefulness,
                psnr_db: rep.psnr_db.filter(|p| p.is_finite()),
            },
        })
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().unwrap().len()
    }
}

async fn respond(service: &Arc<Service>, raw: Vec<u8>) -> Vec<u8> {
    let s = Arc::clone(service);
    let msg = tokio::task::spawn_blocking(move || s.handle_bytes(&raw))
        .await
        .unwrap_or_else(|e| error(ErrorKind::Internal, e.to_string(), None));
    serde_json::to_vec(&msg).expect("messages serialize")
}

async fn framed(mut stream: TcpStream, service: Arc<Service>) -> std::io::Result<()> {
    loop {
        let len = match stream.read_u32().await {
            Ok(n) => n as usize,
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(()),
            Err(e) => return Err(e),
        };
        let out = if len > MAX_FRAME {
            // the frame cannot be skipped safely; answer and hang up
            let m = error(ErrorKind::BadRequest, format!("frame of {len} bytes exceeds {MAX_FRAME}"), None);
            let out = serde_json::to_vec(&m).expect("messages serialize");
            stream.write_u32(out.len() as u32).await?;
            stream.write_all(&out).await?;
            return Ok(());
        } else {
            let mut buf = vec![0u8; len];
            stream.read_exact(&mut buf).await?;
            respond(&service, buf).await
        };
        stream.write_u32(out.len() as u32).await?;
        stream.write_all(&out).await?;
    }
}

async fn websocket(stream: TcpStream, service: Arc<Service>) -> Result<(), tokio_tungstenite::tungstenite::Error> {
    let mut ws = tokio_tungstenite::accept_async(stream).await?;
    while let Some(msg) = ws.next().await {
        let raw = match msg? {
            Message::Text(t) => t.into_bytes(),
            Message::Binary(b) => b,
            Message::Ping(p) => {
                ws.send(Message::Pong(p)).await?;
                continue;
            }
            Message::Close(_) => break,
            _ => continue,
        };
        let out = respond(&service, raw).await;
        ws.send(Message::Text(String::from_utf8(out).expect("JSON is UTF-8"))).await?;
    }
    Ok(())
}

async fn connection(stream: TcpStream, service: Arc<Service>) {
    let peer = stream.peer_addr().ok();
    let mut head = [0u8; 4];
    // a client may deliver its first bytes in pieces
    let mut seen = 0;
    for _ in 0..200 {
        match stream.peek(&mut head).await {
            Ok(0) | Err(_) => return,
            Ok(n) if n >= 4 => {
                seen = n;
                break;
            }
            Ok(n) => seen = n,
        }
        tokio::time::sleep(std::time::Duration::from_millis(5)).await;
    }
    let is_ws = seen >= 4 && &head == b"GET ";
    let res = if is_ws {
        websocket(stream, service).await.map_err(|e| e.to_string())
    } else {
        framed(stream, service).await.map_err(|e| e.to_string())
    };
    if let Err(e) = res {
        log::debug!("connection {peer:?}: {e}");
    }
}

/// Accepts connections until the listener fails.
pub async fn serve(listener: TcpListener, service: Arc<Service>) -> std::io::Result<()> {
    loop {
        let (stream, _) = listener.accept().await?;
        tokio::spawn(connection(stream, Arc::clone(&service)));
    }
}
