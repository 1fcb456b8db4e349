//! WebSocket render backend.
//!
//! Each connection owns a depth-1 slot: a request that arrives while an
//! older one is still queued replaces it, so a fast-moving client only
//! ever waits for its latest pose. Renders from all connections share one
//! worker permit; the scene is read-only for the lifetime of the server.

pub mod protocol;

use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::{Json, Router};
use futures_util::{SinkExt, StreamExt};
use serde::Serialize;
use skewsplat::camera::CameraView;
use skewsplat::forward::RenderConfig;
use skewsplat::image::encode_png_rgb8;
use skewsplat::scene::Scene;
use skewsplat::trajectory::render_rgb8;
use tokio::sync::{mpsc, Notify, Semaphore};

use protocol::{encode_frame, ErrorCode, ErrorReply, FrameHeader, RenderRequest};

pub const DEFAULT_MAX_SIDE: u32 = 4096;

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    /// Largest accepted `width · height`.
    pub max_pixels: u64,
    /// PNG-compress frame payloads.
    pub png: bool,
    pub render: RenderConfig<f32>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            max_pixels: DEFAULT_MAX_SIDE as u64 * DEFAULT_MAX_SIDE as u64,
            png: false,
            render: RenderConfig::default(),
        }
    }
}

struct Shared {
    scene: Scene<f32>,
    cfg: ServiceConfig,
    worker: Semaphore,
}

#[derive(Clone)]
pub struct AppState(Arc<Shared>);

impl AppState {
    pub fn new(scene: Scene<f32>, cfg: ServiceConfig) -> Self {
        Self(Arc::new(Shared { scene, cfg, worker: Semaphore::new(1) }))
    }
}

#[derive(Serialize)]
struct Health {
    n_primitives: usize,
    sh_degree: usize,
}

pub fn router(state: AppState) -> Router {
    Router::new().route("/ws", get(ws_handler)).route("/health", get(health)).with_state(state)
}

/// Binds `addr` and serves until the process ends.
pub async fn serve(scene: Scene<f32>, addr: SocketAddr, cfg: ServiceConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, primitives = scene.len(), "render service listening");
    serve_listener(listener, AppState::new(scene, cfg)).await
}

/// Serves on an already bound listener, e.g. one on an ephemeral port.
pub async fn serve_listener(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

async fn health(State(state): State<AppState>) -> Json<Health> {
    Json(Health { n_primitives: state.0.scene.len(), sh_degree: state.0.scene.sh_degree })
}

async fn ws_handler(ws: WebSocketUpgrade, State(state): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| connection(socket, state))
}

#[derive(Default)]
struct Slot {
    pending: Mutex<Option<RenderRequest>>,
    wake: Notify,
    closed: AtomicBool,
}

fn error_message(code: ErrorCode, message: String, frame_id: Option<u32>) -> Message {
    let reply = ErrorReply { code, message, frame_id };
    Message::Text(serde_json::to_string(&reply).expect("error replies serialize").into())
}

/// Checks a request and builds its view.
pub fn validate(req: &RenderRequest, max_pixels: u64) -> Result<CameraView<f32>, (ErrorCode, String)> {
    let (w, h) = (req.width as u64, req.height as u64);
    if w == 0 || h == 0 {
        return Err((ErrorCode::BadRequest, format!("image size {w}x{h}")));
    }
    if w * h > max_pixels || w > u16::MAX as u64 || h > u16::MAX as u64 {
        return Err((ErrorCode::TooLarge, format!("{w}x{h} exceeds {max_pixels} pixels")));
    }
    let m: [[f32; 4]; 4] = std::array::from_fn(|r| std::array::from_fn(|c| req.c2w[r * 4 + c] as f32));
    for (k, want) in [0.0, 0.0, 0.0, 1.0].iter().enumerate() {
        if (req.c2w[12 + k] - want).abs() > 1e-6 {
            return Err((ErrorCode::BadRequest, "bottom row is not (0, 0, 0, 1)".into()));
        }
    }
    CameraView::new(m, req.convention, req.width as usize, req.height as usize, req.fov_x as f32)
        .map_err(|e| (ErrorCode::BadRequest, e.to_string()))
}

/// Renders one request into a complete frame message body.
pub fn render_frame(scene: &Scene<f32>, cfg: &ServiceConfig, req: &RenderRequest) -> Result<Vec<u8>, (ErrorCode, String)> {
    let view = validate(req, cfg.max_pixels)?;
    let rgb = render_rgb8(scene, &view, &cfg.render).map_err(|e| (ErrorCode::TooLarge, e.to_string()))?;
    let header = FrameHeader { frame_id: req.frame_id, width: req.width as u16, height: req.height as u16 };
    let payload = if cfg.png { encode_png_rgb8(view.width, view.height, &rgb) } else { rgb };
    Ok(encode_frame(header, &payload))
}

async fn connection(socket: WebSocket, state: AppState) {
    let (mut sink, mut stream) = socket.split();
    let (tx, mut rx) = mpsc::channel::<Message>(16);
    let slot = Arc::new(Slot::default());

    let writer = tokio::spawn(async move {
        while let Some(msg) = rx.recv().await {
            if sink.send(msg).await.is_err() {
                break;
            }
        }
    });

    let worker = {
        let slot = slot.clone();
        let tx = tx.clone();
        let state = state.clone();
        tokio::spawn(async move {
            loop {
                slot.wake.notified().await;
                let req = slot.pending.lock().expect("slot lock").take();
                let Some(req) = req else {
                    if slot.closed.load(Ordering::Acquire) {
                        break;
                    }
                    continue;
                };
                let _permit = state.0.worker.acquire().await.expect("semaphore never closes");
                let shared = state.0.clone();
                let out = tokio::task::spawn_blocking(move || {
                    let frame_id = req.frame_id;
                    render_frame(&shared.scene, &shared.cfg, &req).map_err(|e| (e, frame_id))
                })
                .await;
                let msg = match out {
                    Ok(Ok(bytes)) => Message::Binary(bytes.into()),
                    Ok(Err(((code, message), id))) => error_message(code, message, Some(id)),
                    Err(e) => error_message(ErrorCode::BadRequest, format!("render failed: {e}"), None),
                };
                if tx.send(msg).await.is_err() {
                    break;
                }
                if slot.closed.load(Ordering::Acquire) && slot.pending.lock().expect("slot lock").is_none() {
                    break;
                }
            }
        })
    };

    while let Some(Ok(msg)) = stream.next().await {
        match msg {
            Message::Text(text) => match serde_json::from_str::<RenderRequest>(text.as_str()) {
                Ok(req) => match validate(&req, state.0.cfg.max_pixels) {
                    Ok(_) => {
                        *slot.pending.lock().expect("slot lock") = Some(req);
                        slot.wake.notify_one();
                    }
                    Err((code, message)) => {
                        let _ = tx.send(error_message(code, message, Some(req.frame_id))).await;
                    }
                },
                Err(e) => {
                    let _ = tx.send(error_message(ErrorCode::BadRequest, e.to_string(), None)).await;
                }
            },
            Message::Binary(_) => {
                let _ = tx.send(error_message(ErrorCode::BadRequest, "expected a JSON text message".into(), None)).await;
            }
            Message::Close(_) => break,
            Message::Ping(_) | Message::Pong(_) => {}
        }
    }
    slot.closed.store(true, Ordering::Release);
    slot.wake.notify_one();
    let _ = worker.await;
    drop(tx);
    let _ = writer.await;
}
