use std::net::SocketAddr;

use futures_util::{SinkExt, StreamExt};
use skewsplat::camera::{CameraView, Convention};
use skewsplat::dataset::CameraEntry;
use skewsplat::forward::RenderConfig;
use skewsplat::image::Image;
use skewsplat::multiview::blob_scene;
use skewsplat::scene::Scene;
use skewsplat::trajectory::{entries_to_views, render_rgb8, render_trajectory};
use skewsplat_service::protocol::{decode_raw_frame, ErrorCode, ErrorReply, FrameHeader, RenderRequest};
use skewsplat_service::{router, AppState, ServiceConfig};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

async fn start(scene: Scene<f32>, cfg: ServiceConfig) -> SocketAddr {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(AppState::new(scene, cfg))).await.unwrap() });
    addr
}

async fn connect(addr: SocketAddr) -> Ws {
    connect_async(format!("ws://{addr}/ws")).await.unwrap().0
}

fn pose(angle: f64, w: u32, h: u32, frame_id: u32) -> RenderRequest {
    let view = CameraView::<f64>::look_at([3.5 * angle.sin(), 1.0, 3.5 * angle.cos()], [0.0; 3], [0.0, 1.0, 0.0], w as usize, h as usize, 0.9)
        .unwrap();
    let entry = CameraEntry::from_view(&view, None);
    RenderRequest { c2w: entry.c2w, convention: Convention::OpenCv, fov_x: 0.9, width: w, height: h, frame_id }
}

async fn send(ws: &mut Ws, req: &RenderRequest) {
    ws.send(Message::Text(serde_json::to_string(req).unwrap().into())).await.unwrap();
}

enum Reply {
    Frame(FrameHeader, Vec<u8>),
    Error(ErrorReply),
}

async fn recv(ws: &mut Ws) -> Reply {
    loop {
        match ws.next().await.expect("connection open").unwrap() {
            Message::Binary(b) => {
                let (h, p) = decode_raw_frame(&b).expect("well-formed frame");
                return Reply::Frame(h, p.to_vec());
            }
            Message::Text(t) => return Reply::Error(serde_json::from_str(t.as_str()).unwrap()),
            _ => {}
        }
    }
}

#[tokio::test]
async fn bad_request_keeps_the_connection_usable() {
    let addr = start(blob_scene(), ServiceConfig::default()).await;
    let mut ws = connect(addr).await;
    ws.send(Message::Text("{\"not\": \"a request\"}".into())).await.unwrap();
    match recv(&mut ws).await {
        Reply::Error(e) => assert_eq!(e.code, ErrorCode::BadRequest),
        Reply::Frame(..) => panic!("expected an error"),
    }
    let mut singular = pose(0.0, 8, 8, 5);
    singular.c2w[0] = 0.0;
    singular.c2w[4] = 0.0;
    singular.c2w[8] = 0.0;
    send(&mut ws, &singular).await;
    match recv(&mut ws).await {
        Reply::Error(e) => assert_eq!((e.code, e.frame_id), (ErrorCode::BadRequest, Some(5))),
        Reply::Frame(..) => panic!("expected an error"),
    }
    send(&mut ws, &pose(0.0, 8, 6, 6)).await;
    match recv(&mut ws).await {
        Reply::Frame(h, p) => {
            assert_eq!(h, FrameHeader { frame_id: 6, width: 8, height: 6 });
            assert_eq!(p.len(), 8 * 6 * 3);
        }
        Reply::Error(e) => panic!("{e:?}"),
    }
}

#[tokio::test]
async fn oversized_requests_are_refused() {
    let cfg = ServiceConfig { max_pixels: 64 * 64, ..ServiceConfig::default() };
    let addr = start(blob_scene(), cfg).await;
    let mut ws = connect(addr).await;
    for (w, h) in [(65, 64), (70_000, 1)] {
        send(&mut ws, &pose(0.0, w, h, 1)).await;
        match recv(&mut ws).await {
            Reply::Error(e) => assert_eq!(e.code, ErrorCode::TooLarge),
            Reply::Frame(..) => panic!("expected too_large"),
        }
    }
}

#[tokio::test]
async fn empty_scene_renders_background() {
    let scene = Scene::<f32>::new(0).with_background([1.0, 0.0, 0.5]);
    let addr = start(scene, ServiceConfig::default()).await;
    let mut ws = connect(addr).await;
    send(&mut ws, &pose(0.3, 5, 3, 0)).await;
    let Reply::Frame(_, p) = recv(&mut ws).await else { panic!("expected a frame") };
    assert_eq!(p.len(), 45);
    assert!(p.chunks(3).all(|c| c == [255, 0, 128]), "{p:?}");
}

#[tokio::test]
async fn stale_requests_are_dropped() {
    let addr = start(blob_scene(), ServiceConfig::default()).await;
    let mut ws = connect(addr).await;
    let n = 40;
    for i in 0..n {
        send(&mut ws, &pose(i as f64 * 0.05, 160, 120, i)).await;
    }
    let mut ids = Vec::new();
    while ids.last() != Some(&(n - 1)) {
        match recv(&mut ws).await {
            Reply::Frame(h, _) => ids.push(h.frame_id),
            Reply::Error(e) => panic!("{e:?}"),
        }
    }
    assert!(ids.windows(2).all(|w| w[0] < w[1]), "{ids:?}");
    assert!(ids.len() <= n as usize);
}

#[tokio::test]
async fn frames_match_offline_renders() {
    let scene: Scene<f32> = blob_scene();
    let addr = start(scene.clone(), ServiceConfig::default()).await;
    let mut ws = connect(addr).await;
    let dir = tempfile::tempdir().unwrap();
    let reqs: Vec<_> = (0..3).map(|i| pose(0.7 * i as f64, 40, 30, i)).collect();
    let entries: Vec<_> = reqs
        .iter()
        .map(|r| CameraEntry { file: None, c2w: r.c2w, convention: r.convention, fov_x: r.fov_x, fov_y: None, width: 40, height: 30 })
        .collect();
    let views = entries_to_views::<f32>(&entries).unwrap();
    let paths = render_trajectory(&scene, &views, dir.path(), &RenderConfig::default()).unwrap();
    for ((req, view), path) in reqs.iter().zip(&views).zip(&paths) {
        send(&mut ws, req).await;
        let Reply::Frame(h, p) = recv(&mut ws).await else { panic!("expected a frame") };
        assert_eq!(h.frame_id, req.frame_id);
        assert_eq!(p, render_rgb8(&scene, view, &RenderConfig::default()).unwrap());
        assert_eq!(p, Image::<f32>::load_png(path).unwrap().to_rgb8());
    }
}

#[tokio::test]
async fn png_frames_decode_to_raw_pixels() {
    let scene: Scene<f32> = blob_scene();
    let addr = start(scene.clone(), ServiceConfig { png: true, ..ServiceConfig::default() }).await;
    let mut ws = connect(addr).await;
    let req = pose(1.0, 24, 16, 2);
    send(&mut ws, &req).await;
    let Some(Ok(Message::Binary(b))) = ws.next().await else { panic!("expected a frame") };
    let h = FrameHeader::decode(&b).unwrap();
    assert_eq!(h, FrameHeader { frame_id: 2, width: 24, height: 16 });
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.png");
    std::fs::write(&path, &b[8..]).unwrap();
    let expect = render_rgb8(&scene, &CameraView::new(cast(req.c2w), Convention::OpenCv, 24, 16, 0.9).unwrap(), &RenderConfig::default()).unwrap();
    assert_eq!(Image::<f32>::load_png(&path).unwrap().to_rgb8(), expect);
}

fn cast(m: [f64; 16]) -> [[f32; 4]; 4] {
    std::array::from_fn(|r| std::array::from_fn(|c| m[r * 4 + c] as f32))
}

#[tokio::test]
async fn health_reports_the_scene() {
    let addr = start(blob_scene(), ServiceConfig::default()).await;
    let mut s = TcpStream::connect(addr).await.unwrap();
    s.write_all(b"GET /health HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").await.unwrap();
    let mut body = String::new();
    s.read_to_string(&mut body).await.unwrap();
    assert!(body.starts_with("HTTP/1.1 200"), "{body}");
    let json = body.split("\r\n\r\n").nth(1).unwrap();
    let v: serde_json::Value = serde_json::from_str(json).unwrap();
    assert_eq!(v["n_primitives"], 3);
    assert_eq!(v["sh_degree"], 0);
}
