use std::time::{Duration, Instant};

use fliqc_harness::{data_dir, load_scenario};
use fliqc_service::{spawn, Running, ServerState, Session, SessionConfig, WireMessage};
use futures::{SinkExt, StreamExt};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio_tungstenite::tungstenite::Message;

type Client = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

async fn start(scene: &str) -> Running {
    let sc = load_scenario(data_dir().join("scenes").join(scene)).unwrap();
    let session = Session::new(sc, SessionConfig::default()).unwrap();
    spawn(session, "127.0.0.1:0".parse().unwrap()).await.unwrap()
}

async fn connect(svc: &Running) -> Client {
    let (ws, _) = tokio_tungstenite::connect_async(format!("ws://{}/ws", svc.addr)).await.unwrap();
    ws
}

async fn next_state(ws: &mut Client) -> ServerState {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(5), ws.next()).await.unwrap().unwrap().unwrap();
        if let Message::Text(t) = msg {
            match serde_json::from_str::<WireMessage>(t.as_str()).unwrap() {
                WireMessage::ServerState(s) => return s,
                other => panic!("server sent {other:?}"),
            }
        }
    }
}

async fn send(ws: &mut Client, text: &str) {
    ws.send(Message::Text(text.into())).await.unwrap();
}

async fn http_get(svc: &Running, path: &str) -> String {
    let mut stream = tokio::net::TcpStream::connect(svc.addr).await.unwrap();
    let req = format!("GET {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n");
    stream.write_all(req.as_bytes()).await.unwrap();
    let mut out = String::new();
    stream.read_to_string(&mut out).await.unwrap();
    out
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn healthz_answers_ok() {
    let svc = start("planar_2r_example.json").await;
    let resp = http_get(&svc, "/healthz").await;
    assert!(resp.starts_with("HTTP/1.1 200"), "{resp}");
    let state = http_get(&svc, "/state").await;
    assert!(state.contains("\"type\":\"ServerState\""));
    svc.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn simulation_runs_without_clients_and_late_joiners_get_state() {
    let svc = start("planar_2r_example.json").await;
    tokio::time::sleep(Duration::from_millis(200)).await;
    let mut ws = connect(&svc).await;
    let first = next_state(&mut ws).await;
    assert!(first.tick > 10, "tick {}", first.tick);
    assert!(first.t > 0.0);
    svc.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn pause_and_resume_over_the_socket() {
    let svc = start("planar_2r_example.json").await;
    let mut ws = connect(&svc).await;
    next_state(&mut ws).await;
    send(&mut ws, r#"{"type":"ClientControl","action":"pause"}"#).await;
    let mut paused = next_state(&mut ws).await;
    while !paused.paused {
        paused = next_state(&mut ws).await;
    }
    for _ in 0..20 {
        let s = next_state(&mut ws).await;
        assert!(s.paused);
        assert_eq!(s.q, paused.q);
    }
    send(&mut ws, r#"{"type":"ClientControl","action":"resume"}"#).await;
    let mut s = next_state(&mut ws).await;
    while s.paused {
        s = next_state(&mut ws).await;
    }
    svc.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn protocol_violations_close_only_the_offender() {
    let svc = start("arm_dynamic.json").await;
    let mut good = connect(&svc).await;
    let mut bad = connect(&svc).await;
    next_state(&mut good).await;
    send(&mut bad, r#"{"type":"Teleport","id":"side"}"#).await;
    let mut closed = false;
    for _ in 0..200 {
        match tokio::time::timeout(Duration::from_secs(5), bad.next()).await.unwrap() {
            Some(Ok(Message::Close(frame))) => {
                assert_eq!(u16::from(frame.unwrap().code), 1008);
                closed = true;
                break;
            }
            Some(Ok(_)) => continue,
            _ => {
                closed = true;
                break;
            }
        }
    }
    assert!(closed);
    let a = next_state(&mut good).await;
    let b = next_state(&mut good).await;
    assert!(b.tick > a.tick);
    svc.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn obstacle_updates_move_the_obstacle_smoothly() {
    let svc = start("arm_dynamic.json").await;
    let mut ws = connect(&svc).await;
    let s0 = next_state(&mut ws).await;
    let c0 = s0.obstacles.iter().find(|o| o.id == "top").unwrap().center;
    let target = [c0[0], c0[1], c0[2] + 1.0];
    send(
        &mut ws,
        &format!(r#"{{"type":"ClientObstacleUpdate","id":"top","center":[{},{},{}]}}"#, target[0], target[1], target[2]),
    )
    .await;
    let mut prev = c0;
    let mut moved = false;
    for _ in 0..100 {
        let s = next_state(&mut ws).await;
        let c = s.obstacles.iter().find(|o| o.id == "top").unwrap().center;
        let step = ((c[0] - prev[0]).powi(2) + (c[1] - prev[1]).powi(2) + (c[2] - prev[2]).powi(2)).sqrt();
        assert!(step <= 0.1 + 1e-9, "{step}");
        if c[2] > c0[2] + 0.5 {
            moved = true;
        }
        prev = c;
        if !s.paused && s.solver_status != "InfeasibleLinear" {
            for ct in &s.contacts {
                assert!(ct.predicted >= ct.epsilon - 1e-8 || s.violation);
            }
        }
    }
    assert!(moved);
    svc.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn broadcast_interval_tracks_the_tick_rate() {
    let svc = start("planar_2r_example.json").await;
    let mut ws = connect(&svc).await;
    next_state(&mut ws).await;
    let mut stamps = Vec::new();
    let mut ticks = Vec::new();
    for _ in 0..300 {
        let s = next_state(&mut ws).await;
        stamps.push(Instant::now());
        ticks.push(s.tick);
    }
    let mut gaps: Vec<f64> = stamps.windows(2).map(|w| (w[1] - w[0]).as_secs_f64()).collect();
    gaps.sort_by(f64::total_cmp);
    let median = gaps[gaps.len() / 2];
    assert!((median - 0.004).abs() <= 0.2 * 0.004, "median gap {median}");
    let span = (ticks[ticks.len() - 1] - ticks[0]) as f64;
    assert!(ticks.len() as f64 >= 0.95 * (span + 1.0));
    svc.shutdown().await;
}
