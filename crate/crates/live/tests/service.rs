use std::time::Duration;

use copbal_live::{serve_live, LiveConfig, LiveError, LiveServer, SimConfig, StateFrame};
use futures_util::StreamExt;
use serde_json::{json, Value};
use tokio::time::timeout;
use tokio_tungstenite::tungstenite::Message;

type Ws =
    tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

async fn start(tick_ms: u64, sim: SimConfig) -> LiveServer {
    serve_live(LiveConfig {
        port: 0,
        tick_interval: Duration::from_millis(tick_ms),
        sim,
        ..LiveConfig::default()
    })
    .await
    .unwrap()
}

async fn connect(server: &LiveServer) -> Ws {
    let url = format!("ws://{}/ws", server.local_addr());
    tokio_tungstenite::connect_async(url).await.unwrap().0
}

async fn next_frame(ws: &mut Ws) -> StateFrame {
    loop {
        let msg = timeout(Duration::from_secs(5), ws.next())
            .await
            .expect("no frame within 5 s")
            .unwrap()
            .unwrap();
        if let Message::Text(text) = msg {
            return serde_json::from_str(&text).unwrap();
        }
    }
}

async fn post(server: &LiveServer, command: &str, body: Value) -> (u16, Value) {
    let url = format!("http://{}/api/{command}", server.local_addr());
    let r = reqwest::Client::new()
        .post(url)
        .json(&body)
        .send()
        .await
        .unwrap();
    (r.status().as_u16(), r.json().await.unwrap())
}

async fn get(server: &LiveServer, path: &str) -> Value {
    let url = format!("http://{}{path}", server.local_addr());
    reqwest::get(url).await.unwrap().json().await.unwrap()
}

#[tokio::test]
async fn second_bind_reports_port_in_use() {
    let a = start(50, SimConfig::default()).await;
    let port = a.local_addr().port();
    let b = serve_live(LiveConfig {
        port,
        ..LiveConfig::default()
    })
    .await;
    assert!(matches!(b, Err(LiveError::PortInUse(p)) if p == port));
    a.shutdown().await.unwrap();
}

#[tokio::test]
async fn frames_stream_at_the_tick_rate() {
    let server = start(50, SimConfig::default()).await;
    let mut ws = connect(&server).await;
    let first = next_frame(&mut ws).await;
    let start = tokio::time::Instant::now();
    let mut last = first.t_ms;
    for _ in 0..10 {
        let f = next_frame(&mut ws).await;
        assert_eq!(f.t_ms, last + 50);
        last = f.t_ms;
    }
    // ten frames at 20 Hz
    let elapsed = start.elapsed();
    assert!(
        elapsed > Duration::from_millis(400) && elapsed < Duration::from_millis(1500),
        "{elapsed:?}"
    );
    let state = get(&server, "/api/state").await;
    assert!(state["t_ms"].as_u64().unwrap() >= last);
    assert!(state["cells"].as_array().unwrap().len() == 8);
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn gain_ack_is_applied_by_the_next_tick() {
    let server = start(50, SimConfig::default()).await;
    let mut ws = connect(&server).await;
    next_frame(&mut ws).await;
    let (status, ack) = post(
        &server,
        "gains",
        json!({ "kp": 0.2, "ki": 0.01, "kd": 0.0 }),
    )
    .await;
    assert_eq!(status, 200, "{ack}");
    assert_eq!(ack["ok"], true);
    assert_eq!(ack["applied"], json!({ "kp": 0.2, "ki": 0.01, "kd": 0.0 }));
    let applied_at = ack["t_ms"].as_u64().unwrap();
    loop {
        let f = next_frame(&mut ws).await;
        if f.t_ms >= applied_at {
            assert_eq!((f.gains.kp, f.gains.ki, f.gains.kd), (0.2, 0.01, 0.0));
            break;
        }
    }
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn bad_commands_get_structured_errors() {
    let server = start(50, SimConfig::default()).await;
    let url = format!("http://{}/api/gains", server.local_addr());
    let r = reqwest::Client::new()
        .post(&url)
        .body("{kp")
        .send()
        .await
        .unwrap();
    assert_eq!(r.status().as_u16(), 400);
    let body: Value = r.json().await.unwrap();
    assert_eq!(body["ok"], false);
    assert_eq!(body["error"]["code"], "malformed");

    let (status, body) = post(
        &server,
        "gains",
        json!({ "kp": -1.0, "ki": 0.0, "kd": 0.0 }),
    )
    .await;
    assert_eq!(
        (status, body["error"]["code"].as_str()),
        (422, Some("invalid_value"))
    );
    let (status, body) = post(&server, "tare", json!({ "cell": 9 })).await;
    assert_eq!(
        (status, body["error"]["code"].as_str()),
        (422, Some("invalid_value"))
    );
    let (status, body) = post(&server, "jump", json!({})).await;
    assert_eq!(
        (status, body["error"]["code"].as_str()),
        (404, Some("unknown_command"))
    );
    let (status, body) = post(&server, "stop_trial", json!({})).await;
    assert_eq!(
        (status, body["error"]["code"].as_str()),
        (409, Some("conflict"))
    );
    let (status, body) = post(
        &server,
        "load_store",
        json!({ "path": "/nonexistent/cal.copc" }),
    )
    .await;
    assert_eq!(
        (status, body["error"]["code"].as_str()),
        (500, Some("store_error"))
    );
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn calibration_survives_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cal.copc");
    let sim = |seed| SimConfig {
        seed,
        store_path: path.clone(),
        ..SimConfig::default()
    };

    let a = start(20, sim(1)).await;
    let (status, _) = post(
        &a,
        "calibration",
        json!({ "cell": 3, "gradient": 0.0125, "offset_counts": -4321.5 }),
    )
    .await;
    assert_eq!(status, 200);
    let (status, _) = post(&a, "tare", json!({ "cell": 6 })).await;
    assert_eq!(status, 200);
    let (status, saved) = post(&a, "save_store", json!({})).await;
    assert_eq!(status, 200, "{saved}");
    let before = get(&a, "/api/calibration").await;
    assert_eq!(before["cells"][3]["gradient"], 0.0125);
    a.shutdown().await.unwrap();

    // a different seed draws different cells, so only the load can make them match
    let b = start(20, sim(2)).await;
    assert_ne!(get(&b, "/api/calibration").await, before);
    let (status, loaded) = post(&b, "load_store", json!({})).await;
    assert_eq!(status, 200, "{loaded}");
    assert_eq!(loaded["applied"]["cells"], before["cells"]);
    assert_eq!(get(&b, "/api/calibration").await, before);
    b.shutdown().await.unwrap();
}

#[tokio::test]
async fn uncontrolled_lift_reaches_the_fall() {
    // 5 ms of wall time per 50 ms tick keeps the test short
    let server = start(5, SimConfig::default()).await;
    let mut ws = connect(&server).await;
    let (status, ack) = post(
        &server,
        "start_trial",
        json!({ "foot": "right", "control": false, "tilt_deg": 3.0 }),
    )
    .await;
    assert_eq!(status, 200, "{ack}");
    assert_eq!(ack["applied"]["tilt_deg"], -3.0);
    let mut fell = false;
    loop {
        let f = next_frame(&mut ws).await;
        fell |= f.fallen;
        if let Some(t) = f.trial.filter(|t| !t.active) {
            assert!(fell);
            assert_eq!(serde_json::to_value(t.outcome).unwrap(), "fall");
            break;
        }
    }
    let log = get(&server, "/api/trial").await;
    assert_eq!(log["rows"].as_array().unwrap().len(), 121);
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn packets_can_travel_over_udp() {
    let server = start(
        10,
        SimConfig {
            udp_port: Some(0),
            ..SimConfig::default()
        },
    )
    .await;
    let mut ws = connect(&server).await;
    let mut fresh = 0;
    for _ in 0..40 {
        if next_frame(&mut ws).await.fresh {
            fresh += 1;
        }
    }
    assert!(fresh > 30, "{fresh}/40 fresh");
    server.shutdown().await.unwrap();
}
