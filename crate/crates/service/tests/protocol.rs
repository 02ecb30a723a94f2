use std::path::Path;
use std::time::Duration;

use futures_util::StreamExt;
use litforage_core::provider::corpus::Corpus;
use litforage_core::session::{replay, SessionDir};
use litforage_core::{Engine, GraphDocument, MetadataClient, ProviderConfig};
use litforage_service::frames::Frame;
use litforage_service::{router, AppState, ServiceConfig};
use serde_json::{json, Value};
use tempfile::TempDir;
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};

type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

struct Harness {
    base: String,
    ws_base: String,
    state: AppState,
    http: reqwest::Client,
    _fixtures: TempDir,
    sessions: TempDir,
}

async fn start(persist: bool) -> Harness {
    let fixtures = tempfile::tempdir().unwrap();
    Corpus::bundled().write_fixtures(fixtures.path()).unwrap();
    let sessions = tempfile::tempdir().unwrap();
    let mut config = ServiceConfig::new(ProviderConfig::fixtures(fixtures.path()));
    config.max_broadcasts_per_sec = 2000;
    if persist {
        config.sessions_root = Some(sessions.path().to_path_buf());
    }
    let state = AppState::new(config);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let app = router(state.clone());
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    Harness {
        base: format!("http://{addr}"),
        ws_base: format!("ws://{addr}"),
        state,
        http: reqwest::Client::new(),
        _fixtures: fixtures,
        sessions,
    }
}

impl Harness {
    async fn post(&self, path: &str, body: Value) -> (u16, Value) {
        let r = self.http.post(format!("{}{path}", self.base)).json(&body).send().await.unwrap();
        (r.status().as_u16(), r.json().await.unwrap())
    }

    async fn get(&self, path: &str) -> (u16, Value) {
        let r = self.http.get(format!("{}{path}", self.base)).send().await.unwrap();
        (r.status().as_u16(), r.json().await.unwrap())
    }

    async fn create(&self) -> String {
        let (status, body) =
            self.post("/sessions", json!({ "seed_ids": ["fdl-01", "vr-01", "lit-01"], "topic": "t", "layout_seed": 9 })).await;
        assert_eq!(status, 201, "{body}");
        body["session_id"].as_str().unwrap().to_string()
    }

    async fn command(&self, id: &str, modality: &str, command: Value) -> (u16, Value) {
        self.post(&format!("/sessions/{id}/commands"), json!({ "modality": modality, "command": command })).await
    }

    async fn graph(&self, id: &str) -> GraphDocument {
        serde_json::from_value(self.get(&format!("/sessions/{id}/graph")).await.1).unwrap()
    }

    async fn wait_cool(&self, id: &str) {
        for _ in 0..2000 {
            if self.graph(id).await.layout.alpha < 0.001 {
                return;
            }
            tokio::time::sleep(Duration::from_millis(5)).await;
        }
        panic!("layout never cooled");
    }

    async fn events(&self, id: &str) -> Vec<Value> {
        self.get(&format!("/sessions/{id}/events")).await.1.as_array().unwrap().clone()
    }

    async fn subscribe(&self, id: &str) -> Ws {
        let (ws, _) = tokio_tungstenite::connect_async(format!("{}/sessions/{id}/stream", self.ws_base)).await.unwrap();
        ws
    }
}

/// Frames received until the stream stays quiet for `quiet`.
async fn drain(ws: &mut Ws, quiet: Duration) -> Vec<Frame> {
    let mut out = Vec::new();
    while let Ok(Some(msg)) = tokio::time::timeout(quiet, ws.next()).await {
        if let Message::Text(t) = msg.unwrap() {
            out.push(serde_json::from_str(&t).unwrap());
        }
    }
    out
}

fn kinds(frames: &[Frame]) -> Vec<&'static str> {
    frames.iter().map(Frame::kind).collect()
}

#[tokio::test]
async fn create_session_seeds_three_papers() {
    let h = start(false).await;
    let (status, body) = h.post("/sessions", json!({ "seed_ids": ["fdl-01", "vr-01", "lit-01"] })).await;
    assert_eq!(status, 201);
    let doc: GraphDocument = serde_json::from_value(body["document"].clone()).unwrap();
    assert_eq!(doc.nodes.len(), 3);
    assert!(doc.nodes.iter().all(|n| n.is_seed));
    assert_eq!(doc.layout.alpha, 1.0);
    let events = h.events(body["session_id"].as_str().unwrap()).await;
    assert_eq!(events.len(), 1);
    assert_eq!(events[0]["modality"], "system");
}

#[tokio::test]
async fn bad_seeds_create_nothing() {
    let h = start(true).await;
    let (status, body) = h.post("/sessions", json!({ "seed_ids": [] })).await;
    assert_eq!((status, body["code"].as_str()), (422, Some("validation")));
    let (status, body) = h.post("/sessions", json!({ "seed_ids": ["fdl-01", "bogus-7", "lit-01"] })).await;
    assert_eq!(status, 404, "{body}");
    assert!(body["message"].as_str().unwrap().contains("bogus-7"));
    assert!(body.get("detail").is_some());
    assert!(h.state.session_ids().is_empty());
    assert_eq!(std::fs::read_dir(h.sessions.path()).unwrap().count(), 0);
}

#[tokio::test]
async fn malformed_and_unknown_requests() {
    let h = start(false).await;
    let id = h.create().await;
    let (status, body) = h.command(&id, "api", json!({ "type": "teleport" })).await;
    assert_eq!((status, body["code"].as_str()), (400, Some("protocol")));
    let (status, _) = h.get("/sessions/nope/graph").await;
    assert_eq!(status, 404);
    let (status, body) = h.command(&id, "api", json!({ "type": "annotate", "id": "fdl-01", "text": "" })).await;
    assert_eq!((status, body["code"].as_str()), (422, Some("validation")));
    let (status, body) = h.command(&id, "api", json!({ "type": "remove", "id": "absent" })).await;
    assert_eq!((status, body["code"].as_str()), (404, Some("not_found")));
    assert_eq!(h.events(&id).await.len(), 1, "failed commands are not logged");
}

#[tokio::test]
async fn idle_subscriber_gets_one_graph_frame() {
    let h = start(false).await;
    let id = h.create().await;
    h.wait_cool(&id).await;
    let mut ws = h.subscribe(&id).await;
    let frames = drain(&mut ws, Duration::from_millis(300)).await;
    assert_eq!(kinds(&frames), vec!["graph"]);
}

#[tokio::test]
async fn expand_pin_cluster_transcript() {
    let h = start(false).await;
    let id = h.create().await;
    h.wait_cool(&id).await;
    let mut ws = h.subscribe(&id).await;

    let (status, expand) =
        h.command(&id, "menu", json!({ "type": "expand", "mode": "thematic", "seeds": ["fdl-01"], "k": 2 })).await;
    assert_eq!(status, 200, "{expand}");
    assert_eq!(expand["result"]["added_nodes"], json!(["fdl-02", "fdl-03"]));
    assert_eq!(expand["event"]["feature"], "recommendation");
    let pin_at = json!([12.5, -3.0, 40.0]);
    let (status, _) = h.command(&id, "pointer_gesture", json!({ "type": "pin", "id": "fdl-02", "pos": pin_at })).await;
    assert_eq!(status, 200);
    let (status, cluster) = h.command(&id, "menu", json!({ "type": "cluster", "k": 2 })).await;
    assert_eq!(status, 200);
    h.wait_cool(&id).await;

    let frames = drain(&mut ws, Duration::from_millis(300)).await;
    let structural: Vec<&str> = kinds(&frames).into_iter().filter(|k| *k != "positions").collect();
    assert_eq!(structural, vec!["graph", "event", "graph", "event", "event", "clusters"]);

    // the frame right after the pin event shows the pinned coordinate
    let pin_event = frames
        .iter()
        .position(|f| matches!(f, Frame::Event { event } if event.action == "pin"))
        .unwrap();
    match &frames[pin_event + 1] {
        Frame::Positions { positions, pins, .. } => {
            assert_eq!(serde_json::to_value(positions["fdl-02"]).unwrap(), pin_at);
            assert!(pins.contains_key("fdl-02"));
        }
        other => panic!("expected positions, got {}", other.kind()),
    }
    match &frames[frames.iter().position(|f| f.kind() == "clusters").unwrap()] {
        Frame::Clusters { clusters } => assert_eq!(serde_json::to_value(clusters).unwrap(), cluster["result"]["clusters"]),
        _ => unreachable!(),
    }

    // one event per mutation, mirrored in order
    let events = h.events(&id).await;
    let actions: Vec<&str> = events.iter().map(|e| e["action"].as_str().unwrap()).collect();
    assert_eq!(actions, vec!["seed", "expand_thematic", "pin", "cluster"]);
    let mirrored: Vec<Value> = frames
        .iter()
        .filter_map(|f| match f {
            Frame::Event { event } => Some(serde_json::to_value(event).unwrap()),
            _ => None,
        })
        .collect();
    assert_eq!(mirrored, events[1..].to_vec());

    // no positions frame names a node the subscriber has not seen in a graph frame
    let mut known: Vec<String> = Vec::new();
    for f in &frames {
        match f {
            Frame::Graph { document } => known = document.nodes.iter().map(|n| n.id.to_string()).collect(),
            Frame::Positions { positions, .. } => assert!(positions.keys().all(|k| known.contains(&k.to_string()))),
            _ => {}
        }
    }

    // replaying the stream reproduces the served document
    let mut mirror: Option<GraphDocument> = None;
    for f in frames {
        match f {
            Frame::Graph { document } => mirror = Some(document),
            Frame::Positions { alpha, positions, pins } => {
                let m = mirror.as_mut().unwrap();
                m.layout.alpha = alpha;
                m.layout.positions = positions;
                m.layout.pins = pins;
            }
            Frame::Clusters { clusters } => mirror.as_mut().unwrap().clusters = clusters,
            Frame::Event { event } => mirror.as_mut().unwrap().updated_at = event.ts,
        }
    }
    let mirror = mirror.unwrap();
    let served = h.graph(&id).await;
    assert_eq!(mirror.nodes, served.nodes);
    assert_eq!(mirror.edges, served.edges);
    assert_eq!(mirror.clusters, served.clusters);
    assert_eq!(mirror.annotations, served.annotations);
    assert_eq!(mirror.updated_at, served.updated_at);
    assert_eq!(mirror.layout.positions, served.layout.positions);
    assert_eq!(mirror.layout.pins, served.layout.pins);
    assert_eq!(mirror.layout.alpha, served.layout.alpha);
}

#[tokio::test]
async fn lagging_subscriber_still_sees_final_positions() {
    let h = start(false).await;
    let id = h.create().await;
    let mut ws = h.subscribe(&id).await;
    // do not read while the 300-tick run proceeds
    h.wait_cool(&id).await;
    tokio::time::sleep(Duration::from_millis(50)).await;
    let frames = drain(&mut ws, Duration::from_millis(300)).await;
    let last = frames.iter().rev().find_map(|f| match f {
        Frame::Positions { positions, alpha, .. } => Some((positions.clone(), *alpha)),
        _ => None,
    });
    let served = h.graph(&id).await;
    let (positions, alpha) = last.expect("a positions frame");
    assert_eq!(positions, served.layout.positions);
    assert!(alpha < 0.001);
}

#[tokio::test]
async fn concurrent_commands_are_serialized() {
    let h = start(false).await;
    let id = h.create().await;
    let a = h.command(&id, "api", json!({ "type": "annotate", "id": "fdl-01", "text": "first" }));
    let b = h.command(&id, "api", json!({ "type": "link", "a": "vr-01", "b": "lit-01" }));
    let ((sa, ra), (sb, rb)) = tokio::join!(a, b);
    assert_eq!((sa, sb), (200, 200));
    let events = h.events(&id).await;
    assert_eq!(events.len(), 3);
    let logged: Vec<&Value> = events[1..].iter().collect();
    assert!(logged.contains(&&ra["event"]) && logged.contains(&&rb["event"]));
    assert!(events[1]["ts"].as_i64() <= events[2]["ts"].as_i64());
}

fn replay_dir(dir: &Path) -> (GraphDocument, GraphDocument) {
    let sdir = SessionDir::new(dir);
    let engine = Engine::new(std::sync::Arc::new(MetadataClient::new(ProviderConfig::fixtures(sdir.fixtures_dir())).unwrap()));
    let replayed = replay(GraphDocument::default(), &sdir.events().unwrap(), &engine).unwrap();
    (replayed, sdir.load_document().unwrap())
}

#[tokio::test]
async fn shutdown_persists_a_replayable_session() {
    let h = start(true).await;
    let id = h.create().await;
    h.command(&id, "menu", json!({ "type": "expand", "mode": "references_backward", "seeds": ["vr-01"], "k": 3 })).await;
    tokio::time::sleep(Duration::from_millis(20)).await;
    h.command(&id, "pointer_gesture", json!({ "type": "move", "id": "vr-02", "pos": [5.0, 5.0, 5.0] })).await;
    h.command(&id, "menu", json!({ "type": "insights", "id": "vr-01", "kind": "tldr" })).await;
    h.wait_cool(&id).await;
    h.state.shutdown().await.unwrap();

    let dir = h.sessions.path().join(&id);
    let sdir = SessionDir::new(&dir);
    assert!(!sdir.snapshot_times().unwrap().is_empty());
    let events = sdir.events().unwrap();
    assert_eq!(events.last().unwrap().action, "session_end");
    let (replayed, saved) = replay_dir(&dir);
    assert_eq!(replayed, saved);
}
