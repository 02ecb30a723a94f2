//! Session-scoped HTTP and WebSocket interface over the foraging engine.
//!
//! Each session has exactly one writer: commands queue on a per-session
//! async mutex and run in arrival order. A background stepping loop advances
//! the layout while it is warm and streams positions to subscribers.

pub mod frames;

use std::collections::BTreeMap;
use std::future::Future;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use litforage_core::{
    Command, Engine, Error, GraphDocument, InsightEngine, InteractionEvent, MetadataClient, Modality, PaperId,
    ProviderConfig, Session, SessionDir,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tokio::sync::Notify;
use tokio::task::JoinHandle;

use frames::{Frame, FrameQueue};

pub const DEFAULT_TICKS_PER_BROADCAST: usize = 2;
pub const DEFAULT_MAX_BROADCASTS_PER_SEC: u32 = 30;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub provider: ProviderConfig,
    /// New sessions are persisted under this directory when set.
    pub sessions_root: Option<PathBuf>,
    pub ticks_per_broadcast: usize,
    pub max_broadcasts_per_sec: u32,
}

impl ServiceConfig {
    pub fn new(provider: ProviderConfig) -> Self {
        ServiceConfig {
            provider,
            sessions_root: None,
            ticks_per_broadcast: DEFAULT_TICKS_PER_BROADCAST,
            max_broadcasts_per_sec: DEFAULT_MAX_BROADCASTS_PER_SEC,
        }
    }
}

pub type Clock = Arc<dyn Fn() -> i64 + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as i64))
}

/// Error body: `{code, message, detail}`.
#[derive(Debug)]
pub struct ApiError(pub Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self.0.code() {
            "not_found" => StatusCode::NOT_FOUND,
            "protocol" | "parse" => StatusCode::BAD_REQUEST,
            "validation" | "integrity" | "numeric" | "capacity" | "ordering" | "migration" => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            "rate_limited" => StatusCode::TOO_MANY_REQUESTS,
            "provider" | "insight" => StatusCode::BAD_GATEWAY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn body(&self) -> Value {
        let detail = match &self.0 {
            Error::Ordering { ts, last } => json!({ "ts": ts, "last": last }),
            Error::ReplayIncomplete { index, action, .. } => json!({ "index": index, "action": action }),
            Error::Migration { found, supported } => json!({ "found": found, "supported": supported }),
            _ => Value::Null,
        };
        json!({ "code": self.0.code(), "message": self.0.to_string(), "detail": detail })
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(self.body())).into_response()
    }
}

pub struct SessionHandle {
    pub id: String,
    session: Arc<tokio::sync::Mutex<Session>>,
    engine: Arc<Engine>,
    subscribers: Mutex<Vec<Arc<FrameQueue>>>,
    wake: Notify,
    stepper: Mutex<Option<JoinHandle<()>>>,
}

impl SessionHandle {
    fn broadcast(&self, frame: Frame) {
        for q in self.subscribers.lock().unwrap().iter() {
            q.push(frame.clone());
        }
    }

    /// Register a subscriber; its first frame is the current graph.
    pub async fn subscribe(&self) -> Arc<FrameQueue> {
        let session = self.session.lock().await;
        let queue = Arc::new(FrameQueue::default());
        queue.push(Frame::graph(&session.doc));
        self.subscribers.lock().unwrap().push(queue.clone());
        queue
    }

    pub fn unsubscribe(&self, queue: &Arc<FrameQueue>) {
        self.subscribers.lock().unwrap().retain(|q| !Arc::ptr_eq(q, queue));
    }

    pub fn subscriber_count(&self) -> usize {
        self.subscribers.lock().unwrap().len()
    }

    pub async fn document(&self) -> GraphDocument {
        self.session.lock().await.doc.clone()
    }

    pub async fn events(&self) -> Result<Vec<InteractionEvent>, Error> {
        self.session.lock().await.events()
    }
}

/// Outcome of one command as returned to the client.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CommandResponse {
    pub event: InteractionEvent,
    pub graph_changed: bool,
    pub positions_changed: bool,
    pub clusters_changed: bool,
    pub result: Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateSession {
    pub seed_ids: Vec<PaperId>,
    #[serde(default)]
    pub topic: Option<String>,
    #[serde(default)]
    pub layout_seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CommandRequest {
    #[serde(default = "default_modality")]
    pub modality: Modality,
    pub command: Command,
}

fn default_modality() -> Modality {
    Modality::Api
}

struct Inner {
    config: ServiceConfig,
    insights: Arc<InsightEngine>,
    sessions: RwLock<BTreeMap<String, Arc<SessionHandle>>>,
    counter: AtomicU64,
    clock: Clock,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        AppState::with_clock(config, system_clock())
    }

    pub fn with_clock(config: ServiceConfig, clock: Clock) -> Self {
        AppState(Arc::new(Inner {
            config,
            insights: Arc::new(InsightEngine::stub()),
            sessions: RwLock::new(BTreeMap::new()),
            counter: AtomicU64::new(0),
            clock,
        }))
    }

    pub fn with_insights(mut self, insights: InsightEngine) -> Self {
        Arc::get_mut(&mut self.0).expect("configure before sharing").insights = Arc::new(insights);
        self
    }

    pub fn now(&self) -> i64 {
        (self.0.clock)()
    }

    pub fn session(&self, id: &str) -> Result<Arc<SessionHandle>, Error> {
        self.0.sessions.read().unwrap().get(id).cloned().ok_or_else(|| Error::NotFound(format!("session {id}")))
    }

    pub fn session_ids(&self) -> Vec<String> {
        self.0.sessions.read().unwrap().keys().cloned().collect()
    }

    fn next_id(&self) -> String {
        loop {
            let n = self.0.counter.fetch_add(1, Ordering::SeqCst) + 1;
            let id = format!("s{n:04}");
            let taken = self.0.sessions.read().unwrap().contains_key(&id)
                || self.0.config.sessions_root.as_ref().is_some_and(|r| r.join(&id).exists());
            if !taken {
                return id;
            }
        }
    }

    fn engine_for(&self, dir: Option<&SessionDir>) -> Result<Engine, Error> {
        let mut provider = self.0.config.provider.clone();
        if let Some(dir) = dir {
            provider.record_path = Some(dir.fixtures_dir());
        }
        let mut engine = Engine::new(Arc::new(MetadataClient::new(provider)?));
        engine.insights = self.0.insights.clone();
        Ok(engine)
    }

    /// Seed a new session. Nothing is registered or kept on disk on failure.
    pub async fn create_session(&self, req: CreateSession) -> Result<Arc<SessionHandle>, Error> {
        if req.seed_ids.is_empty() {
            return Err(Error::Validation("seed_ids must not be empty".into()));
        }
        let id = self.next_id();
        let dir = self.0.config.sessions_root.as_ref().map(|r| SessionDir::new(r.join(&id)));
        let mut session = match &dir {
            Some(d) => Session::create(&id, d.clone())?,
            None => Session::in_memory(&id),
        };
        let engine = self.engine_for(session.dir.as_ref())?;
        let command = Command::Seed { ids: req.seed_ids, topic: req.topic, layout_seed: req.layout_seed };
        let now = self.now();
        let (session, engine) = tokio::task::spawn_blocking(move || {
            let r = session.apply(&engine, Modality::System, &command, now, 0).and_then(|_| session.save());
            r.map(|_| (session, engine))
        })
        .await
        .expect("seed task panicked")
        .inspect_err(|_| {
            if let Some(d) = &dir {
                let _ = std::fs::remove_dir_all(d.root());
            }
        })?;
        Ok(self.register(session, engine))
    }

    /// Serve an already-open session (e.g. one loaded from disk).
    pub fn adopt(&self, session: Session, mut engine: Engine) -> Arc<SessionHandle> {
        engine.insights = self.0.insights.clone();
        self.register(session, engine)
    }

    /// Engine for a session directory under this service's provider settings.
    pub fn engine_for_dir(&self, dir: &SessionDir) -> Result<Engine, Error> {
        self.engine_for(Some(dir))
    }

    fn register(&self, session: Session, engine: Engine) -> Arc<SessionHandle> {
        let handle = Arc::new(SessionHandle {
            id: session.id.clone(),
            session: Arc::new(tokio::sync::Mutex::new(session)),
            engine: Arc::new(engine),
            subscribers: Mutex::new(Vec::new()),
            wake: Notify::new(),
            stepper: Mutex::new(None),
        });
        let task = tokio::spawn(stepping_loop(handle.clone(), self.clone()));
        *handle.stepper.lock().unwrap() = Some(task);
        handle.wake.notify_one();
        self.0.sessions.write().unwrap().insert(handle.id.clone(), handle.clone());
        handle
    }

    /// Run one command under the session's exclusive writer. The event is
    /// logged and mirrored before this returns.
    pub async fn execute(&self, id: &str, modality: Modality, command: Command) -> Result<CommandResponse, Error> {
        let handle = self.session(id)?;
        let mut guard = handle.session.clone().lock_owned().await;
        let engine = handle.engine.clone();
        let now = self.now();
        let (guard, result) = tokio::task::spawn_blocking(move || {
            let r = guard.apply(&engine, modality, &command, now, 0);
            (guard, r)
        })
        .await
        .expect("command task panicked");
        let mut guard = guard;
        let (outcome, event) = result?;
        handle.broadcast(Frame::Event { event: event.clone() });
        if outcome.graph_changed {
            handle.broadcast(Frame::graph(&guard.doc));
        }
        if outcome.clusters_changed {
            handle.broadcast(Frame::clusters(&guard.doc));
        }
        if outcome.positions_changed {
            handle.broadcast(Frame::positions(&guard.doc));
        }
        if let Err(e) = guard.maybe_snapshot(now, false) {
            tracing::warn!(session = %id, error = %e, "snapshot failed");
        }
        if guard.dir.is_some() {
            guard.save()?;
        }
        drop(guard);
        handle.wake.notify_one();
        Ok(CommandResponse {
            event,
            graph_changed: outcome.graph_changed,
            positions_changed: outcome.positions_changed,
            clusters_changed: outcome.clusters_changed,
            result: outcome.result,
        })
    }

    /// Log the end of every session, persist it, snapshot it, and close streams.
    pub async fn shutdown(&self) -> Result<(), Error> {
        let handles: Vec<Arc<SessionHandle>> = self.0.sessions.read().unwrap().values().cloned().collect();
        for handle in handles {
            if let Some(task) = handle.stepper.lock().unwrap().take() {
                task.abort();
            }
            let mut session = handle.session.lock().await;
            let now = self.now();
            let (_, event) = session.apply(&handle.engine, Modality::System, &Command::End, now, 0)?;
            handle.broadcast(Frame::Event { event });
            session.save()?;
            let ts = session.last_ts().unwrap_or(now);
            session.maybe_snapshot(ts, true)?;
            for q in handle.subscribers.lock().unwrap().drain(..) {
                q.close();
            }
        }
        Ok(())
    }
}

async fn stepping_loop(handle: Arc<SessionHandle>, state: AppState) {
    let rate = state.0.config.max_broadcasts_per_sec.max(1);
    let per_broadcast = state.0.config.ticks_per_broadcast.max(1);
    let mut interval = tokio::time::interval(Duration::from_secs_f64(1.0 / rate as f64));
    interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    loop {
        let cool = {
            let s = handle.session.lock().await;
            s.doc.layout.is_cool(&handle.engine.forces)
        };
        if cool {
            handle.wake.notified().await;
            continue;
        }
        interval.tick().await;
        let mut s = handle.session.lock().await;
        match s.step(&handle.engine, per_broadcast) {
            Ok(0) => {}
            Ok(_) => handle.broadcast(Frame::positions(&s.doc)),
            Err(e) => {
                tracing::error!(session = %handle.id, error = %e, "layout step failed");
                return;
            }
        }
        let now = state.now();
        if let Err(e) = s.maybe_snapshot(now, false) {
            tracing::warn!(session = %handle.id, error = %e, "snapshot failed");
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/graph", get(get_graph))
        .route("/sessions/{id}/commands", post(post_command))
        .route("/sessions/{id}/events", get(get_events))
        .route("/sessions/{id}/stream", get(stream))
        .with_state(state)
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError(Error::Protocol(e.to_string())))
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateSession = parse_body(&body)?;
    let handle = state.create_session(req).await?;
    let document = handle.document().await;
    Ok((StatusCode::CREATED, Json(json!({ "session_id": handle.id, "document": document }))).into_response())
}

async fn get_graph(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<GraphDocument>, ApiError> {
    Ok(Json(state.session(&id)?.document().await))
}

async fn post_command(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<CommandResponse>, ApiError> {
    state.session(&id)?;
    let req: CommandRequest = parse_body(&body)?;
    Ok(Json(state.execute(&id, req.modality, req.command).await?))
}

async fn get_events(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Vec<InteractionEvent>>, ApiError> {
    Ok(Json(state.session(&id)?.events().await?))
}

async fn stream(
    State(state): State<AppState>,
    Path(id): Path<String>,
    ws: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    let handle = state.session(&id)?;
    Ok(ws.on_upgrade(move |socket| subscriber(socket, handle)))
}

async fn subscriber(mut socket: WebSocket, handle: Arc<SessionHandle>) {
    let queue = handle.subscribe().await;
    loop {
        tokio::select! {
            frame = queue.pop() => match frame {
                Some(frame) => {
                    let text = serde_json::to_string(&frame).expect("frame serializes");
                    if socket.send(Message::Text(text.into())).await.is_err() {
                        break;
                    }
                }
                None => {
                    let _ = socket.send(Message::Close(None)).await;
                    break;
                }
            },
            incoming = socket.recv() => match incoming {
                None | Some(Err(_)) | Some(Ok(Message::Close(_))) => break,
                Some(Ok(_)) => {}
            },
        }
    }
    handle.unsubscribe(&queue);
}

/// Serve until `shutdown` resolves, then persist every session.
pub async fn serve(
    listener: TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), Error> {
    let local = listener.local_addr().ok();
    tracing::info!(addr = ?local, "serving");
    let app = router(state.clone());
    let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
    let watcher = {
        let state = state.clone();
        tokio::spawn(async move {
            shutdown.await;
            // close streams first so graceful shutdown is not held open by websockets
            state.close_streams();
            let _ = stop_tx.send(());
        })
    };
    axum::serve(listener, app)
        .with_graceful_shutdown(async move {
            let _ = stop_rx.await;
        })
        .await
        .map_err(|e| Error::io(local.map(|a| a.to_string()).unwrap_or_default(), e))?;
    watcher.abort();
    state.shutdown().await
}

impl AppState {
    fn close_streams(&self) {
        for handle in self.0.sessions.read().unwrap().values() {
            for q in handle.subscribers.lock().unwrap().iter() {
                q.close();
            }
        }
    }
}
