//! Session persistence: documents, snapshots, the append-only event log, and replay.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::engine::{Command, CommandOutcome, Engine};
use crate::error::{Error, Result};
use crate::graph::{GraphDocument, SCHEMA_VERSION};

pub const SNAPSHOT_INTERVAL_MS: i64 = 60_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Menu,
    PointerGesture,
    Voice,
    Api,
    System,
}

impl Modality {
    pub const ALL: [Modality; 5] =
        [Modality::Menu, Modality::PointerGesture, Modality::Voice, Modality::Api, Modality::System];

    pub fn name(self) -> &'static str {
        match self {
            Modality::Menu => "menu",
            Modality::PointerGesture => "pointer_gesture",
            Modality::Voice => "voice",
            Modality::Api => "api",
            Modality::System => "system",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Recommendation,
    Clustering,
    ContentAnalysis,
    Spatial,
    Annotation,
    Linking,
    Navigation,
}

impl Feature {
    pub const ALL: [Feature; 7] = [
        Feature::Recommendation,
        Feature::Clustering,
        Feature::ContentAnalysis,
        Feature::Spatial,
        Feature::Annotation,
        Feature::Linking,
        Feature::Navigation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::Recommendation => "recommendation",
            Feature::Clustering => "clustering",
            Feature::ContentAnalysis => "content_analysis",
            Feature::Spatial => "spatial",
            Feature::Annotation => "annotation",
            Feature::Linking => "linking",
            Feature::Navigation => "navigation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionEvent {
    /// UTC milliseconds.
    pub ts: i64,
    pub session_id: String,
    pub modality: Modality,
    pub feature: Feature,
    pub action: String,
    pub payload: Value,
}

/// What replay needs from an event: the command and the layout ticks
/// that ran around it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventPayload {
    pub command: Command,
    #[serde(default)]
    pub ticks_before: usize,
    #[serde(default)]
    pub ticks_after: usize,
}

impl InteractionEvent {
    pub fn for_command(
        ts: i64,
        session_id: &str,
        modality: Modality,
        command: &Command,
        ticks_before: usize,
        ticks_after: usize,
    ) -> Self {
        let payload = EventPayload { command: command.clone(), ticks_before, ticks_after };
        InteractionEvent {
            ts,
            session_id: session_id.to_string(),
            modality,
            feature: command.feature(),
            action: command.action().to_string(),
            payload: serde_json::to_value(payload).expect("payload serializes"),
        }
    }

    pub fn replay_payload(&self) -> Result<EventPayload> {
        serde_json::from_value(self.payload.clone())
            .map_err(|e| Error::Parse { context: format!("payload of {} event", self.action), message: e.to_string() })
    }
}

/// Append-only JSON-lines log, one event per line, written through per append.
pub struct EventLog {
    path: PathBuf,
    file: File,
    last_ts: Option<i64>,
    len: usize,
}

impl EventLog {
    /// Open for appending, creating the file if needed.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let existing = if path.exists() { read_events(&path)? } else { Vec::new() };
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(|e| Error::io(&path, e))?;
        Ok(EventLog { last_ts: existing.last().map(|e| e.ts), len: existing.len(), path, file })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn last_ts(&self) -> Option<i64> {
        self.last_ts
    }

    pub fn append(&mut self, event: &InteractionEvent) -> Result<()> {
        if let Some(last) = self.last_ts {
            if event.ts < last {
                return Err(Error::Ordering { ts: event.ts, last });
            }
        }
        let mut line = serde_json::to_string(event).expect("event serializes");
        line.push('\n');
        self.file.write_all(line.as_bytes()).map_err(|e| Error::io(&self.path, e))?;
        self.file.flush().map_err(|e| Error::io(&self.path, e))?;
        self.last_ts = Some(event.ts);
        self.len += 1;
        Ok(())
    }
}

/// Parse a log file. Blank lines are ignored; errors carry the line number.
pub fn read_events(path: &Path) -> Result<Vec<InteractionEvent>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_events(&text, &path.display().to_string())
}

pub fn parse_events(text: &str, context: &str) -> Result<Vec<InteractionEvent>> {
    let mut events = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let event: InteractionEvent = serde_json::from_str(line)
            .map_err(|e| Error::Parse { context: format!("{context} line {}", i + 1), message: e.to_string() })?;
        events.push(event);
    }
    Ok(events)
}

/// Canonical serialized form: pretty JSON with a trailing newline. Key
/// order is fixed by struct field order and sorted maps.
pub fn to_canonical(doc: &GraphDocument) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("document serializes");
    s.push('\n');
    s
}

pub fn from_canonical(text: &str, context: &str) -> Result<GraphDocument> {
    let parse_err = |e: serde_json::Error| Error::Parse { context: context.to_string(), message: e.to_string() };
    let value: Value = serde_json::from_str(text).map_err(parse_err)?;
    let version = value.get("schema_version").and_then(Value::as_u64).ok_or_else(|| Error::Parse {
        context: context.to_string(),
        message: "missing schema_version".into(),
    })?;
    if version != SCHEMA_VERSION as u64 {
        return Err(Error::Migration { found: version, supported: SCHEMA_VERSION });
    }
    serde_json::from_value(value).map_err(parse_err)
}

fn require_valid(doc: &GraphDocument) -> Result<()> {
    let violations = doc.validate();
    if let Some(first) = violations.first() {
        return Err(Error::Validation(format!("document has {} violation(s), first: {first}", violations.len())));
    }
    Ok(())
}

/// Write via a temporary file and rename so readers never see a partial document.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn save(doc: &GraphDocument, path: &Path) -> Result<()> {
    require_valid(doc)?;
    write_atomic(path, &to_canonical(doc))
}

pub fn load(path: &Path) -> Result<GraphDocument> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_canonical(&text, &path.display().to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub ts: i64,
    pub document: GraphDocument,
}

/// Time-based snapshot cadence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SnapshotPolicy {
    pub interval_ms: i64,
    pub last: Option<i64>,
}

impl Default for SnapshotPolicy {
    fn default() -> Self {
        SnapshotPolicy { interval_ms: SNAPSHOT_INTERVAL_MS, last: None }
    }
}

impl SnapshotPolicy {
    pub fn due(&self, now: i64) -> bool {
        self.last.is_none_or(|last| now - last >= self.interval_ms)
    }

    pub fn mark(&mut self, now: i64) {
        self.last = Some(now);
    }
}

/// On-disk session layout: `session.json`, `events.jsonl`, `snapshots/<ts>.json`, `fixtures/`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionDir {
    root: PathBuf,
}

impl SessionDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        SessionDir { root: root.into() }
    }

    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let dir = SessionDir::new(root);
        for d in [dir.root.clone(), dir.snapshots_dir(), dir.fixtures_dir()] {
            fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        }
        Ok(dir)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn document_path(&self) -> PathBuf {
        self.root.join("session.json")
    }

    pub fn events_path(&self) -> PathBuf {
        self.root.join("events.jsonl")
    }

    pub fn snapshots_dir(&self) -> PathBuf {
        self.root.join("snapshots")
    }

    pub fn fixtures_dir(&self) -> PathBuf {
        self.root.join("fixtures")
    }

    pub fn load_document(&self) -> Result<GraphDocument> {
        load(&self.document_path())
    }

    pub fn save_document(&self, doc: &GraphDocument) -> Result<()> {
        save(doc, &self.document_path())
    }

    pub fn events(&self) -> Result<Vec<InteractionEvent>> {
        let path = self.events_path();
        if !path.exists() {
            return Ok(Vec::new());
        }
        read_events(&path)
    }

    pub fn write_snapshot(&self, doc: &GraphDocument, ts: i64) -> Result<PathBuf> {
        require_valid(doc)?;
        let path = self.snapshots_dir().join(format!("{ts}.json"));
        let mut text = serde_json::to_string_pretty(&Snapshot { ts, document: doc.clone() }).expect("snapshot serializes");
        text.push('\n');
        write_atomic(&path, &text)?;
        Ok(path)
    }

    /// Snapshot timestamps, ascending.
    pub fn snapshot_times(&self) -> Result<Vec<i64>> {
        let dir = self.snapshots_dir();
        if !dir.exists() {
            return Ok(Vec::new());
        }
        let mut times: Vec<i64> = fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|entry| {
                let name = entry.ok()?.file_name().into_string().ok()?;
                name.strip_suffix(".json")?.parse().ok()
            })
            .collect();
        times.sort_unstable();
        Ok(times)
    }

    pub fn load_snapshot(&self, ts: i64) -> Result<Snapshot> {
        let path = self.snapshots_dir().join(format!("{ts}.json"));
        if !path.exists() {
            return Err(Error::NotFound(format!("snapshot {ts}")));
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| Error::Parse { context: path.display().to_string(), message: e.to_string() })?;
        let document = from_canonical(&value["document"].to_string(), &path.display().to_string())?;
        Ok(Snapshot { ts: value["ts"].as_i64().unwrap_or(ts), document })
    }

    pub fn latest_snapshot(&self) -> Result<Snapshot> {
        let ts = *self.snapshot_times()?.last().ok_or_else(|| Error::NotFound("no snapshots in session".into()))?;
        self.load_snapshot(ts)
    }
}

/// Re-execute a log against `initial`. Each event runs its recorded
/// `ticks_before`, its command, then `ticks_after`.
pub fn replay(initial: GraphDocument, events: &[InteractionEvent], engine: &Engine) -> Result<GraphDocument> {
    let mut doc = initial;
    for (index, event) in events.iter().enumerate() {
        let incomplete = |reason: String| Error::ReplayIncomplete { index, action: event.action.clone(), reason };
        let payload = event.replay_payload().map_err(|e| incomplete(e.to_string()))?;
        engine.run_ticks(&mut doc, payload.ticks_before).map_err(|e| incomplete(e.to_string()))?;
        engine.execute(&mut doc, &payload.command, event.ts).map_err(|e| incomplete(e.to_string()))?;
        engine.run_ticks(&mut doc, payload.ticks_after).map_err(|e| incomplete(e.to_string()))?;
    }
    Ok(doc)
}

/// A live, recording session: the document, its log, and the layout ticks
/// run since the last logged event.
pub struct Session {
    pub id: String,
    pub doc: GraphDocument,
    pub dir: Option<SessionDir>,
    log: Option<EventLog>,
    memory_log: Vec<InteractionEvent>,
    pending_ticks: usize,
    pub snapshots: SnapshotPolicy,
}

impl Session {
    /// Session kept in memory only.
    pub fn in_memory(id: &str) -> Self {
        Session {
            id: id.to_string(),
            doc: GraphDocument::default(),
            dir: None,
            log: None,
            memory_log: Vec::new(),
            pending_ticks: 0,
            snapshots: SnapshotPolicy::default(),
        }
    }

    /// New session in `dir`, which must not already hold a document.
    pub fn create(id: &str, dir: SessionDir) -> Result<Self> {
        if dir.document_path().exists() || dir.events_path().exists() {
            return Err(Error::Validation(format!("{} already holds a session", dir.root().display())));
        }
        let dir = SessionDir::create(dir.root())?;
        let log = EventLog::open(dir.events_path())?;
        Ok(Session { log: Some(log), dir: Some(dir), ..Session::in_memory(id) })
    }

    /// Reopen a session directory written earlier.
    pub fn open(dir: SessionDir) -> Result<Self> {
        let doc = dir.load_document()?;
        let events = dir.events()?;
        let id = events.first().map(|e| e.session_id.clone()).unwrap_or_else(|| {
            dir.root().file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "session".into())
        });
        let log = EventLog::open(dir.events_path())?;
        let mut snapshots = SnapshotPolicy::default();
        if let Some(last) = dir.snapshot_times()?.last() {
            snapshots.mark(*last);
        }
        Ok(Session { id, doc, log: Some(log), dir: Some(dir), memory_log: Vec::new(), pending_ticks: 0, snapshots })
    }

    pub fn events(&self) -> Result<Vec<InteractionEvent>> {
        match &self.dir {
            Some(dir) => dir.events(),
            None => Ok(self.memory_log.clone()),
        }
    }

    pub fn event_count(&self) -> usize {
        self.log.as_ref().map_or(self.memory_log.len(), EventLog::len)
    }

    pub fn last_ts(&self) -> Option<i64> {
        match &self.log {
            Some(log) => log.last_ts(),
            None => self.memory_log.last().map(|e| e.ts),
        }
    }

    /// Clamp a wall-clock reading so the log stays ordered.
    pub fn next_ts(&self, now: i64) -> i64 {
        self.last_ts().map_or(now, |last| now.max(last))
    }

    pub fn pending_ticks(&self) -> usize {
        self.pending_ticks
    }

    /// Advance the layout by up to `n` ticks while it is warm. Returns ticks run.
    pub fn step(&mut self, engine: &Engine, n: usize) -> Result<usize> {
        let mut ran = 0;
        while ran < n && !self.doc.layout.is_cool(&engine.forces) {
            self.doc.tick(&engine.forces)?;
            ran += 1;
        }
        self.pending_ticks += ran;
        Ok(ran)
    }

    /// Execute, run `ticks_after` ticks, then log exactly one event.
    /// Nothing is logged when the command fails.
    pub fn apply(
        &mut self,
        engine: &Engine,
        modality: Modality,
        command: &Command,
        ts: i64,
        ticks_after: usize,
    ) -> Result<(CommandOutcome, InteractionEvent)> {
        let ts = self.next_ts(ts);
        let mut work = self.doc.clone();
        let outcome = engine.execute(&mut work, command, ts)?;
        engine.run_ticks(&mut work, ticks_after)?;
        let event = InteractionEvent::for_command(ts, &self.id, modality, command, self.pending_ticks, ticks_after);
        match &mut self.log {
            Some(log) => log.append(&event)?,
            None => self.memory_log.push(event.clone()),
        }
        self.doc = work;
        self.pending_ticks = 0;
        Ok((outcome, event))
    }

    /// Like [`Session::apply`], but lets the layout settle afterwards and
    /// records how many ticks that took.
    pub fn apply_settled(
        &mut self,
        engine: &Engine,
        modality: Modality,
        command: &Command,
        ts: i64,
        max_ticks: usize,
    ) -> Result<(CommandOutcome, InteractionEvent)> {
        let mut probe = self.doc.clone();
        engine.execute(&mut probe, command, self.next_ts(ts))?;
        let ticks = engine.settle(&mut probe, max_ticks)?;
        self.apply(engine, modality, command, ts, ticks)
    }

    pub fn save(&self) -> Result<()> {
        match &self.dir {
            Some(dir) => dir.save_document(&self.doc),
            None => Ok(()),
        }
    }

    /// Snapshot now if the cadence says so, or unconditionally with `force`.
    pub fn maybe_snapshot(&mut self, now: i64, force: bool) -> Result<Option<PathBuf>> {
        if !force && !self.snapshots.due(now) {
            return Ok(None);
        }
        self.snapshots.mark(now);
        match &self.dir {
            Some(dir) => dir.write_snapshot(&self.doc, now).map(Some),
            None => Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Command;

    fn event(ts: i64) -> InteractionEvent {
        InteractionEvent::for_command(ts, "s", Modality::Api, &Command::Layout, 0, 3)
    }

    #[test]
    fn log_round_trip_and_ordering() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.jsonl");
        let mut log = EventLog::open(&path).unwrap();
        log.append(&event(10)).unwrap();
        assert_eq!(read_events(&path).unwrap(), vec![event(10)]);
        assert!(matches!(log.append(&event(9)), Err(Error::Ordering { ts: 9, last: 10 })));
        log.append(&event(10)).unwrap();
        drop(log);
        let reopened = EventLog::open(&path).unwrap();
        assert_eq!((reopened.len(), reopened.last_ts()), (2, Some(10)));
    }

    #[test]
    fn parse_errors_name_the_line() {
        let good = serde_json::to_string(&event(1)).unwrap();
        let bad = good.replace("\"spatial\"", "\"dancing\"");
        let err = parse_events(&format!("{good}\n\n{bad}\n"), "log").unwrap_err();
        match err {
            Error::Parse { context, .. } => assert_eq!(context, "log line 3"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn schema_version_is_checked_first() {
        let mut value = serde_json::to_value(GraphDocument::default()).unwrap();
        value["schema_version"] = 99.into();
        assert!(matches!(from_canonical(&value.to_string(), "x"), Err(Error::Migration { found: 99, .. })));
        assert!(matches!(from_canonical("{\"schema_version\": 1, \"nodes\": [", "x"), Err(Error::Parse { .. })));
    }

    #[test]
    fn snapshot_cadence() {
        let mut policy = SnapshotPolicy::default();
        let mut taken = 0;
        for t in (0..=600_000).step_by(5_000) {
            if policy.due(t) {
                policy.mark(t);
                taken += 1;
            }
        }
        assert!(taken >= 10, "{taken}");
    }
}
