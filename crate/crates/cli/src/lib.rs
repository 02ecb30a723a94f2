//! The `forage` command line: one logged command per invocation against a
//! session directory, plus plotting, replay verification and serving.

pub mod diff;
pub mod plot;

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use litforage_core::provider::Corpus;
use litforage_core::session::replay;
use litforage_core::{
    Command, Engine, Error, ExpansionMode, ExpansionRequest, GraphDocument, InsightEngine, InsightKind,
    InsightProviderConfig, MetadataClient, Modality, PaperId, ProviderConfig, RankStrategy, Result, Session,
    SessionDir,
};
use litforage_service::{AppState, ServiceConfig};

/// Upper bound on ticks run after a command; enough to cool from alpha 1.
pub const SETTLE_TICKS: usize = 300;

#[derive(Debug, Parser)]
#[command(name = "forage", version, about = "Grow and explore a literature graph from the command line")]
pub struct Cli {
    /// Answer provider requests from this fixture directory; no network access.
    #[arg(long, global = true, value_name = "DIR")]
    pub fixtures: Option<PathBuf>,
    /// Live-mode provider request rate.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub rps: f64,
    /// Use the remote LLM for insights and cluster labels (needs GEMINI_API_KEY).
    #[arg(long, global = true, value_name = "MODEL")]
    pub llm_model: Option<String>,
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Start a new session from seed papers and lay it out.
    Seed {
        /// Session directory to create.
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long)]
        topic: Option<String>,
        #[arg(long, default_value_t = 0)]
        layout_seed: u64,
        #[arg(required = true, value_name = "PAPER_ID")]
        ids: Vec<String>,
    },
    /// Add related papers to the graph.
    Expand {
        session: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// Anchor paper(s), comma separated. Citation, reference and author modes take one.
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<String>,
        #[arg(long)]
        author_id: Option<String>,
        #[arg(long, default_value_t = litforage_core::expand::DEFAULT_K)]
        k: usize,
        #[arg(long, value_enum, default_value_t = RankArg::ProviderOrder)]
        rank: RankArg,
    },
    /// Partition the graph into labelled clusters.
    Cluster {
        session: PathBuf,
        /// Cluster count; chosen automatically when omitted.
        #[arg(long)]
        k: Option<usize>,
    },
    Annotate { session: PathBuf, id: String, text: String },
    /// Draw a custom link between two papers.
    Link { session: PathBuf, a: String, b: String },
    Remove { session: PathBuf, id: String },
    Pin(PlaceArgs),
    Unpin { session: PathBuf, id: String },
    Move(PlaceArgs),
    /// Summary or keywords for one paper.
    Insights {
        session: PathBuf,
        id: String,
        #[arg(long, value_enum, default_value_t = InsightArg::Tldr)]
        kind: InsightArg,
        #[arg(long, default_value_t = litforage_core::engine::DEFAULT_KEYWORDS)]
        k: usize,
    },
    #[command(subcommand)]
    Plot(PlotCmd),
    /// Rebuild a session from its log and compare with the saved document.
    Replay { session: PathBuf },
    /// Serve a session over HTTP and WebSocket until interrupted.
    Serve {
        session: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
        #[arg(long, default_value_t = litforage_service::DEFAULT_TICKS_PER_BROADCAST)]
        ticks_per_broadcast: usize,
        #[arg(long, default_value_t = litforage_service::DEFAULT_MAX_BROADCASTS_PER_SEC)]
        max_rate: u32,
    },
    #[command(subcommand)]
    Fixtures(FixturesCmd),
}

#[derive(Debug, Args)]
pub struct PlaceArgs {
    pub session: PathBuf,
    pub id: String,
    /// Target position as x,y,z.
    #[arg(long, value_delimiter = ',', num_args = 1, allow_hyphen_values = true, required = true)]
    pub pos: Vec<f64>,
}

#[derive(Debug, Subcommand)]
pub enum PlotCmd {
    /// Top-down view of a layout snapshot.
    Birdseye {
        session: PathBuf,
        /// Snapshot timestamp; the latest when omitted.
        #[arg(long)]
        snapshot: Option<i64>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Feature usage over time, one strip per feature.
    Usage {
        session: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum FixturesCmd {
    /// Write provider fixtures for a corpus (the bundled one by default).
    Export {
        out: PathBuf,
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Thematic,
    Citations,
    References,
    Author,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RankArg {
    ProviderOrder,
    Similarity,
    CitationCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InsightArg {
    Tldr,
    Keywords,
}

pub fn now_ms() -> i64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as i64)
}

impl Cli {
    fn provider(&self, dir: Option<&SessionDir>) -> ProviderConfig {
        let mut config = match &self.fixtures {
            Some(d) => ProviderConfig::fixtures(d),
            None => ProviderConfig { requests_per_second: self.rps, ..ProviderConfig::live_from_env() },
        };
        if let Some(dir) = dir {
            config.record_path = Some(dir.fixtures_dir());
        }
        config
    }

    fn insights(&self) -> Result<InsightEngine> {
        match &self.llm_model {
            Some(model) => InsightEngine::new(InsightProviderConfig::remote(model)),
            None => Ok(InsightEngine::stub()),
        }
    }

    fn engine(&self, dir: &SessionDir) -> Result<Engine> {
        let mut engine = Engine::new(Arc::new(MetadataClient::new(self.provider(Some(dir)))?));
        engine.insights = Arc::new(self.insights()?);
        Ok(engine)
    }
}

fn position(pos: &[f64]) -> Result<[f64; 3]> {
    match pos {
        [x, y, z] => Ok([*x, *y, *z]),
        _ => Err(Error::Validation(format!("--pos needs three comma-separated numbers, got {}", pos.len()))),
    }
}

fn session_command(cmd: &Cmd) -> Result<Option<(&Path, Command)>> {
    let id = |s: &str| PaperId::from(s);
    Ok(Some(match cmd {
        Cmd::Expand { session, mode, seeds, author_id, k, rank } => {
            let mode = match mode {
                ModeArg::Thematic => ExpansionMode::Thematic,
                ModeArg::Citations => ExpansionMode::CitationsForward,
                ModeArg::References => ExpansionMode::ReferencesBackward,
                ModeArg::Author => ExpansionMode::Author,
            };
            let ranking = match rank {
                RankArg::ProviderOrder => RankStrategy::ProviderOrder,
                RankArg::Similarity => RankStrategy::Similarity,
                RankArg::CitationCount => RankStrategy::CitationCount,
            };
            let req = ExpansionRequest {
                mode,
                seeds: seeds.iter().map(|s| id(s)).collect(),
                author_id: author_id.clone(),
                k: *k,
                ranking,
            };
            (session.as_path(), Command::Expand(req))
        }
        Cmd::Cluster { session, k } => (session.as_path(), Command::Cluster { k: *k }),
        Cmd::Annotate { session, id: p, text } => (session.as_path(), Command::Annotate { id: id(p), text: text.clone() }),
        Cmd::Link { session, a, b } => (session.as_path(), Command::Link { a: id(a), b: id(b) }),
        Cmd::Remove { session, id: p } => (session.as_path(), Command::Remove { id: id(p) }),
        Cmd::Pin(a) => (a.session.as_path(), Command::Pin { id: id(&a.id), pos: position(&a.pos)? }),
        Cmd::Move(a) => (a.session.as_path(), Command::Move { id: id(&a.id), pos: position(&a.pos)? }),
        Cmd::Unpin { session, id: p } => (session.as_path(), Command::Unpin { id: id(p) }),
        Cmd::Insights { session, id: p, kind, k } => {
            let kind = match kind {
                InsightArg::Tldr => InsightKind::Tldr,
                InsightArg::Keywords => InsightKind::Keywords,
            };
            (session.as_path(), Command::Insights { id: id(p), kind, k: *k })
        }
        _ => return Ok(None),
    }))
}

fn print_json(out: &mut dyn Write, value: &serde_json::Value) -> Result<()> {
    writeln!(out, "{}", serde_json::to_string_pretty(value).expect("json value serializes"))
        .map_err(|e| Error::io("<stdout>", e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Run one invocation. Returns the process exit status for outcomes that
/// are not errors but still nonzero (a replay mismatch).
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    if let Some((dir, command)) = session_command(&cli.command)? {
        let dir = SessionDir::new(dir);
        let engine = cli.engine(&dir)?;
        let mut session = Session::open(dir)?;
        let (outcome, event) = session.apply_settled(&engine, Modality::Api, &command, now_ms(), SETTLE_TICKS)?;
        session.save()?;
        if command.is_mutating() {
            session.maybe_snapshot(event.ts, true)?;
        }
        print_json(out, &outcome.result)?;
        return Ok(0);
    }
    match &cli.command {
        Cmd::Seed { out: root, topic, layout_seed, ids } => {
            let mut seen = BTreeSet::new();
            let mut unique = Vec::new();
            for id in ids {
                if seen.insert(id.as_str()) {
                    unique.push(PaperId::from(id.as_str()));
                } else {
                    let _ = writeln!(err, "warning: duplicate seed {id} ignored");
                }
            }
            seed(cli, root, unique, topic.clone(), *layout_seed, out)?;
            Ok(0)
        }
        Cmd::Plot(PlotCmd::Birdseye { session, snapshot, out: path }) => {
            let dir = SessionDir::new(session);
            let snap = match snapshot {
                Some(ts) => dir.load_snapshot(*ts)?,
                None => dir.latest_snapshot()?,
            };
            write_file(path, &plot::birdseye_svg(&snap.document))?;
            let _ = writeln!(out, "wrote {} (snapshot {})", path.display(), snap.ts);
            Ok(0)
        }
        Cmd::Plot(PlotCmd::Usage { session, out: path }) => {
            let events = SessionDir::new(session).events()?;
            write_file(path, &plot::usage_svg(&events))?;
            let _ = writeln!(out, "wrote {} ({} events)", path.display(), events.len());
            Ok(0)
        }
        Cmd::Replay { session } => {
            let dir = SessionDir::new(session);
            let recorded = dir.load_document()?;
            let events = dir.events()?;
            let config = ProviderConfig::fixtures(cli.fixtures.clone().unwrap_or_else(|| dir.fixtures_dir()));
            let mut engine = Engine::new(Arc::new(MetadataClient::new(config)?));
            engine.insights = Arc::new(cli.insights()?);
            let replayed = replay(GraphDocument::default(), &events, &engine)?;
            let d = diff::diff(&recorded, &replayed);
            write!(out, "{}", d.report()).map_err(|e| Error::io("<stdout>", e))?;
            Ok(if d.is_empty() { 0 } else { 5 })
        }
        Cmd::Serve { session, bind, ticks_per_broadcast, max_rate } => {
            serve(cli, session, bind, *ticks_per_broadcast, *max_rate, out)?;
            Ok(0)
        }
        Cmd::Fixtures(FixturesCmd::Export { out: dir, corpus }) => {
            let corpus = match corpus {
                Some(p) => Corpus::from_path(p)?,
                None => Corpus::bundled(),
            };
            let n = corpus.write_fixtures(dir)?;
            let _ = writeln!(out, "wrote {n} fixtures to {}", dir.display());
            Ok(0)
        }
        _ => unreachable!("session commands handled above"),
    }
}

fn seed(
    cli: &Cli,
    root: &Path,
    ids: Vec<PaperId>,
    topic: Option<String>,
    layout_seed: u64,
    out: &mut dyn Write,
) -> Result<()> {
    let existed = root.exists();
    let dir = SessionDir::new(root);
    let id = root.file_name().map_or_else(|| "session".to_string(), |n| n.to_string_lossy().into_owned());
    let attempt = || -> Result<serde_json::Value> {
        let mut session = Session::create(&id, dir.clone())?;
        let engine = cli.engine(&dir)?;
        let command = Command::Seed { ids, topic, layout_seed };
        let (outcome, event) = session.apply_settled(&engine, Modality::Api, &command, now_ms(), SETTLE_TICKS)?;
        session.save()?;
        session.maybe_snapshot(event.ts, true)?;
        Ok(outcome.result)
    };
    match attempt() {
        Ok(result) => print_json(out, &result),
        Err(e) => {
            if !existed {
                let _ = std::fs::remove_dir_all(root);
            }
            Err(e)
        }
    }
}

fn serve(
    cli: &Cli,
    session: &Path,
    bind: &str,
    ticks_per_broadcast: usize,
    max_rate: u32,
    out: &mut dyn Write,
) -> Result<()> {
    let dir = SessionDir::new(session);
    let opened = Session::open(dir.clone())?;
    let mut config = ServiceConfig::new(cli.provider(None));
    config.ticks_per_broadcast = ticks_per_broadcast.max(1);
    config.max_broadcasts_per_sec = max_rate.max(1);
    let insights = cli.insights()?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::io("<runtime>", e))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(bind).await.map_err(|e| Error::io(bind, e))?;
        let addr = listener.local_addr().map_err(|e| Error::io(bind, e))?;
        let state = AppState::new(config).with_insights(insights);
        let engine = state.engine_for_dir(&dir)?;
        let handle = state.adopt(opened, engine);
        let _ = writeln!(out, "listening on {addr}");
        let _ = writeln!(out, "session {}", handle.id);
        let _ = out.flush();
        litforage_service::serve(listener, state, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
    })
}
