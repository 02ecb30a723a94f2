//! The command set shared by the service, the CLI, and replay.

use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::expand::{expand, ExpansionMode, ExpansionRequest};
use crate::graph::{GraphDocument, PaperId};
use crate::insight::InsightEngine;
use crate::layout::{ForceConfig, Vec3, DEFAULT_REHEAT};
use crate::provider::{Field, MetadataProvider};
use crate::session::Feature;

pub const DEFAULT_KEYWORDS: usize = 5;

fn default_keywords() -> usize {
    DEFAULT_KEYWORDS
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InsightKind {
    Tldr,
    Keywords,
}

/// One state-changing (or content-analysis) request against a document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Command {
    Seed {
        ids: Vec<PaperId>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        topic: Option<String>,
        #[serde(default)]
        layout_seed: u64,
    },
    Expand(ExpansionRequest),
    Cluster {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        k: Option<usize>,
    },
    Pin { id: PaperId, pos: Vec3 },
    Unpin { id: PaperId },
    Move { id: PaperId, pos: Vec3 },
    Link { a: PaperId, b: PaperId },
    Annotate { id: PaperId, text: String },
    Insights {
        id: PaperId,
        kind: InsightKind,
        #[serde(default = "default_keywords")]
        k: usize,
    },
    Remove { id: PaperId },
    /// Layout-only step; the ticks live in the event payload.
    Layout,
    End,
}

impl Command {
    pub fn feature(&self) -> Feature {
        match self {
            Command::Expand(_) => Feature::Recommendation,
            Command::Cluster { .. } => Feature::Clustering,
            Command::Insights { .. } => Feature::ContentAnalysis,
            Command::Pin { .. } | Command::Unpin { .. } | Command::Move { .. } | Command::Layout => Feature::Spatial,
            Command::Annotate { .. } => Feature::Annotation,
            Command::Link { .. } => Feature::Linking,
            Command::Seed { .. } | Command::Remove { .. } | Command::End => Feature::Navigation,
        }
    }

    pub fn action(&self) -> &'static str {
        match self {
            Command::Seed { .. } => "seed",
            Command::Expand(r) => match r.mode {
                ExpansionMode::Thematic => "expand_thematic",
                ExpansionMode::CitationsForward => "expand_citations",
                ExpansionMode::ReferencesBackward => "expand_references",
                ExpansionMode::Author => "expand_author",
            },
            Command::Cluster { .. } => "cluster",
            Command::Pin { .. } => "pin",
            Command::Unpin { .. } => "unpin",
            Command::Move { .. } => "move",
            Command::Link { .. } => "link",
            Command::Annotate { .. } => "annotate",
            Command::Insights { kind: InsightKind::Tldr, .. } => "tldr",
            Command::Insights { kind: InsightKind::Keywords, .. } => "keywords",
            Command::Remove { .. } => "remove",
            Command::Layout => "layout",
            Command::End => "session_end",
        }
    }

    /// Whether the command can change the document.
    pub fn is_mutating(&self) -> bool {
        !matches!(self, Command::Insights { .. })
    }
}

/// What a command changed, so callers know which frames to emit.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CommandOutcome {
    pub graph_changed: bool,
    pub positions_changed: bool,
    pub clusters_changed: bool,
    pub result: Value,
}

pub struct Engine {
    pub provider: Arc<dyn MetadataProvider>,
    pub insights: Arc<InsightEngine>,
    pub forces: ForceConfig,
}

impl Engine {
    pub fn new(provider: Arc<dyn MetadataProvider>) -> Self {
        Engine { provider, insights: Arc::new(InsightEngine::stub()), forces: ForceConfig::default() }
    }

    /// Execute atomically: on error the document is left as it was.
    pub fn execute(&self, doc: &mut GraphDocument, command: &Command, ts: i64) -> Result<CommandOutcome> {
        let mut work = doc.clone();
        let outcome = self.apply(&mut work, command, ts)?;
        if command.is_mutating() {
            work.updated_at = ts;
        }
        *doc = work;
        Ok(outcome)
    }

    fn apply(&self, doc: &mut GraphDocument, command: &Command, ts: i64) -> Result<CommandOutcome> {
        let mut out = CommandOutcome { result: Value::Null, ..Default::default() };
        match command {
            Command::Seed { ids, topic, layout_seed } => {
                self.seed(doc, ids, topic.clone(), *layout_seed, ts)?;
                out.graph_changed = true;
                out.result = json!({ "seeded": doc.nodes.iter().map(|n| &n.id).collect::<Vec<_>>() });
            }
            Command::Expand(req) => {
                let r = expand(doc, self.provider.as_ref(), req)?;
                out.graph_changed = !r.is_empty();
                out.result = serde_json::to_value(&r).expect("result serializes");
            }
            Command::Cluster { k } => {
                let clusters = self.insights.cluster(doc, *k)?;
                doc.set_clusters(clusters)?;
                doc.layout.reheat(DEFAULT_REHEAT)?;
                out.clusters_changed = true;
                out.result = json!({ "clusters": doc.clusters });
            }
            Command::Pin { id, pos } => {
                doc.layout.pin(id, *pos)?;
                doc.layout.reheat(DEFAULT_REHEAT)?;
                out.positions_changed = true;
            }
            Command::Unpin { id } => {
                doc.layout.unpin(id)?;
                doc.layout.reheat(DEFAULT_REHEAT)?;
                out.positions_changed = true;
            }
            Command::Move { id, pos } => {
                doc.layout.move_to(id, *pos)?;
                doc.layout.reheat(DEFAULT_REHEAT)?;
                out.positions_changed = true;
            }
            Command::Link { a, b } => {
                let change = doc.create_custom_link(a, b)?;
                if change.changed() {
                    doc.layout.reheat(DEFAULT_REHEAT)?;
                    out.graph_changed = true;
                }
                out.result = serde_json::to_value(change).expect("report serializes");
            }
            Command::Annotate { id, text } => {
                let ann = doc.annotate(id, text, ts)?;
                out.result = serde_json::to_value(ann).expect("annotation serializes");
                out.graph_changed = true;
            }
            Command::Insights { id, kind, k } => {
                let node = doc.require(id)?;
                out.result = match kind {
                    InsightKind::Tldr => {
                        let s = self.insights.summarize(node);
                        json!({ "id": id, "kind": kind, "text": s.value, "stub_fallback": s.stub_fallback() })
                    }
                    InsightKind::Keywords => {
                        let s = self.insights.extract_keywords(node, *k)?;
                        json!({ "id": id, "kind": kind, "keywords": s.value, "stub_fallback": s.stub_fallback() })
                    }
                };
            }
            Command::Remove { id } => {
                let report = doc.remove_node(id)?;
                doc.layout.reheat(DEFAULT_REHEAT)?;
                out.graph_changed = true;
                out.result = serde_json::to_value(report).expect("report serializes");
            }
            Command::Layout => out.positions_changed = true,
            Command::End => {}
        }
        Ok(out)
    }

    fn seed(&self, doc: &mut GraphDocument, ids: &[PaperId], topic: Option<String>, layout_seed: u64, ts: i64) -> Result<()> {
        if !doc.nodes.is_empty() {
            return Err(Error::Validation("seeding requires an empty document".into()));
        }
        let mut seen = HashSet::new();
        let unique: Vec<&PaperId> = ids.iter().filter(|id| seen.insert(*id)).collect();
        if unique.is_empty() {
            return Err(Error::Validation("at least one seed id is required".into()));
        }
        let fields = Field::node_fields();
        let mut nodes = Vec::new();
        let mut resolved = HashSet::new();
        for id in unique {
            // a DOI and a provider id may name the same paper
            let mut node = self.provider.get_paper(id, &fields)?.to_node();
            if resolved.insert(node.id.clone()) {
                node.is_seed = true;
                nodes.push(node);
            }
        }
        *doc = GraphDocument::new(topic, ts);
        for node in nodes {
            doc.add_node(node)?;
        }
        doc.init_layout(layout_seed);
        Ok(())
    }

    /// Exactly `n` ticks, regardless of temperature.
    pub fn run_ticks(&self, doc: &mut GraphDocument, n: usize) -> Result<()> {
        for _ in 0..n {
            doc.tick(&self.forces)?;
        }
        Ok(())
    }

    /// Tick until cool or `max_ticks`; returns the ticks executed.
    pub fn settle(&self, doc: &mut GraphDocument, max_ticks: usize) -> Result<usize> {
        doc.run_layout(&self.forces, max_ticks)
    }
}
