//! Content analysis: summaries, keywords, embeddings, and thematic clustering.
//!
//! The deterministic stub needs no credentials and is the default. The
//! remote path sends versioned prompt templates to a completion endpoint and
//! falls back to the stub whenever a call fails.

pub mod kmeans;
pub mod remote;
pub mod text;

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ClusterAssignment, GraphDocument, PaperId, PaperNode};
use crate::layout::Vec3;
use crate::transport::UreqTransport;
use remote::{CompletionBackend, GeminiBackend};
pub use text::{embed, top_terms, Embedding, EMBEDDING_DIM};

pub const SUMMARY_MAX_CHARS: usize = 200;
pub const ANCHOR_RADIUS: f64 = 150.0;
pub const AUTO_K_MAX: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InsightProviderKind {
    RemoteLlm,
    DeterministicStub,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsightProviderConfig {
    pub kind: InsightProviderKind,
    pub model_name: String,
    pub timeout_secs: u64,
}

impl Default for InsightProviderConfig {
    fn default() -> Self {
        InsightProviderConfig {
            kind: InsightProviderKind::DeterministicStub,
            model_name: "stub".into(),
            timeout_secs: 30,
        }
    }
}

impl InsightProviderConfig {
    pub fn remote(model_name: &str) -> Self {
        InsightProviderConfig { kind: InsightProviderKind::RemoteLlm, model_name: model_name.into(), timeout_secs: 30 }
    }
}

/// A computed insight plus how it was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Insight<T> {
    pub value: T,
    pub cached: bool,
    /// Set when the remote provider failed and the stub answered instead.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback_reason: Option<String>,
}

impl<T> Insight<T> {
    pub fn stub_fallback(&self) -> bool {
        self.fallback_reason.is_some()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct InsightStats {
    /// Stub computations plus remote attempts.
    pub provider_calls: u64,
    pub cache_hits: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Op {
    Tldr,
    Keywords(usize),
}

#[derive(Debug, Clone)]
enum Cached {
    Text(String),
    List(Vec<String>),
}

pub struct InsightEngine {
    config: InsightProviderConfig,
    backend: Option<Arc<dyn CompletionBackend>>,
    cache: Mutex<HashMap<(PaperId, InsightProviderKind, Op), Cached>>,
    stats: Mutex<InsightStats>,
}

impl Default for InsightEngine {
    fn default() -> Self {
        InsightEngine::stub()
    }
}

impl InsightEngine {
    pub fn stub() -> Self {
        InsightEngine::with_backend(InsightProviderConfig::default(), None)
    }

    /// Build from config; the remote kind reads its key from the environment.
    pub fn new(config: InsightProviderConfig) -> Result<Self> {
        match config.kind {
            InsightProviderKind::DeterministicStub => Ok(InsightEngine::with_backend(config, None)),
            InsightProviderKind::RemoteLlm => {
                let key = std::env::var(remote::API_KEY_ENV).map_err(|_| {
                    Error::Validation(format!("remote insight provider needs {}", remote::API_KEY_ENV))
                })?;
                let transport = Arc::new(UreqTransport::new(Duration::from_secs(config.timeout_secs.max(1))));
                let backend = GeminiBackend::new(transport, remote::DEFAULT_ENDPOINT, &config.model_name, &key);
                Ok(InsightEngine::with_backend(config, Some(Arc::new(backend))))
            }
        }
    }

    pub fn with_backend(config: InsightProviderConfig, backend: Option<Arc<dyn CompletionBackend>>) -> Self {
        InsightEngine { config, backend, cache: Mutex::new(HashMap::new()), stats: Mutex::new(InsightStats::default()) }
    }

    pub fn config(&self) -> &InsightProviderConfig {
        &self.config
    }

    pub fn stats(&self) -> InsightStats {
        *self.stats.lock().unwrap()
    }

    fn remote(&self) -> Option<&Arc<dyn CompletionBackend>> {
        match self.config.kind {
            InsightProviderKind::RemoteLlm => self.backend.as_ref(),
            InsightProviderKind::DeterministicStub => None,
        }
    }

    fn lookup(&self, paper: &PaperId, op: &Op) -> Option<Cached> {
        let hit = self.cache.lock().unwrap().get(&(paper.clone(), self.config.kind, op.clone())).cloned();
        if hit.is_some() {
            self.stats.lock().unwrap().cache_hits += 1;
        }
        hit
    }

    fn store(&self, paper: &PaperId, op: Op, value: Cached) {
        self.cache.lock().unwrap().insert((paper.clone(), self.config.kind, op), value);
    }

    fn count_call(&self) {
        self.stats.lock().unwrap().provider_calls += 1;
    }

    /// TLDR for one paper, cached per paper and provider kind.
    pub fn summarize(&self, paper: &PaperNode) -> Insight<String> {
        if let Some(Cached::Text(t)) = self.lookup(&paper.id, &Op::Tldr) {
            return Insight { value: t, cached: true, fallback_reason: None };
        }
        self.count_call();
        let mut fallback_reason = None;
        if let Some(backend) = self.remote() {
            let prompt = remote::render(
                remote::TLDR_PROMPT,
                &[("title", &paper.title), ("abstract", paper.abstract_text.as_deref().unwrap_or(""))],
            );
            match backend.complete(&prompt) {
                Ok(text) => {
                    self.store(&paper.id, Op::Tldr, Cached::Text(text.clone()));
                    return Insight { value: text, cached: false, fallback_reason: None };
                }
                Err(e) => fallback_reason = Some(e),
            }
        }
        let value = stub_summary(paper);
        if fallback_reason.is_none() {
            self.store(&paper.id, Op::Tldr, Cached::Text(value.clone()));
        }
        Insight { value, cached: false, fallback_reason }
    }

    pub fn extract_keywords(&self, paper: &PaperNode, k: usize) -> Result<Insight<Vec<String>>> {
        if k == 0 {
            return Err(Error::Validation("keyword count must be at least 1".into()));
        }
        if let Some(Cached::List(l)) = self.lookup(&paper.id, &Op::Keywords(k)) {
            return Ok(Insight { value: l, cached: true, fallback_reason: None });
        }
        self.count_call();
        let mut fallback_reason = None;
        if let Some(backend) = self.remote() {
            let ks = k.to_string();
            let prompt = remote::render(
                remote::KEYWORDS_PROMPT,
                &[("k", &ks), ("title", &paper.title), ("abstract", paper.abstract_text.as_deref().unwrap_or(""))],
            );
            match backend.complete(&prompt) {
                Ok(text) => {
                    let list = remote::parse_keyword_list(&text, k);
                    self.store(&paper.id, Op::Keywords(k), Cached::List(list.clone()));
                    return Ok(Insight { value: list, cached: false, fallback_reason: None });
                }
                Err(e) => fallback_reason = Some(e),
            }
        }
        let value = top_terms(&paper.content_text(), k);
        if fallback_reason.is_none() {
            self.store(&paper.id, Op::Keywords(k), Cached::List(value.clone()));
        }
        Ok(Insight { value, cached: false, fallback_reason })
    }

    /// Partition the whole document into labeled clusters with anchors.
    /// The document is not modified.
    pub fn cluster(&self, doc: &GraphDocument, k: Option<usize>) -> Result<Vec<ClusterAssignment>> {
        let n = doc.nodes.len();
        if n == 0 {
            return Err(Error::Validation("cannot cluster an empty document".into()));
        }
        if let Some(k) = k {
            if k == 0 || k > n {
                return Err(Error::Validation(format!("cluster count {k} outside 1..={n}")));
            }
        }
        let points: Vec<Vec<f64>> = doc.nodes.iter().map(|p| embed(&p.content_text()).vector).collect();
        let seed = doc.layout.rng_seed;
        let partition = match k {
            Some(k) => kmeans::kmeans(&points, k, seed),
            None => kmeans::auto_k(&points, seed),
        };
        let center = centroid(doc);
        let directions = anchor_directions(partition.k);
        let clusters = (0..partition.k)
            .map(|c| {
                let members: Vec<&PaperNode> = partition.members(c).into_iter().map(|i| &doc.nodes[i]).collect();
                let dir = directions[c];
                ClusterAssignment {
                    cluster_id: c as u32,
                    label: self.label(c, &members),
                    member_ids: members.iter().map(|p| p.id.clone()).collect(),
                    anchor: [
                        center[0] + ANCHOR_RADIUS * dir[0],
                        center[1] + ANCHOR_RADIUS * dir[1],
                        center[2] + ANCHOR_RADIUS * dir[2],
                    ],
                }
            })
            .collect();
        Ok(clusters)
    }

    fn label(&self, cluster: usize, members: &[&PaperNode]) -> String {
        if let Some(backend) = self.remote() {
            let titles: Vec<String> = members.iter().map(|p| format!("- {}", p.title)).collect();
            let prompt = remote::render(remote::CLUSTER_LABEL_PROMPT, &[("titles", &titles.join("\n"))]);
            self.count_call();
            if let Ok(text) = backend.complete(&prompt) {
                let line = text.lines().next().unwrap_or("").trim().trim_matches('"').to_string();
                if !line.is_empty() {
                    return line;
                }
            }
        }
        stub_label(cluster, members)
    }
}

/// First sentence of the abstract, at most 200 characters; the title if there is no abstract.
pub fn stub_summary(paper: &PaperNode) -> String {
    let Some(abstract_text) = paper.abstract_text.as_deref().map(str::trim).filter(|a| !a.is_empty()) else {
        return paper.title.clone();
    };
    let chars: Vec<char> = abstract_text.chars().collect();
    let end = (0..chars.len())
        .find(|&i| matches!(chars[i], '.' | '!' | '?') && chars.get(i + 1).is_none_or(|c| c.is_whitespace()))
        .map_or(chars.len(), |i| i + 1);
    chars[..end.min(SUMMARY_MAX_CHARS)].iter().collect::<String>().trim_end().to_string()
}

/// Top-2 title terms of the members, or a numbered fallback.
pub fn stub_label(cluster: usize, members: &[&PaperNode]) -> String {
    let titles: Vec<&str> = members.iter().map(|p| p.title.as_str()).collect();
    let terms = top_terms(&titles.join(" "), 2);
    if terms.is_empty() { format!("Cluster {}", cluster + 1) } else { terms.join(" / ") }
}

fn centroid(doc: &GraphDocument) -> Vec3 {
    let positions: Vec<&Vec3> = doc.nodes.iter().filter_map(|n| doc.layout.positions.get(&n.id)).collect();
    if positions.is_empty() {
        return [0.0; 3];
    }
    let mut c = [0.0; 3];
    for p in &positions {
        for a in 0..3 {
            c[a] += p[a];
        }
    }
    c.map(|x| x / positions.len() as f64)
}

/// Unit directions on a golden-angle spherical spiral, y is the vertical axis.
pub fn anchor_directions(m: usize) -> Vec<Vec3> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..m)
        .map(|j| {
            let y = 1.0 - (2.0 * j as f64 + 1.0) / m as f64;
            let r = (1.0 - y * y).max(0.0).sqrt();
            let phi = golden * j as f64;
            [r * phi.cos(), y, r * phi.sin()]
        })
        .collect()
}
