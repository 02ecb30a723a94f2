//! The typed literature graph: papers, relationships, annotations, clusters.
//!
//! A [`GraphDocument`] is a plain value. All mutation goes through the
//! methods here so that every document built this way passes [`GraphDocument::validate`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::{self, LayoutState, Vec3};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PaperId(String);

impl PaperId {
    pub fn new(value: impl Into<String>) -> Self {
        PaperId(value.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.trim().is_empty()
    }
}

impl fmt::Display for PaperId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::borrow::Borrow<str> for PaperId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl From<&str> for PaperId {
    fn from(s: &str) -> Self {
        PaperId(s.to_string())
    }
}

impl From<String> for PaperId {
    fn from(s: String) -> Self {
        PaperId(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Author {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperNode {
    pub id: PaperId,
    pub title: String,
    #[serde(default)]
    pub authors: Vec<Author>,
    #[serde(rename = "abstract", default)]
    pub abstract_text: Option<String>,
    #[serde(default)]
    pub year: Option<i32>,
    #[serde(default)]
    pub venue: Option<String>,
    #[serde(default)]
    pub citation_count: Option<u64>,
    #[serde(default)]
    pub external_ids: BTreeMap<String, String>,
    #[serde(default)]
    pub is_seed: bool,
}

impl PaperNode {
    pub fn new(id: impl Into<PaperId>, title: impl Into<String>) -> Self {
        PaperNode {
            id: id.into(),
            title: title.into(),
            authors: Vec::new(),
            abstract_text: None,
            year: None,
            venue: None,
            citation_count: None,
            external_ids: BTreeMap::new(),
            is_seed: false,
        }
    }

    /// Title and abstract joined, the text used for content analysis.
    pub fn content_text(&self) -> String {
        match &self.abstract_text {
            Some(a) if !a.trim().is_empty() => format!("{} {}", self.title, a),
            _ => self.title.clone(),
        }
    }

    pub fn has_author(&self, author_id: &str) -> bool {
        self.authors.iter().any(|a| a.author_id.as_deref() == Some(author_id))
    }

    fn check(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::Validation("paper id is empty".into()));
        }
        if self.title.trim().is_empty() {
            return Err(Error::Validation(format!("paper {} has an empty title", self.id)));
        }
        Ok(())
    }

    /// Fill absent optional fields from `other`. Returns whether anything changed.
    fn enrich_from(&mut self, other: &PaperNode) -> bool {
        let mut changed = false;
        fn fill<T: Clone>(slot: &mut Option<T>, from: &Option<T>, changed: &mut bool) {
            if slot.is_none() && from.is_some() {
                *slot = from.clone();
                *changed = true;
            }
        }
        fill(&mut self.abstract_text, &other.abstract_text, &mut changed);
        fill(&mut self.year, &other.year, &mut changed);
        fill(&mut self.venue, &other.venue, &mut changed);
        fill(&mut self.citation_count, &other.citation_count, &mut changed);
        if self.authors.is_empty() && !other.authors.is_empty() {
            self.authors = other.authors.clone();
            changed = true;
        }
        for (scheme, value) in &other.external_ids {
            if !self.external_ids.contains_key(scheme) {
                self.external_ids.insert(scheme.clone(), value.clone());
                changed = true;
            }
        }
        changed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Thematic,
    Citation,
    Authorship,
    Custom,
}

impl EdgeKind {
    pub const ALL: [EdgeKind; 4] =
        [EdgeKind::Thematic, EdgeKind::Citation, EdgeKind::Authorship, EdgeKind::Custom];

    /// Canonical display color name.
    pub fn color(self) -> &'static str {
        match self {
            EdgeKind::Thematic => "white",
            EdgeKind::Citation => "magenta",
            EdgeKind::Authorship => "yellow",
            EdgeKind::Custom => "green",
        }
    }

    pub fn is_directed(self) -> bool {
        self == EdgeKind::Citation
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ProviderRecommendation,
    CitationGraph,
    AuthorGraph,
    UserCreated,
}

/// A relationship between two papers. Citation edges read "source cites target".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypedEdge {
    pub source: PaperId,
    pub target: PaperId,
    pub kind: EdgeKind,
    pub weight: f64,
    pub provenance: Provenance,
}

impl TypedEdge {
    pub fn new(
        source: impl Into<PaperId>,
        target: impl Into<PaperId>,
        kind: EdgeKind,
        weight: f64,
        provenance: Provenance,
    ) -> Self {
        TypedEdge { source: source.into(), target: target.into(), kind, weight, provenance }
    }

    pub fn color(&self) -> &'static str {
        self.kind.color()
    }

    pub fn touches(&self, id: &PaperId) -> bool {
        &self.source == id || &self.target == id
    }

    /// Identity for the per-(unordered pair, kind) uniqueness rule.
    pub fn key(&self) -> (PaperId, PaperId, EdgeKind) {
        if self.source <= self.target {
            (self.source.clone(), self.target.clone(), self.kind)
        } else {
            (self.target.clone(), self.source.clone(), self.kind)
        }
    }

    fn same_key(&self, other: &TypedEdge) -> bool {
        self.kind == other.kind
            && ((self.source == other.source && self.target == other.target)
                || (self.source == other.target && self.target == other.source))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub id: String,
    pub paper_id: PaperId,
    pub text: String,
    /// UTC milliseconds.
    pub created_at: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub cluster_id: u32,
    pub label: String,
    pub member_ids: Vec<PaperId>,
    pub anchor: Vec3,
}

/// What a mutation did to the document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "change", rename_all = "snake_case")]
pub enum ChangeReport {
    Inserted,
    AlreadyPresent,
    Enriched,
    Merged,
    Removed { edges: usize, annotations: usize, clusters_deleted: usize },
    Updated,
}

impl ChangeReport {
    pub fn changed(&self) -> bool {
        !matches!(self, ChangeReport::AlreadyPresent)
    }
}

/// One invariant violation found by [`GraphDocument::validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub subject: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub schema_version: u32,
    #[serde(default)]
    pub topic: Option<String>,
    pub created_at: i64,
    pub updated_at: i64,
    pub nodes: Vec<PaperNode>,
    pub edges: Vec<TypedEdge>,
    pub annotations: Vec<Annotation>,
    pub clusters: Vec<ClusterAssignment>,
    pub layout: LayoutState,
}

impl Default for GraphDocument {
    fn default() -> Self {
        GraphDocument::new(None, 0)
    }
}

impl GraphDocument {
    pub fn new(topic: Option<String>, now: i64) -> Self {
        GraphDocument {
            schema_version: SCHEMA_VERSION,
            topic,
            created_at: now,
            updated_at: now,
            nodes: Vec::new(),
            edges: Vec::new(),
            annotations: Vec::new(),
            clusters: Vec::new(),
            layout: LayoutState::default(),
        }
    }

    pub fn node(&self, id: &PaperId) -> Option<&PaperNode> {
        self.nodes.iter().find(|n| &n.id == id)
    }

    pub fn node_mut(&mut self, id: &PaperId) -> Option<&mut PaperNode> {
        self.nodes.iter_mut().find(|n| &n.id == id)
    }

    pub fn contains(&self, id: &PaperId) -> bool {
        self.node(id).is_some()
    }

    pub fn index_of(&self, id: &PaperId) -> Option<usize> {
        self.nodes.iter().position(|n| &n.id == id)
    }

    pub fn require(&self, id: &PaperId) -> Result<&PaperNode> {
        self.node(id).ok_or_else(|| Error::not_found(id))
    }

    pub fn edge(&self, a: &PaperId, b: &PaperId, kind: EdgeKind) -> Option<&TypedEdge> {
        self.edges.iter().find(|e| {
            e.kind == kind && ((&e.source == a && &e.target == b) || (&e.source == b && &e.target == a))
        })
    }

    pub fn cluster_of(&self, id: &PaperId) -> Option<&ClusterAssignment> {
        self.clusters.iter().find(|c| c.member_ids.contains(id))
    }

    /// Insert a paper, or fill in fields the stored copy lacks.
    ///
    /// New nodes get a deterministic initial position so the layout always
    /// covers every node.
    pub fn add_node(&mut self, node: PaperNode) -> Result<ChangeReport> {
        node.check()?;
        if let Some(existing) = self.node_mut(&node.id) {
            let enriched = existing.enrich_from(&node);
            if !existing.is_seed && node.is_seed {
                existing.is_seed = true;
                return Ok(ChangeReport::Enriched);
            }
            return Ok(if enriched { ChangeReport::Enriched } else { ChangeReport::AlreadyPresent });
        }
        let index = self.nodes.len();
        let pos = layout::initial_position(index, &node.id, self.layout.rng_seed);
        self.layout.positions.insert(node.id.clone(), pos);
        self.layout.velocities.insert(node.id.clone(), [0.0; 3]);
        self.nodes.push(node);
        Ok(ChangeReport::Inserted)
    }

    /// Insert an edge, or raise the stored weight to the max of old and new.
    pub fn add_edge(&mut self, edge: TypedEdge) -> Result<ChangeReport> {
        if edge.source == edge.target {
            return Err(Error::Validation(format!("self-loop on {}", edge.source)));
        }
        if !edge.weight.is_finite() || !(0.0..=1.0).contains(&edge.weight) {
            return Err(Error::Validation(format!(
                "edge {}-{} weight {} outside [0,1]",
                edge.source, edge.target, edge.weight
            )));
        }
        for end in [&edge.source, &edge.target] {
            if !self.contains(end) {
                return Err(Error::Integrity(format!("edge endpoint {end} is not in the document")));
            }
        }
        if let Some(existing) = self.edges.iter_mut().find(|e| e.same_key(&edge)) {
            if edge.weight > existing.weight {
                existing.weight = edge.weight;
                return Ok(ChangeReport::Merged);
            }
            return Ok(ChangeReport::AlreadyPresent);
        }
        self.edges.push(edge);
        Ok(ChangeReport::Inserted)
    }

    pub fn create_custom_link(&mut self, a: &PaperId, b: &PaperId) -> Result<ChangeReport> {
        if a == b {
            return Err(Error::Validation(format!("cannot link {a} to itself")));
        }
        self.add_edge(TypedEdge::new(a.clone(), b.clone(), EdgeKind::Custom, 1.0, Provenance::UserCreated))
    }

    /// Remove a node with its incident edges, annotations, and cluster membership.
    pub fn remove_node(&mut self, id: &PaperId) -> Result<ChangeReport> {
        let index = self.index_of(id).ok_or_else(|| Error::not_found(id))?;
        self.nodes.remove(index);
        let edges_before = self.edges.len();
        self.edges.retain(|e| !e.touches(id));
        let annotations_before = self.annotations.len();
        self.annotations.retain(|a| &a.paper_id != id);
        for cluster in &mut self.clusters {
            cluster.member_ids.retain(|m| m != id);
        }
        let clusters_before = self.clusters.len();
        self.clusters.retain(|c| !c.member_ids.is_empty());
        self.layout.forget(id);
        Ok(ChangeReport::Removed {
            edges: edges_before - self.edges.len(),
            annotations: annotations_before - self.annotations.len(),
            clusters_deleted: clusters_before - self.clusters.len(),
        })
    }

    /// Attach a note to a paper. The id is the next free `ann-N`.
    pub fn annotate(&mut self, paper_id: &PaperId, text: &str, now: i64) -> Result<&Annotation> {
        if text.trim().is_empty() {
            return Err(Error::Validation("annotation text is empty".into()));
        }
        self.require(paper_id)?;
        let next = self
            .annotations
            .iter()
            .filter_map(|a| a.id.strip_prefix("ann-").and_then(|n| n.parse::<u64>().ok()))
            .max()
            .map_or(1, |n| n + 1);
        self.annotations.push(Annotation {
            id: format!("ann-{next}"),
            paper_id: paper_id.clone(),
            text: text.to_string(),
            created_at: now,
        });
        Ok(self.annotations.last().expect("just pushed"))
    }

    /// Replace all cluster assignments.
    pub fn set_clusters(&mut self, clusters: Vec<ClusterAssignment>) -> Result<()> {
        let mut seen = BTreeSet::new();
        for c in &clusters {
            if c.member_ids.is_empty() || c.label.trim().is_empty() {
                return Err(Error::Validation(format!("cluster {} is empty or unlabeled", c.cluster_id)));
            }
            for m in &c.member_ids {
                self.require(m)?;
                if !seen.insert(m) {
                    return Err(Error::Validation(format!("{m} assigned to two clusters")));
                }
            }
        }
        self.clusters = clusters;
        Ok(())
    }

    pub fn degree(&self, id: &PaperId) -> usize {
        self.edges.iter().filter(|e| e.touches(id)).count()
    }

    /// Every invariant violation; empty iff the document is well-formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |subject: String, message: &str| {
            out.push(Violation { subject, message: message.to_string() })
        };

        if self.schema_version != SCHEMA_VERSION {
            push("document".into(), "schema_version does not match writer version");
        }

        let mut ids = BTreeSet::new();
        for n in &self.nodes {
            let subject = format!("node {}", n.id);
            if n.id.is_empty() {
                push(subject.clone(), "empty id");
            }
            if n.title.trim().is_empty() {
                push(subject.clone(), "empty title");
            }
            if !ids.insert(&n.id) {
                push(subject, "duplicate id");
            }
        }

        let mut edge_keys = BTreeSet::new();
        for e in &self.edges {
            let subject = format!("edge {}->{} ({:?})", e.source, e.target, e.kind);
            if e.source == e.target {
                push(subject.clone(), "self-loop");
            }
            if !ids.contains(&e.source) || !ids.contains(&e.target) {
                push(subject.clone(), "endpoint missing from document");
            }
            if !e.weight.is_finite() || !(0.0..=1.0).contains(&e.weight) {
                push(subject.clone(), "weight outside [0,1]");
            }
            if !edge_keys.insert(e.key()) {
                push(subject, "duplicate edge for pair and kind");
            }
        }

        let mut ann_ids = BTreeSet::new();
        for a in &self.annotations {
            let subject = format!("annotation {}", a.id);
            if !ids.contains(&a.paper_id) {
                push(subject.clone(), "paper missing from document");
            }
            if a.text.trim().is_empty() {
                push(subject.clone(), "empty text");
            }
            if !ann_ids.insert(&a.id) {
                push(subject, "duplicate annotation id");
            }
        }

        let mut members = BTreeMap::new();
        for c in &self.clusters {
            let subject = format!("cluster {}", c.cluster_id);
            if c.member_ids.is_empty() {
                push(subject.clone(), "no members");
            }
            if c.label.trim().is_empty() {
                push(subject.clone(), "empty label");
            }
            if c.anchor.iter().any(|v| !v.is_finite()) {
                push(subject.clone(), "non-finite anchor");
            }
            for m in &c.member_ids {
                if !ids.contains(m) {
                    push(subject.clone(), "member missing from document");
                }
                if let Some(prev) = members.insert(m, c.cluster_id) {
                    push(format!("node {m}"), &format!("in clusters {prev} and {}", c.cluster_id));
                }
            }
        }

        for v in self.layout.violations(&ids) {
            out.push(v);
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }
}
