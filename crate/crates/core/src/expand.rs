//! Recommendation-driven growth of the graph: thematic, citation, and author expansions.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeKind, GraphDocument, PaperId, PaperNode, Provenance, TypedEdge};
use crate::insight::{embed, Embedding};
use crate::layout::DEFAULT_REHEAT;
use crate::provider::{MetadataProvider, PaperRecord, PAGE_SIZE};

pub const DEFAULT_K: usize = 5;

fn default_k() -> usize {
    DEFAULT_K
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpansionMode {
    Thematic,
    CitationsForward,
    ReferencesBackward,
    Author,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankStrategy {
    #[default]
    ProviderOrder,
    Similarity,
    CitationCount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionRequest {
    pub mode: ExpansionMode,
    /// Thematic: one or more seeds. Other modes: exactly one paper (the
    /// author's anchor paper in author mode).
    pub seeds: Vec<PaperId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author_id: Option<String>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub ranking: RankStrategy,
}

impl ExpansionRequest {
    pub fn thematic(seeds: &[&str], k: usize) -> Self {
        ExpansionRequest {
            mode: ExpansionMode::Thematic,
            seeds: seeds.iter().map(|s| PaperId::from(*s)).collect(),
            author_id: None,
            k,
            ranking: RankStrategy::ProviderOrder,
        }
    }

    pub fn citations(id: &str, k: usize) -> Self {
        ExpansionRequest { mode: ExpansionMode::CitationsForward, ..Self::thematic(&[id], k) }
    }

    pub fn references(id: &str, k: usize) -> Self {
        ExpansionRequest { mode: ExpansionMode::ReferencesBackward, ..Self::thematic(&[id], k) }
    }

    pub fn author(anchor: &str, author_id: &str, k: usize) -> Self {
        ExpansionRequest {
            mode: ExpansionMode::Author,
            author_id: Some(author_id.to_string()),
            ..Self::thematic(&[anchor], k)
        }
    }

    pub fn ranked(mut self, ranking: RankStrategy) -> Self {
        self.ranking = ranking;
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExpansionResult {
    pub added_nodes: Vec<PaperId>,
    pub added_edges: Vec<TypedEdge>,
    pub skipped_duplicates: usize,
}

impl ExpansionResult {
    pub fn is_empty(&self) -> bool {
        self.added_nodes.is_empty() && self.added_edges.is_empty()
    }
}

/// Order candidates by `strategy`. The sort is stable and ties fall back to
/// the paper id; provider order ranks by position, so it never ties.
pub fn rank_candidates(candidates: Vec<PaperRecord>, seeds: &[&PaperNode], strategy: RankStrategy) -> Vec<PaperRecord> {
    let mut keyed: Vec<(f64, PaperRecord)> = match strategy {
        RankStrategy::ProviderOrder => return candidates,
        RankStrategy::CitationCount => {
            candidates.into_iter().map(|c| (c.citation_count.unwrap_or(0) as f64, c)).collect()
        }
        RankStrategy::Similarity => {
            let seed_vecs: Vec<Embedding> = seeds.iter().map(|s| embed(&s.content_text())).collect();
            candidates
                .into_iter()
                .map(|c| {
                    let e = embed(&c.content_text());
                    let mean = if seed_vecs.is_empty() {
                        0.0
                    } else {
                        seed_vecs.iter().map(|s| s.cosine(&e)).sum::<f64>() / seed_vecs.len() as f64
                    };
                    (mean, c)
                })
                .collect()
        }
    };
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.id.cmp(&b.1.id)));
    keyed.into_iter().map(|(_, c)| c).collect()
}

fn fetch_limit(k: usize, extra: usize, strategy: RankStrategy) -> usize {
    match strategy {
        RankStrategy::ProviderOrder => k + extra,
        _ => PAGE_SIZE.max(k + extra),
    }
}

fn single_seed(req: &ExpansionRequest) -> Result<&PaperId> {
    match req.seeds.as_slice() {
        [id] => Ok(id),
        _ => Err(Error::Validation(format!("{:?} expansion takes exactly one paper", req.mode))),
    }
}

/// Run one expansion. Provider calls happen before any mutation, so a
/// provider failure leaves the document untouched.
pub fn expand(doc: &mut GraphDocument, provider: &dyn MetadataProvider, req: &ExpansionRequest) -> Result<ExpansionResult> {
    let result = match req.mode {
        ExpansionMode::Thematic => expand_thematic(doc, provider, &req.seeds, req.k, req.ranking)?,
        ExpansionMode::CitationsForward => {
            expand_citations(doc, provider, single_seed(req)?, Direction::Forward, req.k, req.ranking)?
        }
        ExpansionMode::ReferencesBackward => {
            expand_citations(doc, provider, single_seed(req)?, Direction::Backward, req.k, req.ranking)?
        }
        ExpansionMode::Author => {
            let author = req
                .author_id
                .as_deref()
                .ok_or_else(|| Error::Validation("author expansion needs an author_id".into()))?;
            expand_author(doc, provider, single_seed(req)?, author, req.k, req.ranking)?
        }
    };
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Papers citing the anchor.
    Forward,
    /// Papers the anchor cites.
    Backward,
}

struct Merge<'a> {
    doc: &'a mut GraphDocument,
    result: ExpansionResult,
}

impl Merge<'_> {
    fn node(&mut self, record: &PaperRecord) -> Result<()> {
        if self.doc.contains(&record.id) {
            self.result.skipped_duplicates += 1;
        } else {
            self.doc.add_node(record.to_node())?;
            self.result.added_nodes.push(record.id.clone());
        }
        Ok(())
    }

    fn edge(&mut self, edge: TypedEdge) -> Result<()> {
        if self.doc.add_edge(edge.clone())?.changed() {
            self.result.added_edges.push(edge);
        }
        Ok(())
    }

    fn finish(self) -> Result<ExpansionResult> {
        if !self.result.is_empty() {
            self.doc.layout.reheat(DEFAULT_REHEAT)?;
        }
        Ok(self.result)
    }
}

pub fn expand_thematic(
    doc: &mut GraphDocument,
    provider: &dyn MetadataProvider,
    seeds: &[PaperId],
    k: usize,
    ranking: RankStrategy,
) -> Result<ExpansionResult> {
    if seeds.is_empty() {
        return Err(Error::Validation("thematic expansion needs at least one seed".into()));
    }
    let mut unique = Vec::new();
    let mut seen = HashSet::new();
    for s in seeds {
        doc.require(s)?;
        if seen.insert(s) {
            unique.push(s.clone());
        }
    }
    if k == 0 {
        return Ok(ExpansionResult::default());
    }
    let seed_nodes: Vec<&PaperNode> = unique.iter().map(|s| doc.require(s)).collect::<Result<_>>()?;
    let pool = provider.get_recommendations(&unique, fetch_limit(k, 0, ranking))?;
    let accepted: Vec<PaperRecord> =
        rank_candidates(pool, &seed_nodes, ranking).into_iter().filter(|c| !seen.contains(&c.id)).take(k).collect();
    let seed_vecs: Vec<(PaperId, Embedding)> =
        seed_nodes.iter().map(|s| (s.id.clone(), embed(&s.content_text()))).collect();

    let mut merge = Merge { doc, result: ExpansionResult::default() };
    for candidate in &accepted {
        merge.node(candidate)?;
        let e = embed(&candidate.content_text());
        for (seed, v) in &seed_vecs {
            let weight = v.cosine(&e).clamp(0.0, 1.0);
            merge.edge(TypedEdge::new(
                seed.clone(),
                candidate.id.clone(),
                EdgeKind::Thematic,
                weight,
                Provenance::ProviderRecommendation,
            ))?;
        }
    }
    merge.finish()
}

pub fn expand_citations(
    doc: &mut GraphDocument,
    provider: &dyn MetadataProvider,
    id: &PaperId,
    direction: Direction,
    k: usize,
    ranking: RankStrategy,
) -> Result<ExpansionResult> {
    let anchor = doc.require(id)?.clone();
    if k == 0 {
        return Ok(ExpansionResult::default());
    }
    let limit = fetch_limit(k, 1, ranking);
    let pool = match direction {
        Direction::Forward => provider.get_citations(id, limit)?,
        Direction::Backward => provider.get_references(id, limit)?,
    };
    let accepted: Vec<PaperRecord> =
        rank_candidates(pool, &[&anchor], ranking).into_iter().filter(|c| &c.id != id).take(k).collect();

    let mut merge = Merge { doc, result: ExpansionResult::default() };
    for candidate in &accepted {
        merge.node(candidate)?;
        let (source, target) = match direction {
            Direction::Forward => (candidate.id.clone(), id.clone()),
            Direction::Backward => (id.clone(), candidate.id.clone()),
        };
        merge.edge(TypedEdge::new(source, target, EdgeKind::Citation, 1.0, Provenance::CitationGraph))?;
    }
    merge.finish()
}

pub fn expand_author(
    doc: &mut GraphDocument,
    provider: &dyn MetadataProvider,
    anchor: &PaperId,
    author_id: &str,
    k: usize,
    ranking: RankStrategy,
) -> Result<ExpansionResult> {
    let anchor_node = doc.require(anchor)?.clone();
    if !anchor_node.has_author(author_id) {
        return Err(Error::Validation(format!("author {author_id} is not listed on {anchor}")));
    }
    if k == 0 {
        return Ok(ExpansionResult::default());
    }
    let pool = provider.get_author_papers(author_id, fetch_limit(k, 1, ranking))?;
    let accepted: Vec<PaperRecord> =
        rank_candidates(pool, &[&anchor_node], ranking).into_iter().filter(|c| &c.id != anchor).take(k).collect();

    let mut merge = Merge { doc, result: ExpansionResult::default() };
    for candidate in &accepted {
        merge.node(candidate)?;
        merge.edge(TypedEdge::new(
            anchor.clone(),
            candidate.id.clone(),
            EdgeKind::Authorship,
            1.0,
            Provenance::AuthorGraph,
        ))?;
    }
    merge.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, citations: u64) -> PaperRecord {
        let mut r = PaperRecord::new(id);
        r.citation_count = Some(citations);
        r
    }

    fn ids(v: &[PaperRecord]) -> Vec<&str> {
        v.iter().map(|r| r.id.as_str()).collect()
    }

    #[test]
    fn citation_count_ranking_breaks_ties_by_id() {
        let ranked = rank_candidates(vec![rec("c", 5), rec("z", 9), rec("b", 9)], &[], RankStrategy::CitationCount);
        assert_eq!(ids(&ranked), vec!["b", "z", "c"]);
    }

    #[test]
    fn provider_order_is_kept() {
        let input = vec![rec("z", 1), rec("a", 9), rec("m", 3)];
        assert_eq!(ids(&rank_candidates(input, &[], RankStrategy::ProviderOrder)), vec!["z", "a", "m"]);
        assert_eq!(ids(&rank_candidates(vec![rec("x", 0)], &[], RankStrategy::Similarity)), vec!["x"]);
    }

    #[test]
    fn similarity_prefers_shared_vocabulary() {
        let seed = PaperNode::new("s", "force directed graph layout");
        let mut near = PaperRecord::new("near");
        near.title = Some("graph layout".into());
        let mut far = PaperRecord::new("far");
        far.title = Some("protein folding".into());
        let ranked = rank_candidates(vec![far, near], &[&seed], RankStrategy::Similarity);
        assert_eq!(ids(&ranked), vec!["near", "far"]);
    }

    #[test]
    fn request_shapes() {
        let r: ExpansionRequest = serde_json::from_str(r#"{"mode":"thematic","seeds":["a"]}"#).unwrap();
        assert_eq!(r.k, DEFAULT_K);
        assert_eq!(r.ranking, RankStrategy::ProviderOrder);
        assert!(single_seed(&ExpansionRequest::thematic(&["a", "b"], 1)).is_err());
    }
}
