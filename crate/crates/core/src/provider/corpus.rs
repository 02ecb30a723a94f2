//! A small self-contained literature corpus, and its expansion into a fixture directory.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::fixtures::{Endpoint, FixtureStore, RequestKey};
use super::{recommendation_key, PaperRecord};
use crate::error::{Error, Result};
use crate::graph::PaperId;

const BUNDLED: &str = include_str!("../../data/corpus.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationEntry {
    pub seeds: Vec<PaperId>,
    pub results: Vec<PaperId>,
}

/// Papers plus the reference and recommendation tables. Citations and
/// author bibliographies are derived so the tables never disagree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub papers: Vec<PaperRecord>,
    pub references: BTreeMap<PaperId, Vec<PaperId>>,
    pub recommendations: Vec<RecommendationEntry>,
}

impl Corpus {
    pub fn bundled() -> Corpus {
        serde_json::from_str(BUNDLED).expect("bundled corpus is valid JSON")
    }

    pub fn from_path(path: &Path) -> Result<Corpus> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Parse { context: path.display().to_string(), message: e.to_string() })
    }

    pub fn paper(&self, id: &PaperId) -> Option<&PaperRecord> {
        self.papers.iter().find(|p| &p.id == id)
    }

    pub fn references_of(&self, id: &PaperId) -> Vec<PaperId> {
        self.references.get(id).cloned().unwrap_or_default()
    }

    /// Papers whose reference lists contain `id`, in corpus order.
    pub fn citations_of(&self, id: &PaperId) -> Vec<PaperId> {
        self.papers
            .iter()
            .filter(|p| self.references.get(&p.id).is_some_and(|refs| refs.contains(id)))
            .map(|p| p.id.clone())
            .collect()
    }

    /// Papers listing `author_id`, in corpus order.
    pub fn author_papers(&self, author_id: &str) -> Vec<PaperId> {
        self.papers
            .iter()
            .filter(|p| {
                p.authors.iter().flatten().any(|a| a.author_id.as_deref() == Some(author_id))
            })
            .map(|p| p.id.clone())
            .collect()
    }

    pub fn author_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .papers
            .iter()
            .flat_map(|p| p.authors.iter().flatten())
            .filter_map(|a| a.author_id.clone())
            .collect();
        ids.sort();
        ids.dedup();
        ids
    }

    /// Recommendations for a seed set (order-insensitive), as stored.
    pub fn recommendations_for(&self, seeds: &[PaperId]) -> Option<Vec<PaperId>> {
        let key = recommendation_key(seeds);
        self.recommendations.iter().find(|e| recommendation_key(&e.seeds) == key).map(|e| e.results.clone())
    }

    fn list_record(&self, id: &PaperId) -> Result<PaperRecord> {
        let mut record = self
            .paper(id)
            .cloned()
            .ok_or_else(|| Error::Integrity(format!("corpus table references unknown paper {id}")))?;
        record.citations = None;
        record.references = None;
        Ok(record)
    }

    fn list(&self, ids: &[PaperId]) -> Result<serde_json::Value> {
        let records = ids.iter().map(|id| self.list_record(id)).collect::<Result<Vec<_>>>()?;
        Ok(serde_json::to_value(records).expect("records serialize"))
    }

    /// Write one fixture per endpoint response. Returns the number of files.
    pub fn write_fixtures(&self, dir: &Path) -> Result<usize> {
        let store = FixtureStore::new(dir);
        let mut written = 0;
        for paper in &self.papers {
            let id = paper.id.as_str();
            let mut full = paper.clone();
            full.citations = Some(self.citations_of(&paper.id));
            full.references = Some(self.references_of(&paper.id));
            store.write(&RequestKey::new(Endpoint::Paper, &[("id", id)]), &serde_json::to_value(&full).unwrap())?;
            store.write(&RequestKey::new(Endpoint::Citations, &[("id", id)]), &self.list(&self.citations_of(&paper.id))?)?;
            store.write(&RequestKey::new(Endpoint::References, &[("id", id)]), &self.list(&self.references_of(&paper.id))?)?;
            written += 3;
        }
        for author in self.author_ids() {
            let key = RequestKey::new(Endpoint::AuthorPapers, &[("author_id", &author)]);
            store.write(&key, &self.list(&self.author_papers(&author))?)?;
            written += 1;
        }
        for entry in &self.recommendations {
            store.write(&recommendation_key(&entry.seeds), &self.list(&entry.results)?)?;
            written += 1;
        }
        Ok(written)
    }
}
