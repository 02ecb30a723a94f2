//! Semantic Scholar Graph and Recommendations API: request building and
//! response normalization into [`PaperRecord`]s.

use std::collections::BTreeMap;

use serde::Deserialize;
use serde_json::Value;

use super::fixtures::{Endpoint, RequestKey};
use super::{PaperRecord, PAGE_SIZE};
use crate::error::{ProviderError, Result};
use crate::graph::{Author, PaperId};
use crate::transport::HttpRequest;

const LIST_FIELDS: &str = "paperId,title,authors,abstract,year,venue,citationCount,externalIds";

pub(super) fn request_for(base: &str, key: &RequestKey) -> HttpRequest {
    let base = base.trim_end_matches('/');
    let param = |name: &str| key.params.get(name).map(String::as_str).unwrap_or_default();
    match key.endpoint {
        Endpoint::Paper => HttpRequest::get(format!(
            "{base}/graph/v1/paper/{}?fields={LIST_FIELDS},citations.paperId,references.paperId",
            param("id")
        )),
        Endpoint::Citations => HttpRequest::get(format!(
            "{base}/graph/v1/paper/{}/citations?fields={LIST_FIELDS}&limit={PAGE_SIZE}",
            param("id")
        )),
        Endpoint::References => HttpRequest::get(format!(
            "{base}/graph/v1/paper/{}/references?fields={LIST_FIELDS}&limit={PAGE_SIZE}",
            param("id")
        )),
        Endpoint::AuthorPapers => HttpRequest::get(format!(
            "{base}/graph/v1/author/{}/papers?fields={LIST_FIELDS}&limit={PAGE_SIZE}",
            param("author_id")
        )),
        Endpoint::Recommendations => {
            let seeds: Vec<&str> = param("seeds").split(',').filter(|s| !s.is_empty()).collect();
            let body = serde_json::json!({ "positivePaperIds": seeds, "negativePaperIds": [] });
            HttpRequest::post_json(
                format!("{base}/recommendations/v1/papers?fields={LIST_FIELDS}&limit={PAGE_SIZE}"),
                body.to_string(),
            )
        }
    }
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct S2Author {
    author_id: Option<String>,
    name: Option<String>,
}

#[derive(Deserialize)]
struct S2Ref {
    #[serde(rename = "paperId")]
    paper_id: Option<String>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct S2Paper {
    paper_id: Option<String>,
    title: Option<String>,
    authors: Option<Vec<S2Author>>,
    #[serde(rename = "abstract")]
    abstract_text: Option<String>,
    year: Option<i32>,
    venue: Option<String>,
    citation_count: Option<u64>,
    external_ids: Option<BTreeMap<String, Value>>,
    citations: Option<Vec<S2Ref>>,
    references: Option<Vec<S2Ref>>,
}

impl S2Paper {
    fn into_record(self) -> Option<PaperRecord> {
        let id = self.paper_id?;
        let refs = |list: Option<Vec<S2Ref>>| {
            list.map(|l| l.into_iter().filter_map(|r| r.paper_id).map(PaperId::from).collect())
        };
        Some(PaperRecord {
            id: PaperId::from(id),
            title: self.title,
            authors: self.authors.map(|a| {
                a.into_iter()
                    .map(|x| Author { name: x.name.unwrap_or_default(), author_id: x.author_id })
                    .collect()
            }),
            abstract_text: self.abstract_text,
            year: self.year,
            venue: self.venue.filter(|v| !v.is_empty()),
            citation_count: self.citation_count,
            external_ids: self.external_ids.map(|m| {
                m.into_iter()
                    .filter_map(|(k, v)| match v {
                        Value::String(s) => Some((k, s)),
                        Value::Number(n) => Some((k, n.to_string())),
                        _ => None,
                    })
                    .collect()
            }),
            citations: refs(self.citations),
            references: refs(self.references),
        })
    }
}

#[derive(Deserialize)]
struct Page<T> {
    data: Vec<T>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct CitingEdge {
    citing_paper: S2Paper,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct CitedEdge {
    cited_paper: S2Paper,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct Recommended {
    recommended_papers: Vec<S2Paper>,
}

fn decode<T: for<'de> Deserialize<'de>>(body: &str) -> Result<T> {
    serde_json::from_str(body).map_err(|e| ProviderError::Decode(e.to_string()).into())
}

/// Convert a raw API body into the normalized value stored in caches and fixtures.
pub(super) fn normalize(key: &RequestKey, body: &str) -> Result<Value> {
    let list = |papers: Vec<S2Paper>| -> Value {
        let records: Vec<PaperRecord> = papers.into_iter().filter_map(S2Paper::into_record).collect();
        serde_json::to_value(records).expect("records serialize")
    };
    Ok(match key.endpoint {
        Endpoint::Paper => {
            let record = decode::<S2Paper>(body)?
                .into_record()
                .ok_or_else(|| ProviderError::Decode("paper response without paperId".into()))?;
            serde_json::to_value(record).expect("record serializes")
        }
        Endpoint::Citations => list(decode::<Page<CitingEdge>>(body)?.data.into_iter().map(|e| e.citing_paper).collect()),
        Endpoint::References => list(decode::<Page<CitedEdge>>(body)?.data.into_iter().map(|e| e.cited_paper).collect()),
        Endpoint::AuthorPapers => list(decode::<Page<S2Paper>>(body)?.data),
        Endpoint::Recommendations => list(decode::<Recommended>(body)?.recommended_papers),
    })
}
