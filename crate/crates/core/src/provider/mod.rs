//! Scholarly-metadata provider client.
//!
//! [`MetadataClient`] serves paper details, citations, references, author
//! papers, and recommendations either from the live Semantic Scholar API or
//! from a fixture directory. Responses are cached for the lifetime of the
//! client and can be written through to a directory in fixture format, which
//! is how live sessions get recorded for replay.

pub mod corpus;
pub mod fixtures;
mod ratelimit;
mod s2;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, ProviderError, Result};
use crate::graph::{Author, PaperId, PaperNode};
use crate::transport::{Clock, HttpTransport, OfflineTransport, SystemClock, UreqTransport};

pub use corpus::Corpus;
pub use fixtures::{Endpoint, FixtureStore, RequestKey};
pub use ratelimit::{backoff_delay, TokenBucket};

pub const API_KEY_ENV: &str = "S2_API_KEY";
pub const DEFAULT_BASE_URL: &str = "https://api.semanticscholar.org";
/// Page size for list endpoints; callers' limits truncate the cached page.
pub const PAGE_SIZE: usize = 100;

/// A provider's view of one paper. Unrequested fields are `None`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperRecord {
    pub id: PaperId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub authors: Option<Vec<Author>>,
    #[serde(rename = "abstract", default, skip_serializing_if = "Option::is_none")]
    pub abstract_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub venue: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub citation_count: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_ids: Option<BTreeMap<String, String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub citations: Option<Vec<PaperId>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub references: Option<Vec<PaperId>>,
}

impl PaperRecord {
    pub fn new(id: impl Into<PaperId>) -> Self {
        PaperRecord {
            id: id.into(),
            title: None,
            authors: None,
            abstract_text: None,
            year: None,
            venue: None,
            citation_count: None,
            external_ids: None,
            citations: None,
            references: None,
        }
    }

    /// Graph node for this record. A missing title falls back to the id.
    pub fn to_node(&self) -> PaperNode {
        let title = self.title.clone().filter(|t| !t.trim().is_empty()).unwrap_or_else(|| self.id.to_string());
        PaperNode {
            id: self.id.clone(),
            title,
            authors: self.authors.clone().unwrap_or_default(),
            abstract_text: self.abstract_text.clone(),
            year: self.year,
            venue: self.venue.clone(),
            citation_count: self.citation_count,
            external_ids: self.external_ids.clone().unwrap_or_default(),
            is_seed: false,
        }
    }

    pub fn content_text(&self) -> String {
        self.to_node().content_text()
    }

    /// Keep only `fields`.
    pub fn project(mut self, fields: &FieldSet) -> Self {
        let keep = |f: Field| fields.contains(&f);
        if !keep(Field::Title) {
            self.title = None;
        }
        if !keep(Field::Authors) {
            self.authors = None;
        }
        if !keep(Field::Abstract) {
            self.abstract_text = None;
        }
        if !keep(Field::Year) {
            self.year = None;
        }
        if !keep(Field::Venue) {
            self.venue = None;
        }
        if !keep(Field::CitationCount) {
            self.citation_count = None;
        }
        if !keep(Field::ExternalIds) {
            self.external_ids = None;
        }
        if !keep(Field::Citations) {
            self.citations = None;
        }
        if !keep(Field::References) {
            self.references = None;
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Title,
    Authors,
    Abstract,
    Year,
    Venue,
    CitationCount,
    ExternalIds,
    Citations,
    References,
}

pub type FieldSet = BTreeSet<Field>;

impl Field {
    pub fn all() -> FieldSet {
        [
            Field::Title,
            Field::Authors,
            Field::Abstract,
            Field::Year,
            Field::Venue,
            Field::CitationCount,
            Field::ExternalIds,
            Field::Citations,
            Field::References,
        ]
        .into_iter()
        .collect()
    }

    /// Everything a graph node needs.
    pub fn node_fields() -> FieldSet {
        let mut all = Field::all();
        all.remove(&Field::Citations);
        all.remove(&Field::References);
        all
    }
}

/// The provider surface the engine depends on.
pub trait MetadataProvider: Send + Sync {
    fn get_paper(&self, id: &PaperId, fields: &FieldSet) -> Result<PaperRecord>;
    /// Papers citing `id`, in provider order.
    fn get_citations(&self, id: &PaperId, limit: usize) -> Result<Vec<PaperRecord>>;
    /// Papers cited by `id`, in provider order.
    fn get_references(&self, id: &PaperId, limit: usize) -> Result<Vec<PaperRecord>>;
    fn get_author_papers(&self, author_id: &str, limit: usize) -> Result<Vec<PaperRecord>>;
    /// Ranked recommendations for a seed set, never containing a seed.
    fn get_recommendations(&self, seeds: &[PaperId], limit: usize) -> Result<Vec<PaperRecord>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderMode {
    Live,
    Fixture,
}

#[derive(Clone)]
pub struct ProviderConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    pub requests_per_second: f64,
    pub max_retries: u32,
    pub mode: ProviderMode,
    pub fixture_path: Option<PathBuf>,
    /// Write every served response here in fixture format.
    pub record_path: Option<PathBuf>,
}

impl fmt::Debug for ProviderConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProviderConfig")
            .field("base_url", &self.base_url)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .field("requests_per_second", &self.requests_per_second)
            .field("max_retries", &self.max_retries)
            .field("mode", &self.mode)
            .field("fixture_path", &self.fixture_path)
            .field("record_path", &self.record_path)
            .finish()
    }
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            base_url: DEFAULT_BASE_URL.into(),
            api_key: None,
            requests_per_second: 1.0,
            max_retries: 3,
            mode: ProviderMode::Live,
            fixture_path: None,
            record_path: None,
        }
    }
}

impl ProviderConfig {
    pub fn live_from_env() -> Self {
        ProviderConfig { api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()), ..Default::default() }
    }

    pub fn fixtures(dir: impl Into<PathBuf>) -> Self {
        ProviderConfig { mode: ProviderMode::Fixture, fixture_path: Some(dir.into()), ..Default::default() }
    }

    pub fn recording_to(mut self, dir: impl Into<PathBuf>) -> Self {
        self.record_path = Some(dir.into());
        self
    }

    pub fn check(&self) -> Result<()> {
        if !(self.requests_per_second > 0.0 && self.requests_per_second.is_finite()) {
            return Err(Error::Validation("requests_per_second must be positive".into()));
        }
        if self.mode == ProviderMode::Fixture && self.fixture_path.is_none() {
            return Err(Error::Validation("fixture mode requires a fixture path".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClientStats {
    /// Requests that reached the provider (network or fixture store).
    pub provider_requests: u64,
    pub cache_hits: u64,
}

pub struct MetadataClient {
    config: ProviderConfig,
    transport: Arc<dyn HttpTransport>,
    clock: Arc<dyn Clock>,
    limiter: Mutex<TokenBucket>,
    jitter: Mutex<ChaCha8Rng>,
    cache: RwLock<HashMap<RequestKey, Value>>,
    fixtures: Option<FixtureStore>,
    recorder: Option<FixtureStore>,
    provider_requests: AtomicU64,
    cache_hits: AtomicU64,
}

impl MetadataClient {
    /// Client with the default transport for the mode: live mode uses HTTP,
    /// fixture mode gets a transport that refuses all network access.
    pub fn new(config: ProviderConfig) -> Result<Self> {
        let transport: Arc<dyn HttpTransport> = match config.mode {
            ProviderMode::Live => Arc::new(UreqTransport::default()),
            ProviderMode::Fixture => Arc::new(OfflineTransport),
        };
        Self::with_transport(config, transport, Arc::new(SystemClock::default()))
    }

    pub fn with_transport(
        config: ProviderConfig,
        transport: Arc<dyn HttpTransport>,
        clock: Arc<dyn Clock>,
    ) -> Result<Self> {
        config.check()?;
        Ok(MetadataClient {
            limiter: Mutex::new(TokenBucket::new(config.requests_per_second)),
            jitter: Mutex::new(ChaCha8Rng::seed_from_u64(0)),
            cache: RwLock::new(HashMap::new()),
            fixtures: config.fixture_path.clone().map(FixtureStore::new),
            recorder: config.record_path.clone().map(FixtureStore::new),
            provider_requests: AtomicU64::new(0),
            cache_hits: AtomicU64::new(0),
            transport,
            clock,
            config,
        })
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    pub fn stats(&self) -> ClientStats {
        ClientStats {
            provider_requests: self.provider_requests.load(Ordering::SeqCst),
            cache_hits: self.cache_hits.load(Ordering::SeqCst),
        }
    }

    fn fetch(&self, key: &RequestKey) -> Result<Value> {
        if let Some(hit) = self.cache.read().unwrap().get(key) {
            self.cache_hits.fetch_add(1, Ordering::SeqCst);
            return Ok(hit.clone());
        }
        self.provider_requests.fetch_add(1, Ordering::SeqCst);
        let value = match (&self.config.mode, &self.fixtures) {
            (ProviderMode::Fixture, Some(store)) => store.read(key)?,
            _ => self.fetch_live(key)?,
        };
        if let Some(recorder) = &self.recorder {
            recorder.write(key, &value)?;
        }
        self.cache.write().unwrap().entry(key.clone()).or_insert_with(|| value.clone());
        Ok(value)
    }

    fn fetch_live(&self, key: &RequestKey) -> Result<Value> {
        let mut request = s2::request_for(&self.config.base_url, key);
        if let Some(api_key) = &self.config.api_key {
            request = request.header("x-api-key", api_key);
        }
        let mut attempt = 0;
        loop {
            let wait = self.limiter.lock().unwrap().reserve(self.clock.now());
            if !wait.is_zero() {
                self.clock.sleep(wait);
            }
            let response = self.transport.execute(&request).map_err(ProviderError::Transport)?;
            match response.status {
                200..=299 => return s2::normalize(key, &response.body),
                404 => {
                    return Err(ProviderError::NotFound {
                        endpoint: key.endpoint.name().into(),
                        key: key.describe(),
                    }
                    .into())
                }
                429 if attempt < self.config.max_retries => {
                    let delay = backoff_delay(attempt, &mut *self.jitter.lock().unwrap());
                    tracing::warn!(attempt, ?delay, "provider throttled request, backing off");
                    self.clock.sleep(delay);
                    attempt += 1;
                }
                429 => return Err(ProviderError::RateLimited { attempts: attempt + 1 }.into()),
                status => {
                    return Err(ProviderError::Transport(format!("HTTP {status} from {}", request.url)).into())
                }
            }
        }
    }

    fn fetch_list(&self, key: RequestKey, limit: usize) -> Result<Vec<PaperRecord>> {
        if limit == 0 {
            return Ok(Vec::new());
        }
        let value = self.fetch(&key)?;
        let mut records: Vec<PaperRecord> =
            serde_json::from_value(value).map_err(|e| ProviderError::Decode(e.to_string()))?;
        records.truncate(limit);
        Ok(records)
    }
}

fn require_id(id: &str) -> Result<()> {
    if id.trim().is_empty() {
        return Err(Error::Validation("identifier is empty".into()));
    }
    Ok(())
}

impl MetadataProvider for MetadataClient {
    fn get_paper(&self, id: &PaperId, fields: &FieldSet) -> Result<PaperRecord> {
        require_id(id.as_str())?;
        let value = self.fetch(&RequestKey::new(Endpoint::Paper, &[("id", id.as_str())]))?;
        let record: PaperRecord = serde_json::from_value(value).map_err(|e| ProviderError::Decode(e.to_string()))?;
        Ok(record.project(fields))
    }

    fn get_citations(&self, id: &PaperId, limit: usize) -> Result<Vec<PaperRecord>> {
        require_id(id.as_str())?;
        self.fetch_list(RequestKey::new(Endpoint::Citations, &[("id", id.as_str())]), limit)
    }

    fn get_references(&self, id: &PaperId, limit: usize) -> Result<Vec<PaperRecord>> {
        require_id(id.as_str())?;
        self.fetch_list(RequestKey::new(Endpoint::References, &[("id", id.as_str())]), limit)
    }

    fn get_author_papers(&self, author_id: &str, limit: usize) -> Result<Vec<PaperRecord>> {
        require_id(author_id)?;
        self.fetch_list(RequestKey::new(Endpoint::AuthorPapers, &[("author_id", author_id)]), limit)
    }

    fn get_recommendations(&self, seeds: &[PaperId], limit: usize) -> Result<Vec<PaperRecord>> {
        if seeds.is_empty() {
            return Err(Error::Validation("recommendations need at least one seed".into()));
        }
        for s in seeds {
            require_id(s.as_str())?;
        }
        if limit == 0 {
            return Ok(Vec::new());
        }
        let key = recommendation_key(seeds);
        let mut records = self.fetch_list(key, PAGE_SIZE)?;
        records.retain(|r| !seeds.contains(&r.id));
        records.truncate(limit);
        Ok(records)
    }
}

/// Seeds are a set: sorted and deduplicated into one parameter.
pub fn recommendation_key(seeds: &[PaperId]) -> RequestKey {
    let set: BTreeSet<&str> = seeds.iter().map(PaperId::as_str).collect();
    let joined = set.into_iter().collect::<Vec<_>>().join(",");
    RequestKey::new(Endpoint::Recommendations, &[("seeds", &joined)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::{HttpRequest, HttpResponse, ManualClock};
    use std::time::Duration;

    struct Scripted {
        statuses: Mutex<Vec<u16>>,
        calls: Mutex<Vec<(Duration, String)>>,
        clock: Arc<ManualClock>,
    }

    impl HttpTransport for Scripted {
        fn execute(&self, request: &HttpRequest) -> Result<HttpResponse, String> {
            self.calls.lock().unwrap().push((self.clock.now(), request.url.clone()));
            let status = self.statuses.lock().unwrap().pop().unwrap_or(200);
            let body = if request.url.contains("/citations") {
                r#"{"data":[{"citingPaper":{"paperId":"c1","title":"Citing"}}]}"#.to_string()
            } else {
                r#"{"paperId":"p1","title":"Paper","authors":[{"authorId":"9","name":"Ann"}],"externalIds":{"DOI":"10.1/x","CorpusId":42},"citations":[{"paperId":"c1"},{"paperId":null}],"references":[]}"#.to_string()
            };
            Ok(HttpResponse { status, body })
        }
    }

    fn live_client(statuses: Vec<u16>, rps: f64) -> (MetadataClient, Arc<Scripted>, Arc<ManualClock>) {
        let clock = Arc::new(ManualClock::default());
        let transport = Arc::new(Scripted { statuses: Mutex::new(statuses), calls: Mutex::new(Vec::new()), clock: clock.clone() });
        let config = ProviderConfig { requests_per_second: rps, ..ProviderConfig::default() };
        let client = MetadataClient::with_transport(config, transport.clone(), clock.clone()).unwrap();
        (client, transport, clock)
    }

    #[test]
    fn config_checks() {
        assert!(ProviderConfig { mode: ProviderMode::Fixture, ..Default::default() }.check().is_err());
        assert!(ProviderConfig { requests_per_second: 0.0, ..Default::default() }.check().is_err());
        assert!(ProviderConfig::default().check().is_ok());
        let dbg = format!("{:?}", ProviderConfig { api_key: Some("secret".into()), ..Default::default() });
        assert!(!dbg.contains("secret"));
    }

    #[test]
    fn live_responses_are_normalized_and_cached() {
        let (client, transport, _) = live_client(vec![], 1.0);
        let rec = client.get_paper(&"p1".into(), &Field::all()).unwrap();
        assert_eq!(rec.title.as_deref(), Some("Paper"));
        assert_eq!(rec.citations, Some(vec![PaperId::from("c1")]));
        assert_eq!(rec.external_ids.unwrap()["CorpusId"], "42");
        let only_title: FieldSet = [Field::Title].into_iter().collect();
        let projected = client.get_paper(&"p1".into(), &only_title).unwrap();
        assert!(projected.authors.is_none() && projected.citations.is_none());
        assert_eq!(transport.calls.lock().unwrap().len(), 1);
        assert_eq!(client.stats(), ClientStats { provider_requests: 1, cache_hits: 1 });
    }

    #[test]
    fn throttling_backs_off_then_gives_up() {
        // statuses pop from the back: two 429s then success
        let (client, transport, clock) = live_client(vec![200, 429, 429], 1.0);
        client.get_citations(&"p1".into(), 5).unwrap();
        let calls = transport.calls.lock().unwrap().clone();
        assert_eq!(calls.len(), 3);
        // 1 s + jitter then 2 s + jitter between attempts
        let gap1 = (calls[1].0 - calls[0].0).as_secs_f64();
        let gap2 = (calls[2].0 - calls[1].0).as_secs_f64();
        assert!((1.0..1.5).contains(&gap1), "{gap1}");
        assert!((2.0..3.0).contains(&gap2), "{gap2}");
        assert!(clock.now() >= Duration::from_secs(3));

        let (client, transport, _) = live_client(vec![429; 4], 1.0);
        let err = client.get_paper(&"p1".into(), &Field::all()).unwrap_err();
        assert!(matches!(err, Error::Provider(ProviderError::RateLimited { attempts: 4 })));
        assert_eq!(transport.calls.lock().unwrap().len(), 4);
    }

    #[test]
    fn dispatch_respects_token_bucket() {
        for rps in [1.0, 2.5, 0.5] {
            let (client, transport, clock) = live_client(vec![], rps);
            for i in 0..40 {
                client.get_paper(&format!("p{i}").into(), &Field::all()).unwrap();
                clock.advance(Duration::from_millis(37));
            }
            let times: Vec<f64> = transport.calls.lock().unwrap().iter().map(|(t, _)| t.as_secs_f64()).collect();
            let cap = (10.0 * rps).ceil() as usize;
            for (i, start) in times.iter().enumerate() {
                let in_window = times[i..].iter().take_while(|t| **t < start + 10.0).count();
                assert!(in_window <= cap, "rps {rps}: {in_window} > {cap}");
            }
        }
    }

    #[test]
    fn unknown_paper_is_not_found() {
        let (client, _, _) = live_client(vec![404], 1.0);
        let err = client.get_paper(&"nope".into(), &Field::all()).unwrap_err();
        assert!(err.is_not_found());
    }

    #[test]
    fn transport_failures_surface() {
        let config = ProviderConfig::default();
        let client = MetadataClient::with_transport(config, Arc::new(OfflineTransport), Arc::new(ManualClock::default())).unwrap();
        let err = client.get_paper(&"p".into(), &Field::all()).unwrap_err();
        assert!(matches!(err, Error::Provider(ProviderError::Transport(_))));
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn recommendation_keys_ignore_seed_order() {
        let a = recommendation_key(&["b".into(), "a".into(), "b".into()]);
        let b = recommendation_key(&["a".into(), "b".into()]);
        assert_eq!(a, b);
    }
}
