#![allow(dead_code)]

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use litforage_core::provider::corpus::Corpus;
use litforage_core::provider::{MetadataClient, ProviderConfig};
use litforage_core::transport::{HttpRequest, HttpResponse, HttpTransport, ManualClock};
use serde_json::Value;
use tempfile::TempDir;

/// Transport that counts every attempt and refuses it.
#[derive(Default)]
pub struct Tripwire {
    pub attempts: AtomicU64,
}

impl HttpTransport for Tripwire {
    fn execute(&self, request: &HttpRequest) -> Result<HttpResponse, String> {
        self.attempts.fetch_add(1, Ordering::SeqCst);
        Err(format!("unexpected network use: {}", request.url))
    }
}

pub struct Fixtures {
    pub dir: TempDir,
    pub corpus: Corpus,
    pub client: MetadataClient,
    pub tripwire: Arc<Tripwire>,
}

pub fn fixtures() -> Fixtures {
    let dir = tempfile::tempdir().unwrap();
    let corpus = Corpus::bundled();
    corpus.write_fixtures(dir.path()).unwrap();
    let tripwire = Arc::new(Tripwire::default());
    let client = MetadataClient::with_transport(
        ProviderConfig::fixtures(dir.path()),
        tripwire.clone(),
        Arc::new(ManualClock::default()),
    )
    .unwrap();
    Fixtures { dir, corpus, client, tripwire }
}

/// Scan a fixture directory for the response stored under `endpoint` whose
/// params contain every `(name, value)` pair given.
pub fn stored_response(dir: &Path, endpoint: &str, params: &[(&str, Value)]) -> Option<Value> {
    for entry in std::fs::read_dir(dir).unwrap() {
        let doc: Value = serde_json::from_str(&std::fs::read_to_string(entry.unwrap().path()).unwrap()).unwrap();
        if doc["endpoint"] == endpoint && params.iter().all(|(k, v)| &doc["params"][*k] == v) {
            return Some(doc["response"].clone());
        }
    }
    None
}

pub fn response_ids(v: &Value) -> Vec<String> {
    v.as_array().unwrap().iter().map(|r| r["id"].as_str().unwrap().to_string()).collect()
}
