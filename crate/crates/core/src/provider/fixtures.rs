//! On-disk provider responses: one canonical-JSON file per (endpoint, params).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, ProviderError, Result};
use crate::hash::short_digest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    Paper,
    Citations,
    References,
    AuthorPapers,
    Recommendations,
}

impl Endpoint {
    pub fn name(self) -> &'static str {
        match self {
            Endpoint::Paper => "paper",
            Endpoint::Citations => "citations",
            Endpoint::References => "references",
            Endpoint::AuthorPapers => "author_papers",
            Endpoint::Recommendations => "recommendations",
        }
    }
}

/// Identity of one provider request.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RequestKey {
    pub endpoint: Endpoint,
    pub params: BTreeMap<String, String>,
}

impl RequestKey {
    pub fn new(endpoint: Endpoint, params: &[(&str, &str)]) -> Self {
        RequestKey {
            endpoint,
            params: params.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }

    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("request keys always serialize")
    }

    pub fn file_name(&self) -> String {
        format!("{}-{}.json", self.endpoint.name(), short_digest(self.canonical().as_bytes()))
    }

    pub fn describe(&self) -> String {
        let params: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        params.join("&")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureDocument {
    pub endpoint: Endpoint,
    pub params: BTreeMap<String, String>,
    pub response: Value,
}

#[derive(Debug, Clone)]
pub struct FixtureStore {
    dir: PathBuf,
}

impl FixtureStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FixtureStore { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &RequestKey) -> PathBuf {
        self.dir.join(key.file_name())
    }

    pub fn read(&self, key: &RequestKey) -> Result<Value> {
        let path = self.path_for(key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(ProviderError::FixtureMissing {
                    endpoint: key.endpoint.name().into(),
                    key: key.describe(),
                }
                .into())
            }
            Err(e) => return Err(Error::io(path, e)),
        };
        let doc: FixtureDocument = serde_json::from_slice(&bytes).map_err(|e| Error::Parse {
            context: path.display().to_string(),
            message: e.to_string(),
        })?;
        if doc.endpoint != key.endpoint || doc.params != key.params {
            return Err(Error::Parse {
                context: path.display().to_string(),
                message: "fixture content does not match its request".into(),
            });
        }
        Ok(doc.response)
    }

    pub fn write(&self, key: &RequestKey, response: &Value) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let doc = FixtureDocument { endpoint: key.endpoint, params: key.params.clone(), response: response.clone() };
        let path = self.path_for(key);
        let mut bytes = serde_json::to_vec_pretty(&doc).expect("fixture serializes");
        bytes.push(b'\n');
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_stable() {
        let key = RequestKey::new(Endpoint::Citations, &[("id", "fdl-01")]);
        assert_eq!(key.canonical(), r#"{"endpoint":"citations","params":{"id":"fdl-01"}}"#);
        assert_eq!(key.file_name(), key.clone().file_name());
        assert!(key.file_name().starts_with("citations-"));
        let other = RequestKey::new(Endpoint::References, &[("id", "fdl-01")]);
        assert_ne!(key.file_name(), other.file_name());
    }

    #[test]
    fn write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let store = FixtureStore::new(dir.path());
        let key = RequestKey::new(Endpoint::Paper, &[("id", "x")]);
        assert!(matches!(
            store.read(&key),
            Err(Error::Provider(ProviderError::FixtureMissing { .. }))
        ));
        store.write(&key, &serde_json::json!({"id": "x"})).unwrap();
        assert_eq!(store.read(&key).unwrap(), serde_json::json!({"id": "x"}));
    }
}
