//! Completion backends for the remote insight path.

use std::sync::Arc;

use serde_json::{json, Value};

use crate::transport::{HttpRequest, HttpTransport};

pub const API_KEY_ENV: &str = "GEMINI_API_KEY";
pub const DEFAULT_ENDPOINT: &str = "https://generativelanguage.googleapis.com";
pub const DEFAULT_MODEL: &str = "gemini-2.5-flash";

pub const TLDR_PROMPT: &str = include_str!("../../prompts/tldr.v1.txt");
pub const KEYWORDS_PROMPT: &str = include_str!("../../prompts/keywords.v1.txt");
pub const CLUSTER_LABEL_PROMPT: &str = include_str!("../../prompts/cluster_label.v1.txt");

/// Fill `{name}` placeholders in a prompt template.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    vars.iter().fold(template.to_string(), |acc, (name, value)| acc.replace(&format!("{{{name}}}"), value))
}

pub trait CompletionBackend: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, String>;
}

pub struct GeminiBackend {
    transport: Arc<dyn HttpTransport>,
    endpoint: String,
    model: String,
    api_key: String,
}

impl GeminiBackend {
    pub fn new(transport: Arc<dyn HttpTransport>, endpoint: &str, model: &str, api_key: &str) -> Self {
        GeminiBackend {
            transport,
            endpoint: endpoint.trim_end_matches('/').to_string(),
            model: model.to_string(),
            api_key: api_key.to_string(),
        }
    }

    pub fn request(&self, prompt: &str) -> HttpRequest {
        let url = format!("{}/v1beta/models/{}:generateContent", self.endpoint, self.model);
        let body = json!({ "contents": [{ "parts": [{ "text": prompt }] }] });
        HttpRequest::post_json(url, body.to_string()).header("x-goog-api-key", &self.api_key)
    }
}

impl CompletionBackend for GeminiBackend {
    fn complete(&self, prompt: &str) -> Result<String, String> {
        let response = self.transport.execute(&self.request(prompt))?;
        if !(200..300).contains(&response.status) {
            return Err(format!("completion endpoint returned HTTP {}", response.status));
        }
        let body: Value = serde_json::from_str(&response.body).map_err(|e| e.to_string())?;
        let text: String = body["candidates"][0]["content"]["parts"]
            .as_array()
            .ok_or("completion response has no candidate text")?
            .iter()
            .filter_map(|p| p["text"].as_str())
            .collect();
        let text = text.trim();
        if text.is_empty() {
            return Err("completion response is empty".into());
        }
        Ok(text.to_string())
    }
}

/// One keyword per line or comma; list markers and numbering stripped.
pub fn parse_keyword_list(text: &str, k: usize) -> Vec<String> {
    text.split(['\n', ','])
        .map(|l| l.trim().trim_start_matches(|c: char| c.is_ascii_digit() || "-*.)• ".contains(c)).trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .take(k)
        .collect()
}
