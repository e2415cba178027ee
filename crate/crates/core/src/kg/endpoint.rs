//! SPARQL protocol client with an on-disk response cache.

use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};
use url::Url;

use super::results::ResultSet;
use super::KgError;
use crate::sparql::{to_sparql, SparqlQuery};

/// Environment variable naming the default cache directory.
pub const CACHE_ENV: &str = "NSPM_CACHE_DIR";

const ACCEPT: &str = "application/sparql-results+json";

#[derive(Debug)]
pub struct SparqlEndpoint {
    url: Url,
    timeout: Duration,
    cache_dir: Option<PathBuf>,
    politeness: Duration,
    agent: ureq::Agent,
    last_request: Mutex<HashMap<String, Instant>>,
}

impl SparqlEndpoint {
    pub fn new(url: &str, timeout: Duration) -> Result<Self, KgError> {
        let url = Url::parse(url).map_err(|e| KgError::Network(format!("invalid endpoint URL {url}: {e}")))?;
        Ok(Self {
            url,
            timeout,
            cache_dir: std::env::var_os(CACHE_ENV).map(PathBuf::from),
            politeness: Duration::ZERO,
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
            last_request: Mutex::new(HashMap::new()),
        })
    }

    pub fn with_cache_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.cache_dir = Some(dir.into());
        self
    }

    pub fn without_cache(mut self) -> Self {
        self.cache_dir = None;
        self
    }

    /// Minimum delay between two requests to the same host.
    pub fn with_politeness(mut self, delay: Duration) -> Self {
        self.politeness = delay;
        self
    }

    pub fn url(&self) -> &Url {
        &self.url
    }

    pub fn query(&self, q: &SparqlQuery) -> Result<ResultSet, KgError> {
        self.query_text(&to_sparql(q, None))
    }

    /// Sends raw SPARQL text, consulting the cache first.
    pub fn query_text(&self, text: &str) -> Result<ResultSet, KgError> {
        let cache_path = self.cache_dir.as_ref().map(|d| d.join(format!("{}.json", cache_key(text))));
        if let Some(path) = &cache_path {
            if let Ok(body) = fs::read_to_string(path) {
                return parse_body(&body);
            }
        }
        self.wait_turn();
        let response = self
            .agent
            .request_url("GET", &self.url)
            .query("query", text)
            .set("Accept", ACCEPT)
            .timeout(self.timeout)
            .call();
        let body = match response {
            Ok(r) => r.into_string().map_err(|e| KgError::Network(e.to_string()))?,
            Err(ureq::Error::Status(status, r)) => {
                let body = r.into_string().unwrap_or_default();
                let excerpt: String = body.chars().take(200).collect();
                return Err(KgError::Endpoint { status, excerpt });
            }
            Err(ureq::Error::Transport(t)) => return Err(KgError::Network(t.to_string())),
        };
        let results = parse_body(&body)?;
        if let Some(path) = &cache_path {
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir)?;
            }
            fs::write(path, &body)?;
        }
        Ok(results)
    }

    fn wait_turn(&self) {
        if self.politeness.is_zero() {
            return;
        }
        let host = self.url.host_str().unwrap_or_default().to_string();
        let mut last = self.last_request.lock().expect("politeness lock poisoned");
        if let Some(prev) = last.get(&host) {
            let elapsed = prev.elapsed();
            if elapsed < self.politeness {
                std::thread::sleep(self.politeness - elapsed);
            }
        }
        last.insert(host, Instant::now());
    }
}

/// Hex SHA-256 of the query text; names the cache file.
pub fn cache_key(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn parse_body(body: &str) -> Result<ResultSet, KgError> {
    let json: serde_json::Value =
        serde_json::from_str(body).map_err(|e| KgError::Protocol(format!("response is not JSON: {e}")))?;
    ResultSet::from_json(&json)
}

/// One-shot query against `endpoint` without caching.
pub fn query_endpoint(endpoint: &str, q: &SparqlQuery, timeout: Duration) -> Result<ResultSet, KgError> {
    SparqlEndpoint::new(endpoint, timeout)?.without_cache().query(q)
}
