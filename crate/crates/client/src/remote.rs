use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use belief_core::construction::{canonicalize, BeliefOracle, OracleError};
use reqwest::blocking::Client;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::api::*;

#[derive(Clone, Debug, PartialEq)]
pub struct RemoteOracleConfig {
    /// Per attempt.
    pub timeout: Duration,
    pub attempts: u32,
    /// Wait before the second attempt; doubled for each later one.
    pub backoff: Duration,
    /// Directory for the response cache. No caching when `None`.
    pub cache_dir: Option<PathBuf>,
}

impl Default for RemoteOracleConfig {
    fn default() -> Self {
        RemoteOracleConfig {
            timeout: Duration::from_secs(10),
            attempts: 3,
            backoff: Duration::from_millis(200),
            cache_dir: None,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CacheLine {
    key: String,
    value: serde_json::Value,
}

/// [`BeliefOracle`] answered by a remote endpoint speaking the
/// `/v1/oracle/*` schema of [`crate::api`].
///
/// Responses are cached by operation and canonical input. The cache is an
/// append-only JSON-lines file per endpoint, written after every fresh
/// response, so a run that fails part way keeps what it already paid for.
/// Timeouts, transport failures and 5xx responses are retried with
/// exponential backoff; anything else fails at once.
pub struct RemoteOracle {
    base: String,
    http: Client,
    cfg: RemoteOracleConfig,
    cache: Mutex<HashMap<String, serde_json::Value>>,
    cache_file: Option<Mutex<File>>,
    calls: AtomicU64,
}

fn io_error(e: std::io::Error) -> OracleError {
    OracleError::Transport(format!("oracle cache: {e}"))
}

impl RemoteOracle {
    pub fn new(endpoint: &str, cfg: RemoteOracleConfig) -> Result<Self, OracleError> {
        let base = endpoint.trim_end_matches('/').to_string();
        let http = Client::builder()
            .timeout(cfg.timeout)
            .build()
            .map_err(|e| OracleError::Transport(e.to_string()))?;
        let mut cache = HashMap::new();
        let mut cache_file = None;
        if let Some(dir) = &cfg.cache_dir {
            std::fs::create_dir_all(dir).map_err(io_error)?;
            let name = hex::encode(&Sha256::digest(base.as_bytes())[..8]);
            let path = dir.join(format!("oracle-{name}.jsonl"));
            if path.exists() {
                let reader = BufReader::new(File::open(&path).map_err(io_error)?);
                for line in reader.lines() {
                    let line = line.map_err(io_error)?;
                    // A torn last line from an interrupted run is skipped.
                    match serde_json::from_str::<CacheLine>(&line) {
                        Ok(entry) => {
                            cache.insert(entry.key, entry.value);
                        }
                        Err(e) => log::warn!("skipping unreadable cache line in {}: {e}", path.display()),
                    }
                }
            }
            let file = OpenOptions::new().create(true).append(true).open(&path).map_err(io_error)?;
            cache_file = Some(Mutex::new(file));
        }
        Ok(RemoteOracle { base, http, cfg, cache: Mutex::new(cache), cache_file, calls: AtomicU64::new(0) })
    }

    /// HTTP requests made so far, retries included.
    pub fn network_calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn cached_entries(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }

    fn call<B: Serialize, R: Serialize + DeserializeOwned>(
        &self,
        op: &str,
        key: String,
        body: &B,
    ) -> Result<R, OracleError> {
        let key = format!("{op}\u{1f}{key}");
        if let Some(v) = self.cache.lock().expect("cache lock").get(&key) {
            return serde_json::from_value(v.clone()).map_err(|e| OracleError::Decode(e.to_string()));
        }
        let value: R = self.fetch(op, body)?;
        let json = serde_json::to_value(&value).map_err(|e| OracleError::Decode(e.to_string()))?;
        if let Some(file) = &self.cache_file {
            let mut line = serde_json::to_string(&CacheLine { key: key.clone(), value: json.clone() })
                .map_err(|e| OracleError::Decode(e.to_string()))?;
            line.push('\n');
            let mut f = file.lock().expect("cache file lock");
            f.write_all(line.as_bytes()).and_then(|_| f.flush()).map_err(io_error)?;
        }
        self.cache.lock().expect("cache lock").insert(key, json);
        Ok(value)
    }

    fn fetch<B: Serialize, R: DeserializeOwned>(&self, op: &str, body: &B) -> Result<R, OracleError> {
        let url = format!("{}/v1/oracle/{op}", self.base);
        let mut last = OracleError::Transport("no attempt made".into());
        for attempt in 0..self.cfg.attempts.max(1) {
            if attempt > 0 {
                std::thread::sleep(self.cfg.backoff * 2u32.pow(attempt - 1));
            }
            self.calls.fetch_add(1, Ordering::Relaxed);
            let response = match self.http.post(&url).json(body).send() {
                Ok(r) => r,
                Err(e) if e.is_timeout() => {
                    last = OracleError::Timeout(format!("{url}: {e}"));
                    continue;
                }
                Err(e) => {
                    last = OracleError::Transport(format!("{url}: {e}"));
                    continue;
                }
            };
            let status = response.status();
            let bytes = match response.bytes() {
                Ok(b) => b,
                Err(e) if e.is_timeout() => {
                    last = OracleError::Timeout(format!("{url}: {e}"));
                    continue;
                }
                Err(e) => {
                    last = OracleError::Transport(format!("{url}: {e}"));
                    continue;
                }
            };
            if status.is_server_error() {
                last = OracleError::Transport(format!("{url}: status {status}"));
                continue;
            }
            if !status.is_success() {
                let text = String::from_utf8_lossy(&bytes);
                return Err(OracleError::Transport(format!("{url}: status {status}: {text}")));
            }
            return serde_json::from_slice(&bytes).map_err(|e| OracleError::Decode(format!("{url}: {e}")));
        }
        Err(last)
    }
}

fn canonical(text: &str) -> Result<String, OracleError> {
    canonicalize(text).map_err(|e| OracleError::Invalid(e.to_string()))
}

impl BeliefOracle for RemoteOracle {
    fn generate_premises(&self, hypothesis: &str) -> Result<Vec<String>, OracleError> {
        let body = PremisesRequest { hypothesis: hypothesis.to_string() };
        let r: PremisesResponse = self.call("generate_premises", canonical(hypothesis)?, &body)?;
        Ok(r.premises)
    }

    fn score_statement(&self, statement: &str) -> Result<f64, OracleError> {
        let body = ScoreStatementRequest { statement: statement.to_string() };
        let r: ScoreResponse = self.call("score_statement", canonical(statement)?, &body)?;
        if !(0.0..=1.0).contains(&r.score) {
            return Err(OracleError::Invalid(format!("score {}", r.score)));
        }
        Ok(r.score)
    }

    fn score_entailment(&self, premises: &[String], hypothesis: &str) -> Result<f64, OracleError> {
        let mut key = premises.iter().map(|p| canonical(p)).collect::<Result<Vec<_>, _>>()?;
        key.sort();
        key.push(canonical(hypothesis)?);
        let body = ScoreEntailmentRequest { premises: premises.to_vec(), hypothesis: hypothesis.to_string() };
        let r: ScoreResponse = self.call("score_entailment", key.join("\u{1e}"), &body)?;
        if !(0.0..=1.0).contains(&r.score) {
            return Err(OracleError::Invalid(format!("entailment score {}", r.score)));
        }
        Ok(r.score)
    }

    fn negate(&self, statement: &str) -> Result<String, OracleError> {
        let body = NegateRequest { statement: statement.to_string() };
        let r: NegateResponse = self.call("negate", canonical(statement)?, &body)?;
        Ok(r.negation)
    }

    fn identity(&self) -> String {
        format!("remote:{}", self.base)
    }
}
