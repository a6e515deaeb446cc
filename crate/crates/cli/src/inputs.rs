use std::path::{Path, PathBuf};

use belief_client::api::OracleSpec;
use belief_client::EngineClient;
use belief_core::construction::MockFixture;
use belief_core::document::{GraphDocument, OutcomeDocument, RunConfig};
use belief_core::HypothesisSet;
use belief_server::{AppState, BackgroundServer};
use serde::de::DeserializeOwned;

use crate::error::CliError;
use crate::Global;

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

/// Parses JSON, naming the file and position on failure.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn read_graph(path: &Path) -> Result<GraphDocument, CliError> {
    let doc: GraphDocument = read_json(path)?;
    doc.to_graph().map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(doc)
}

pub enum Document {
    Graph(GraphDocument),
    Outcome(OutcomeDocument),
}

/// A graph or an outcome document, told apart by the `graph` field.
pub fn read_document(path: &Path) -> Result<Document, CliError> {
    let text = read_text(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let bad = |e: serde_json::Error| CliError::Input(format!("{}: {e}", path.display()));
    if value.get("graph").is_some() {
        Ok(Document::Outcome(serde_json::from_value(value).map_err(bad)?))
    } else {
        Ok(Document::Graph(serde_json::from_value(value).map_err(bad)?))
    }
}

/// One question per non-blank line.
pub fn read_questions(path: &Path) -> Result<Vec<HypothesisSet>, CliError> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let q: HypothesisSet = serde_json::from_str(line)
            .map_err(|e| CliError::Input(format!("{} line {}: {e}", path.display(), i + 1)))?;
        q.validate().map_err(|e| CliError::Input(format!("{} line {}: {e}", path.display(), i + 1)))?;
        out.push(q);
    }
    Ok(out)
}

pub fn run_config(g: &Global) -> Result<RunConfig, CliError> {
    let mut cfg = match &g.config {
        Some(path) => read_json(path)?,
        None => RunConfig::default(),
    };
    if let Some(d) = g.d_max {
        cfg.calibration.d_max = d;
    }
    if let Some(b) = g.budget {
        cfg.budget = b;
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(w) = g.workers {
        cfg.workers = w;
    }
    if let Some(s) = g.tau_scope {
        cfg.tau_scope = s.into();
    }
    if let Some(dir) = &g.oracle_cache {
        cfg.oracle_cache = Some(dir.clone());
    }
    cfg.calibration.validate().map_err(|e| CliError::Input(format!("configuration: {e}")))?;
    Ok(cfg)
}

pub fn oracle_spec(g: &Global) -> Result<OracleSpec, CliError> {
    let spec = g.oracle.as_deref().ok_or_else(|| CliError::Input("--oracle is required".into()))?;
    if let Some(path) = spec.strip_prefix("mock:") {
        let fixture: MockFixture = read_json(&PathBuf::from(path))?;
        Ok(OracleSpec::Mock { fixture })
    } else if let Some(url) = spec.strip_prefix("remote:") {
        Ok(OracleSpec::Remote { url: url.to_string() })
    } else {
        Err(CliError::Input(format!("--oracle must be mock:<path> or remote:<url>, got {spec:?}")))
    }
}

/// The engine client, plus the in-process engine when one was started.
pub struct Engine {
    pub client: EngineClient,
    _local: Option<BackgroundServer>,
}

pub fn engine(g: &Global) -> Result<Engine, CliError> {
    match &g.server {
        Some(url) => Ok(Engine { client: EngineClient::new(url.clone())?, _local: None }),
        None => {
            let server = BackgroundServer::start("127.0.0.1:0", AppState::new(None))
                .map_err(|e| CliError::Internal(format!("cannot start the local engine: {e}")))?;
            Ok(Engine { client: EngineClient::new(server.url())?, _local: Some(server) })
        }
    }
}

pub fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
