use std::collections::BTreeSet;
use std::sync::atomic::Ordering;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{FromRequest, Path, Request, State};
use axum::Json;
use belief_client::api::*;
use belief_client::{RemoteOracle, RemoteOracleConfig};
use belief_core::construction::{generate_graph_with, BeliefOracle, BuildOptions};
use belief_core::document::{GraphDocument, OutcomeDocument, Provenance, RunConfig, SCHEMA_VERSION};
use belief_core::dot::to_dot;
use belief_core::maxsat::wcnf::to_wcnf;
use belief_core::metrics::{
    evaluate_dataset, evaluate_graphs, reason_ablated, tau_of, ConsistencyReport, DatasetReport, EvalConfig, TauScope,
};
use belief_core::reasoner::Resolver;
use belief_core::synth::synthetic_graph;
use belief_core::{encode, reason_with, ReasonOptions};
use serde::de::DeserializeOwned;

use crate::error::ApiError;
use crate::{mock_oracle, AppState};

type Shared = State<Arc<AppState>>;
type Reply<T> = Result<Json<T>, ApiError>;

/// JSON body whose rejections use the service's error format.
pub struct Body<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Body(v)),
            Err(rejection) => Err(ApiError::input(rejection.body_text())),
        }
    }
}

/// Runs CPU-bound work off the async workers.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(ErrorKind::Internal, format!("worker failed: {e}")))?
}

fn options(config: &RunConfig) -> ReasonOptions {
    ReasonOptions { solver: config.solver.clone(), pins: Vec::new() }
}

fn eval_config(config: &RunConfig) -> EvalConfig {
    EvalConfig {
        calibration: config.calibration.clone(),
        solver: config.solver.clone(),
        max_statements: config.max_statements,
        workers: config.workers,
        tau_scope: config.tau_scope,
    }
}

fn oracle_for(spec: &OracleSpec, config: &RunConfig) -> Result<Box<dyn BeliefOracle>, ApiError> {
    Ok(match spec {
        OracleSpec::Mock { fixture } => Box::new(mock_oracle(fixture)?),
        OracleSpec::Remote { url } => {
            let cfg = RemoteOracleConfig {
                timeout: Duration::from_millis(config.oracle_timeout_ms),
                cache_dir: config.oracle_cache.clone(),
                ..Default::default()
            };
            Box::new(RemoteOracle::new(url, cfg).map_err(|e| ApiError::new(ErrorKind::Oracle, e.to_string()))?)
        }
    })
}

fn provenance(oracle: String, config: &RunConfig) -> Provenance {
    Provenance { oracle, config_digest: config.digest(), config: Some(config.clone()) }
}

pub async fn health() -> Json<Health> {
    Json(Health { status: "ok".into(), schema_version: SCHEMA_VERSION })
}

pub async fn not_found() -> ApiError {
    ApiError::new(ErrorKind::NotFound, "no such route")
}

pub async fn build(Body(req): Body<BuildRequest>) -> Reply<GraphDocument> {
    blocking(move || {
        req.config.calibration.validate().map_err(|e| ApiError::input(e.to_string()))?;
        let oracle = oracle_for(&req.oracle, &req.config)?;
        let build = BuildOptions { max_statements: req.config.max_statements };
        let g = generate_graph_with(&req.question, oracle.as_ref(), &req.config.calibration, &build)?;
        let mut doc = GraphDocument::from_graph(&g, provenance(oracle.identity(), &req.config));
        doc.question_id = req.question.question_id.clone();
        doc.gold_index = req.question.gold_index;
        Ok(Json(doc))
    })
    .await
}

pub async fn synthetic(Body(req): Body<SynthRequest>) -> Reply<GraphDocument> {
    blocking(move || {
        req.config.calibration.validate().map_err(|e| ApiError::input(e.to_string()))?;
        if req.synth.min_hypotheses < 2 || req.synth.min_hypotheses > req.synth.max_hypotheses {
            return Err(ApiError::input("hypothesis range must satisfy 2 <= min <= max"));
        }
        let sg = synthetic_graph(req.config.seed, &req.synth, &req.config.calibration);
        let oracle = format!("synthetic:seed={}", req.config.seed);
        let mut doc = GraphDocument::from_graph(&sg.graph, provenance(oracle, &req.config));
        doc.question_id = Some(format!("synthetic-{}", req.config.seed));
        doc.gold_index = Some(0);
        Ok(Json(doc))
    })
    .await
}

pub async fn reason(Body(req): Body<ReasonRequest>) -> Reply<OutcomeDocument> {
    blocking(move || {
        let g = req.graph.to_graph()?;
        let opts = options(&req.config);
        let outcome = if req.ablate.is_empty() {
            reason_with(&g, &opts)?
        } else {
            reason_ablated(&g, &req.ablate, &opts, req.config.tau_scope)?.outcome
        };
        Ok(Json(OutcomeDocument::new(&req.graph, &outcome, &req.ablate, req.config.tau_scope)?))
    })
    .await
}

pub struct Session {
    resolver: Resolver,
    graph: GraphDocument,
    scope: TauScope,
}

fn session_state(id: &str, s: &Session) -> SessionState {
    SessionState {
        session: id.to_string(),
        pending: s.resolver.pending_query().map(|n| PendingQuery {
            statement: n.id,
            text: n.text.clone(),
            confidence: n.confidence,
        }),
        queries: s.resolver.queries().to_vec(),
        conflicts: s.resolver.outcome().discarded_rules.len(),
    }
}

fn take_session(state: &AppState, id: &str) -> Result<Session, ApiError> {
    state
        .sessions
        .lock()
        .expect("session lock")
        .remove(id)
        .ok_or_else(|| ApiError::new(ErrorKind::NotFound, format!("no resolution session {id}")))
}

pub async fn start_session(State(state): Shared, Body(req): Body<ResolveRequest>) -> Reply<SessionState> {
    let session = blocking(move || {
        let g = req.graph.to_graph()?;
        let resolver = Resolver::start(&g, options(&req.config), req.config.budget)?;
        Ok(Session { resolver, graph: req.graph, scope: req.config.tau_scope })
    })
    .await?;
    let id = format!("session-{}", state.next_session.fetch_add(1, Ordering::Relaxed));
    let reply = session_state(&id, &session);
    state.sessions.lock().expect("session lock").insert(id, session);
    Ok(Json(reply))
}

pub async fn answer(State(state): Shared, Path(id): Path<String>, Body(req): Body<AnswerRequest>) -> Reply<SessionState> {
    let mut session = take_session(&state, &id)?;
    // The session is out of the map while solving; a failed answer drops it.
    let session = blocking(move || {
        session.resolver.answer(req.verdict)?;
        Ok(session)
    })
    .await?;
    let reply = session_state(&id, &session);
    state.sessions.lock().expect("session lock").insert(id, session);
    Ok(Json(reply))
}

pub async fn finish(State(state): Shared, Path(id): Path<String>, Body(req): Body<FinishRequest>) -> Reply<OutcomeDocument> {
    let session = take_session(&state, &id)?;
    blocking(move || {
        let resolution = session.resolver.finish_with(req.fallback);
        let doc = OutcomeDocument::new(&session.graph, &resolution.outcome, &BTreeSet::new(), session.scope)?;
        Ok(Json(doc.with_resolution(&resolution)))
    })
    .await
}

pub async fn delete_session(State(state): Shared, Path(id): Path<String>) -> Reply<serde_json::Value> {
    take_session(&state, &id)?;
    Ok(Json(serde_json::json!({ "deleted": id })))
}

pub async fn tau(Body(req): Body<TauRequest>) -> Reply<ConsistencyReport> {
    blocking(move || {
        let g = req.graph.to_graph()?;
        let a = req.assignment.unwrap_or_else(|| g.labels());
        Ok(Json(tau_of(&g, &a, req.scope)?))
    })
    .await
}

pub async fn export_dot(Body(req): Body<DotRequest>) -> Reply<TextResponse> {
    blocking(move || {
        let text = match (req.graph, req.outcome) {
            (Some(doc), None) => to_dot(&doc.to_graph()?, None, &BTreeSet::new()),
            (None, Some(out)) => {
                let g = out.graph.to_graph()?;
                if !out.assignment.covers(&g) {
                    return Err(ApiError::input("outcome assignment does not cover its graph"));
                }
                to_dot(&g, Some(&out.assignment), &out.discarded_rules.iter().copied().collect())
            }
            _ => return Err(ApiError::input("give exactly one of `graph` and `outcome`")),
        };
        Ok(Json(TextResponse { text }))
    })
    .await
}

pub async fn export_wcnf(Body(req): Body<WcnfRequest>) -> Reply<TextResponse> {
    blocking(move || Ok(Json(TextResponse { text: to_wcnf(&encode(&req.graph.to_graph()?)) }))).await
}

pub async fn evaluate(Body(req): Body<EvaluateRequest>) -> Reply<DatasetReport> {
    blocking(move || {
        let cfg = eval_config(&req.config);
        let report = match (req.questions.is_empty(), req.graphs.is_empty()) {
            (false, true) => {
                let spec = req.oracle.as_ref().ok_or_else(|| ApiError::input("questions need an oracle"))?;
                let oracle = oracle_for(spec, &req.config)?;
                evaluate_dataset(&req.questions, oracle.as_ref(), &cfg)?
            }
            (true, false) => {
                let graphs = req
                    .graphs
                    .iter()
                    .map(|d| Ok((d.to_graph()?, d.gold_index)))
                    .collect::<Result<Vec<_>, ApiError>>()?;
                evaluate_graphs(&graphs, &cfg)?
            }
            _ => return Err(ApiError::input("give either questions or graphs")),
        };
        Ok(Json(report))
    })
    .await
}

fn backend(state: &AppState) -> Result<&belief_core::MockOracle, ApiError> {
    state.oracle.as_ref().ok_or_else(|| ApiError::new(ErrorKind::NotFound, "no oracle backend configured"))
}

fn oracle_input(e: belief_core::construction::OracleError) -> ApiError {
    ApiError::input(e.to_string())
}

pub async fn oracle_identity(State(state): Shared) -> Reply<OracleIdentity> {
    Ok(Json(OracleIdentity { identity: backend(&state)?.identity() }))
}

pub async fn oracle_premises(State(state): Shared, Body(req): Body<PremisesRequest>) -> Reply<PremisesResponse> {
    let premises = backend(&state)?.generate_premises(&req.hypothesis).map_err(oracle_input)?;
    Ok(Json(PremisesResponse { premises }))
}

pub async fn oracle_score_statement(State(state): Shared, Body(req): Body<ScoreStatementRequest>) -> Reply<ScoreResponse> {
    let score = backend(&state)?.score_statement(&req.statement).map_err(oracle_input)?;
    Ok(Json(ScoreResponse { score }))
}

pub async fn oracle_score_entailment(
    State(state): Shared,
    Body(req): Body<ScoreEntailmentRequest>,
) -> Reply<ScoreResponse> {
    let score = backend(&state)?.score_entailment(&req.premises, &req.hypothesis).map_err(oracle_input)?;
    Ok(Json(ScoreResponse { score }))
}

pub async fn oracle_negate(State(state): Shared, Body(req): Body<NegateRequest>) -> Reply<NegateResponse> {
    let negation = backend(&state)?.negate(&req.statement).map_err(oracle_input)?;
    Ok(Json(NegateResponse { negation }))
}
