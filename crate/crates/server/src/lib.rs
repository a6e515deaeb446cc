//! The belief engine as an HTTP service. See [`belief_client::api`] for the
//! routes and their bodies.

mod error;
mod handlers;

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::atomic::AtomicU64;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use axum::extract::DefaultBodyLimit;
use axum::routing::{delete, get, post};
use axum::Router;
use belief_core::construction::{ConstructionError, MockFixture};
use belief_core::MockOracle;
use sha2::{Digest, Sha256};
use tokio::sync::oneshot;

pub use error::ApiError;

const BODY_LIMIT: usize = 256 * 1024 * 1024;

/// Shared by every request.
pub struct AppState {
    oracle: Option<MockOracle>,
    sessions: Mutex<BTreeMap<String, handlers::Session>>,
    next_session: AtomicU64,
}

impl AppState {
    /// `oracle` answers the `/v1/oracle/*` routes; without it they are 404.
    pub fn new(oracle: Option<MockOracle>) -> Self {
        AppState { oracle, sessions: Mutex::new(BTreeMap::new()), next_session: AtomicU64::new(1) }
    }

    pub fn with_fixture(fixture: Option<&MockFixture>) -> Result<Self, ConstructionError> {
        let oracle = fixture.map(mock_oracle).transpose()?;
        Ok(AppState::new(oracle))
    }
}

/// Mock oracle named after a digest of its tables, so provenance tells
/// fixtures apart.
pub fn mock_oracle(fixture: &MockFixture) -> Result<MockOracle, ConstructionError> {
    let json = serde_json::to_vec(fixture).expect("fixtures serialize");
    let name = format!("mock:{}", hex::encode(&Sha256::digest(&json)[..6]));
    Ok(MockOracle::from_fixture(fixture)?.with_name(name))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(handlers::health))
        .route("/v1/graphs/build", post(handlers::build))
        .route("/v1/graphs/synthetic", post(handlers::synthetic))
        .route("/v1/reason", post(handlers::reason))
        .route("/v1/resolve/sessions", post(handlers::start_session))
        .route("/v1/resolve/sessions/{id}", delete(handlers::delete_session))
        .route("/v1/resolve/sessions/{id}/answer", post(handlers::answer))
        .route("/v1/resolve/sessions/{id}/finish", post(handlers::finish))
        .route("/v1/metrics/tau", post(handlers::tau))
        .route("/v1/export/dot", post(handlers::export_dot))
        .route("/v1/export/wcnf", post(handlers::export_wcnf))
        .route("/v1/evaluate", post(handlers::evaluate))
        .route("/v1/oracle", get(handlers::oracle_identity))
        .route("/v1/oracle/generate_premises", post(handlers::oracle_premises))
        .route("/v1/oracle/score_statement", post(handlers::oracle_score_statement))
        .route("/v1/oracle/score_entailment", post(handlers::oracle_score_entailment))
        .route("/v1/oracle/negate", post(handlers::oracle_negate))
        .fallback(handlers::not_found)
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(state)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: Arc<AppState>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}

/// Serves on `addr` until interrupted, blocking the calling thread.
pub fn run_blocking(addr: &str, state: AppState) -> std::io::Result<()> {
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        serve(listener, Arc::new(state), async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
    })
}

/// A server on its own runtime thread, stopped when dropped.
pub struct BackgroundServer {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<std::io::Result<()>>>,
}

impl BackgroundServer {
    /// Binds `addr` (port 0 picks a free one) before returning.
    pub fn start(addr: &str, state: AppState) -> std::io::Result<Self> {
        let listener = std::net::TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let (tx, rx) = oneshot::channel::<()>();
        let thread = std::thread::Builder::new().name("belief-server".into()).spawn(move || {
            let runtime = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build()?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(listener)?;
                serve(listener, Arc::new(state), async {
                    let _ = rx.await;
                })
                .await
            })
        })?;
        Ok(BackgroundServer { addr, shutdown: Some(tx), thread: Some(thread) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for BackgroundServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            if let Ok(Err(e)) = t.join() {
                log::warn!("server stopped with an error: {e}");
            }
        }
    }
}
