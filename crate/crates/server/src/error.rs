use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use belief_client::api::{ErrorBody, ErrorDetail, ErrorKind};
use belief_core::construction::ConstructionError;
use belief_core::document::DocumentError;
use belief_core::maxsat::SolveError;
use belief_core::metrics::MetricsError;
use belief_core::model::ModelError;
use belief_core::reasoner::ReasonError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub kind: ErrorKind,
    pub message: String,
}

impl ApiError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        ApiError { kind, message: message.into() }
    }

    pub fn input(message: impl Into<String>) -> Self {
        ApiError::new(ErrorKind::Input, message)
    }

    fn status(&self) -> StatusCode {
        match self.kind {
            ErrorKind::Input => StatusCode::BAD_REQUEST,
            ErrorKind::Oracle => StatusCode::BAD_GATEWAY,
            ErrorKind::Infeasible => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorKind::NotFound => StatusCode::NOT_FOUND,
            ErrorKind::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.kind == ErrorKind::Internal {
            log::error!("{}", self.message);
        }
        let body = ErrorBody { error: ErrorDetail { kind: self.kind, message: self.message.clone() } };
        (self.status(), Json(body)).into_response()
    }
}

impl From<DocumentError> for ApiError {
    fn from(e: DocumentError) -> Self {
        ApiError::input(e.to_string())
    }
}

impl From<ModelError> for ApiError {
    fn from(e: ModelError) -> Self {
        ApiError::input(e.to_string())
    }
}

impl From<ConstructionError> for ApiError {
    fn from(e: ConstructionError) -> Self {
        match e {
            ConstructionError::Oracle { .. } => ApiError::new(ErrorKind::Oracle, e.to_string()),
            _ => ApiError::input(e.to_string()),
        }
    }
}

impl From<SolveError> for ApiError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::TooManyVariables { .. } | SolveError::NodeLimit { .. } => {
                ApiError::new(ErrorKind::Internal, e.to_string())
            }
            _ => ApiError::input(e.to_string()),
        }
    }
}

impl From<ReasonError> for ApiError {
    fn from(e: ReasonError) -> Self {
        match e {
            ReasonError::Infeasible => ApiError::new(ErrorKind::Infeasible, e.to_string()),
            ReasonError::Solver(s) => s.into(),
            _ => ApiError::input(e.to_string()),
        }
    }
}

impl From<MetricsError> for ApiError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Reason(r) => r.into(),
            MetricsError::Pool(_) => ApiError::new(ErrorKind::Internal, e.to_string()),
            _ => ApiError::input(e.to_string()),
        }
    }
}
