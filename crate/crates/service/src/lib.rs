//! HTTP front end for token-level BERTScore.
//!
//! `POST /score` takes `{"reference", "candidate", "options"?}` and answers
//! with the v1 [`ScoreResponse`] body; `GET /health` reports liveness. All
//! inference happens here so clients only render.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::State;
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use bertscore_viz_core::embedding::DeterministicProvider;
use bertscore_viz_core::{
    score_with, EmbeddingProvider, Error, ProviderConfig, ScoreOptions, ScoreResponse, Tokenizer,
    Vocab,
};
use bytes::Bytes;
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, CorsLayer};

mod config;

pub use config::{ConfigError, ServiceConfig};

/// JSON Schema of the `/score` response body.
pub const RESPONSE_SCHEMA: &str = include_str!("../schema/score_response.v1.json");

/// Dimension of per-request test providers when the service itself runs a model.
const FALLBACK_TEST_DIM: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Test,
    Model,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestOptions {
    #[serde(default)]
    pub truncate: bool,
    pub contextual: Option<bool>,
    pub seed: Option<u64>,
    pub provider: Option<ProviderKind>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub reference: String,
    pub candidate: String,
    #[serde(default)]
    pub options: Option<RequestOptions>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error_code: String,
    pub message: String,
}

/// Failures surfaced to HTTP clients. Each maps to one status and code.
#[derive(Debug)]
pub enum ApiError {
    BadRequest(String),
    Engine(Error),
    Internal(String),
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::Engine(e) => match e {
                Error::EmptyInput | Error::SequenceTooLong { .. } => {
                    StatusCode::UNPROCESSABLE_ENTITY
                }
                Error::ProviderLoad(_) | Error::ProviderRuntime(_) => {
                    StatusCode::SERVICE_UNAVAILABLE
                }
                Error::DimensionMismatch { .. }
                | Error::DuplicateVocabEntry { .. }
                | Error::IncompleteVocab(_)
                | Error::VocabIo(_) => StatusCode::INTERNAL_SERVER_ERROR,
            },
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn body(&self) -> ErrorBody {
        let (code, message) = match self {
            ApiError::BadRequest(m) => ("BAD_REQUEST", m.clone()),
            ApiError::Engine(e) => (e.code(), e.to_string()),
            ApiError::Internal(m) => ("INTERNAL_ERROR", m.clone()),
        };
        ErrorBody {
            error_code: code.to_string(),
            message,
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError::Engine(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::to_string(&self.body()).expect("error body serializes");
        json_response(self.status(), body)
    }
}

fn json_response(status: StatusCode, body: String) -> Response {
    (
        status,
        [(header::CONTENT_TYPE, HeaderValue::from_static("application/json"))],
        body,
    )
        .into_response()
}

/// Immutable state shared by all requests.
pub struct AppState {
    tokenizer: Tokenizer,
    provider: Arc<dyn EmbeddingProvider>,
    /// Defaults for per-request test providers: `(dim, seed, contextual)`.
    test_defaults: Option<(usize, u64, bool)>,
}

impl AppState {
    pub fn new(vocab: Vocab, provider: Arc<dyn EmbeddingProvider>) -> Self {
        AppState {
            tokenizer: Tokenizer::new(vocab),
            provider,
            test_defaults: None,
        }
    }

    /// Loads vocabulary and provider. Fails before any socket is opened.
    pub fn from_config(config: &ServiceConfig) -> Result<Self, Error> {
        let vocab = match &config.vocab_path {
            Some(path) => Vocab::from_file(path)?,
            None => match &config.provider {
                ProviderConfig::ModelFile { model_path, .. } => {
                    Vocab::from_file(companion_vocab(model_path))?
                }
                ProviderConfig::DeterministicTest { .. } => Vocab::demo(),
            },
        };
        let provider: Arc<dyn EmbeddingProvider> = Arc::from(config.provider.load()?);
        let mut state = AppState::new(vocab, provider);
        if let ProviderConfig::DeterministicTest {
            dim,
            seed,
            contextual,
        } = config.provider
        {
            state.test_defaults = Some((dim, seed, contextual));
        }
        Ok(state)
    }

    pub fn provider_id(&self) -> &str {
        self.provider.id()
    }

    /// Picks the provider for one request. Test-provider knobs may be
    /// overridden per request; a model can only come from startup config.
    fn provider_for(&self, options: &RequestOptions) -> Result<Arc<dyn EmbeddingProvider>, ApiError> {
        let wants_override = options.seed.is_some() || options.contextual.is_some();
        match (options.provider, self.test_defaults) {
            (Some(ProviderKind::Model), Some(_)) => Err(Error::ProviderLoad(
                "no model is configured on this server".into(),
            )
            .into()),
            (Some(ProviderKind::Model), None) | (None, None) => Ok(self.provider.clone()),
            (None, Some(_)) if !wants_override => Ok(self.provider.clone()),
            (_, defaults) => {
                let (dim, seed, contextual) =
                    defaults.unwrap_or((FALLBACK_TEST_DIM, 0, false));
                let provider = DeterministicProvider::new(
                    dim,
                    options.seed.unwrap_or(seed),
                    options.contextual.unwrap_or(contextual),
                )?;
                Ok(Arc::new(provider))
            }
        }
    }

    /// Scores one request synchronously.
    pub fn score(&self, request: &ScoreRequest) -> Result<ScoreResponse, ApiError> {
        let options = request.options.clone().unwrap_or_default();
        let provider = self.provider_for(&options)?;
        let report = score_with(
            &self.tokenizer,
            provider.as_ref(),
            &request.reference,
            &request.candidate,
            ScoreOptions {
                truncate: options.truncate,
            },
        )?;
        Ok(ScoreResponse::new(&report, provider.id()))
    }
}

/// Vocab file expected next to a model: `<dir>/vocab.txt`.
pub fn companion_vocab(model_path: &std::path::Path) -> PathBuf {
    if model_path.is_dir() {
        model_path.join("vocab.txt")
    } else {
        model_path
            .parent()
            .unwrap_or_else(|| std::path::Path::new("."))
            .join("vocab.txt")
    }
}

/// Parses a `/score` body. Anything that is not a well-formed request is a 400.
pub fn parse_request(body: &[u8]) -> Result<ScoreRequest, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(e.to_string()))
}

async fn handle_score(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let request = match parse_request(&body) {
        Ok(r) => r,
        Err(e) => return e.into_response(),
    };
    let result = tokio::task::spawn_blocking(move || state.score(&request)).await;
    match result {
        Ok(Ok(response)) => json_response(StatusCode::OK, response.to_json()),
        Ok(Err(e)) => {
            tracing::debug!(code = e.body().error_code, "score request failed");
            e.into_response()
        }
        Err(join) => ApiError::Internal(join.to_string()).into_response(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub provider_id: String,
}

async fn handle_health(State(state): State<Arc<AppState>>) -> Response {
    let body = Health {
        status: "ok".into(),
        provider_id: state.provider_id().to_string(),
    };
    json_response(StatusCode::OK, serde_json::to_string(&body).expect("health serializes"))
}

/// Builds the router. `cors_origin` of `"*"` allows any origin.
pub fn router(state: Arc<AppState>, cors_origin: Option<&str>) -> Router {
    let app = Router::new()
        .route("/score", post(handle_score))
        .route("/health", get(handle_health))
        .with_state(state);
    match cors_origin {
        None => app,
        Some(origin) => {
            let allow = if origin == "*" {
                AllowOrigin::any()
            } else {
                match HeaderValue::from_str(origin) {
                    Ok(v) => AllowOrigin::exact(v),
                    Err(_) => return app,
                }
            };
            app.layer(
                CorsLayer::new()
                    .allow_origin(allow)
                    .allow_methods([Method::GET, Method::POST])
                    .allow_headers([header::CONTENT_TYPE]),
            )
        }
    }
}

/// Serves `app` on an already-bound listener until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    app: Router,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, app)
        .with_graceful_shutdown(shutdown)
        .await
}

/// Binds `addr`, reporting the actual bound address (useful with port 0).
pub async fn bind(addr: SocketAddr) -> std::io::Result<(tokio::net::TcpListener, SocketAddr)> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    Ok((listener, local))
}
