//! JSON-over-HTTP API for the staff console.
//!
//! Every route except registration and login needs an
//! `Authorization: Bearer <token>` header. Errors are returned as
//! `{"error": <name>, "message": <text>}` with a status code that reflects
//! the failure class.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{DefaultBodyLimit, FromRequest, FromRequestParts, Multipart, Path, Query, Request, State};
use axum::http::request::Parts;
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use gradegauge_core::codegen::{self, EmitDialect};
use gradegauge_core::evaluation::Mismatch;
use gradegauge_core::preprocess::Outcome;
use gradegauge_core::{Algorithm, TrainedModel, TreeStats};

use crate::auth::{self, AuthError, Registration};
use crate::config::AppConfig;
use crate::csv_io;
use crate::pipeline::{self, PipelineError, Score, StudentInput};
use crate::store::{self, rfc3339, NewHistoryEntry, Store, StoreError};

/// Millisecond wall clock used for session expiry.
pub type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    pub config: Arc<AppConfig>,
    pub clock: Clock,
}

impl AppState {
    pub fn new(store: Store, config: AppConfig) -> Self {
        AppState {
            store: Arc::new(store),
            config: Arc::new(config),
            clock: Arc::new(store::now_ms),
        }
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub name: String,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, name: impl Into<String>, message: impl Into<String>) -> Self {
        ApiError {
            status,
            name: name.into(),
            message: message.into(),
        }
    }

    fn bad_request(name: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, name, message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!(error = %self.name, "{}", self.message);
        }
        (self.status, Json(json!({ "error": self.name, "message": self.message }))).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match e {
            StoreError::NotFound(_) => StatusCode::NOT_FOUND,
            StoreError::Forbidden(_) => StatusCode::FORBIDDEN,
            StoreError::DuplicateEmail => StatusCode::CONFLICT,
            StoreError::Document(_) | StoreError::Backend(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.name(), e.to_string())
    }
}

impl From<AuthError> for ApiError {
    fn from(e: AuthError) -> Self {
        let status = match e {
            AuthError::Store(e) => return e.into(),
            AuthError::DuplicateEmail => StatusCode::CONFLICT,
            AuthError::BadCredentials | AuthError::AuthRequired => StatusCode::UNAUTHORIZED,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError::new(status, e.name(), e.to_string())
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Store(e) => e.into(),
            PipelineError::Document(e) => ApiError::internal(e.to_string()),
            e => ApiError::bad_request(&e.name(), e.to_string()),
        }
    }
}

/// Runs blocking store or key-derivation work off the async executor.
async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

/// JSON body whose rejections are reported as 400s in the API error shape.
pub struct Body<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Body(v)),
            Err(e) => Err(ApiError::bad_request("InvalidBody", e.body_text())),
        }
    }
}

/// The authenticated caller.
pub struct Staff {
    pub account_id: String,
    pub token: String,
}

fn bearer(headers: &HeaderMap) -> Option<String> {
    let value = headers.get(header::AUTHORIZATION)?.to_str().ok()?;
    let (scheme, token) = value.trim().split_once(' ')?;
    let token = token.trim();
    (scheme.eq_ignore_ascii_case("bearer") && !token.is_empty()).then(|| token.to_string())
}

impl FromRequestParts<AppState> for Staff {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, Self::Rejection> {
        let token = bearer(&parts.headers).ok_or(AuthError::AuthRequired)?;
        let st = state.clone();
        let t = token.clone();
        let account_id = blocking(move || Ok(auth::authorize(&st.store, &t, (st.clock)())?)).await?;
        Ok(Staff { account_id, token })
    }
}

pub fn router(state: AppState) -> Router {
    let upload_limit = state.config.max_upload_bytes;
    Router::new()
        .route("/api/register", post(register))
        .route("/api/login", post(login))
        .route("/api/logout", post(logout))
        .route(
            "/api/datasets",
            post(upload_dataset)
                .layer(DefaultBodyLimit::max(upload_limit))
                .get(list_datasets),
        )
        .route("/api/models", post(train_model).get(list_models))
        .route("/api/models/{id}", get(model_info))
        .route("/api/models/{id}/code", get(model_code))
        .route("/api/predict", post(predict))
        .route("/api/evaluate", post(evaluate))
        .route("/api/verify", post(verify))
        .route("/api/history", get(history_list))
        .route("/api/history/{id}", delete(history_delete))
        .with_state(state)
}

/// Serves on an already bound listener until `shutdown` resolves.
pub async fn serve_on(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}

/// Opens the configured store and serves until Ctrl-C.
pub async fn serve(config: AppConfig) -> std::io::Result<()> {
    let store = Store::open(&config.store_path).map_err(std::io::Error::other)?;
    let addr: SocketAddr = format!("{}:{}", config.bind_address, config.port)
        .parse()
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, e))?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    serve_on(listener, AppState::new(store, config), async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
}

#[derive(Deserialize)]
struct RegisterBody {
    name: String,
    gender: String,
    branch: String,
    email: String,
    password: String,
    #[serde(default)]
    re_password: Option<String>,
}

async fn register(State(st): State<AppState>, Body(b): Body<RegisterBody>) -> Result<Response, ApiError> {
    if b.re_password.as_ref().is_some_and(|r| *r != b.password) {
        return Err(ApiError::bad_request("PasswordMismatch", "passwords do not match"));
    }
    let reg = Registration {
        name: b.name,
        gender: b.gender,
        branch: b.branch,
        email: b.email,
        password: b.password,
    };
    let account_id = blocking(move || {
        Ok(auth::register(&st.store, &reg, st.config.password_iterations, (st.clock)())?)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(json!({ "account_id": account_id }))).into_response())
}

#[derive(Deserialize)]
struct LoginBody {
    email: String,
    password: String,
}

async fn login(State(st): State<AppState>, Body(b): Body<LoginBody>) -> Result<Json<Value>, ApiError> {
    let issued = blocking(move || {
        let c = &st.config;
        Ok(auth::login(
            &st.store,
            &b.email,
            &b.password,
            c.password_iterations,
            c.session_ttl_secs,
            (st.clock)(),
        )?)
    })
    .await?;
    Ok(Json(json!({
        "token": issued.token,
        "account_id": issued.account_id,
        "expires_at": rfc3339(issued.expires_at_ms),
    })))
}

async fn logout(State(st): State<AppState>, staff: Staff) -> Result<StatusCode, ApiError> {
    blocking(move || Ok(auth::logout(&st.store, &staff.token)?)).await?;
    Ok(StatusCode::NO_CONTENT)
}

fn too_large(limit: usize) -> ApiError {
    ApiError::new(
        StatusCode::PAYLOAD_TOO_LARGE,
        "PayloadTooLarge",
        format!("uploads are limited to {limit} bytes"),
    )
}

async fn upload_dataset(
    State(st): State<AppState>,
    staff: Staff,
    headers: HeaderMap,
    mut multipart: Multipart,
) -> Result<Response, ApiError> {
    let limit = st.config.max_upload_bytes;
    let declared = headers
        .get(header::CONTENT_LENGTH)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.parse::<usize>().ok());
    if declared.is_some_and(|n| n > limit) {
        return Err(too_large(limit));
    }
    let multipart_error = |e: axum::extract::multipart::MultipartError| {
        if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
            too_large(limit)
        } else {
            ApiError::bad_request("InvalidUpload", e.body_text())
        }
    };
    let mut upload = None;
    while let Some(field) = multipart.next_field().await.map_err(multipart_error)? {
        if field.name() == Some("file") {
            let name = field.file_name().unwrap_or("upload.csv").to_string();
            let bytes = field.bytes().await.map_err(multipart_error)?;
            upload = Some((name, bytes));
        }
    }
    let (name, bytes) = upload.ok_or_else(|| ApiError::bad_request("InvalidUpload", "multipart field `file` is required"))?;
    if bytes.len() > limit {
        return Err(too_large(limit));
    }
    let text = String::from_utf8(bytes.to_vec())
        .map_err(|_| ApiError::bad_request("InvalidUpload", "the file is not UTF-8 text"))?;
    let (layout, d) = pipeline::read_students(text.as_bytes())?;
    let labeled = pipeline::is_labeled(&d);
    let info = blocking(move || {
        Ok(st
            .store
            .save_dataset(&staff.account_id, &name, layout.as_str(), d.len(), labeled, &text)?)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(info)).into_response())
}

async fn list_datasets(State(st): State<AppState>, staff: Staff) -> Result<Json<Value>, ApiError> {
    let list = blocking(move || Ok(st.store.list_datasets(&staff.account_id)?)).await?;
    Ok(Json(json!({ "datasets": list })))
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ConfigOverrides {
    min_leaf_size: Option<usize>,
    prune: Option<bool>,
    confidence_factor: Option<f64>,
}

#[derive(Deserialize)]
struct TrainBody {
    dataset_id: String,
    algorithm: String,
    #[serde(default)]
    config: ConfigOverrides,
}

fn parse_algorithm(s: &str) -> Result<Algorithm, ApiError> {
    Algorithm::parse(s).ok_or_else(|| ApiError::bad_request("InvalidAlgorithm", format!("unknown algorithm `{s}`")))
}

#[derive(Serialize)]
struct ModelSummary {
    model_id: String,
    algorithm: Algorithm,
    stats: TreeStats,
    created_at: String,
    dropped_rows: Vec<usize>,
}

async fn train_model(State(st): State<AppState>, staff: Staff, Body(b): Body<TrainBody>) -> Result<Response, ApiError> {
    let algorithm = parse_algorithm(&b.algorithm)?;
    let mut config = st.config.train_config(algorithm);
    config.min_leaf_size = b.config.min_leaf_size.unwrap_or(config.min_leaf_size);
    config.prune = b.config.prune.unwrap_or(config.prune);
    config.confidence_factor = b.config.confidence_factor.unwrap_or(config.confidence_factor);
    let summary = blocking(move || {
        let (_, csv) = st.store.dataset(&staff.account_id, &b.dataset_id)?;
        let (layout, d) = pipeline::read_students(csv.as_bytes())?;
        let (processed, dropped_rows) = pipeline::to_processed(layout, &d, &st.config.thresholds)?;
        let model = pipeline::train(algorithm, &processed, config)?;
        let info = st.store.save_model(&model)?;
        tracing::info!(model_id = %info.model_id, leaves = info.stats.leaf_count, "trained {algorithm}");
        Ok(ModelSummary {
            model_id: info.model_id,
            algorithm,
            stats: info.stats,
            created_at: info.created_at,
            dropped_rows,
        })
    })
    .await?;
    Ok((StatusCode::CREATED, Json(summary)).into_response())
}

async fn list_models(State(st): State<AppState>, _staff: Staff) -> Result<Json<Value>, ApiError> {
    let list = blocking(move || Ok(st.store.list_models()?)).await?;
    Ok(Json(json!({ "models": list })))
}

async fn model_info(State(st): State<AppState>, _staff: Staff, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let info = blocking(move || Ok(st.store.model_info(&id)?)).await?;
    Ok(Json(serde_json::to_value(info).map_err(|e| ApiError::internal(e.to_string()))?))
}

#[derive(Deserialize)]
struct CodeQuery {
    #[serde(default)]
    dialect: Option<String>,
    #[serde(default)]
    name: Option<String>,
}

async fn model_code(
    State(st): State<AppState>,
    _staff: Staff,
    Path(id): Path<String>,
    Query(q): Query<CodeQuery>,
) -> Result<Json<Value>, ApiError> {
    let dialect = match q.dialect.as_deref() {
        None => EmitDialect::PseudoCode,
        Some(s) => EmitDialect::parse(s)
            .ok_or_else(|| ApiError::bad_request("InvalidDialect", format!("unknown dialect `{s}`")))?,
    };
    let name = q.name.unwrap_or_else(|| "dtalgo".into());
    let model = blocking(move || Ok(st.store.load_model(&id)?)).await?;
    let code = codegen::emit(&model, dialect, &name).map_err(PipelineError::from)?;
    Ok(Json(json!({ "dialect": dialect.as_str(), "name": name, "code": code })))
}

/// Either `model_id` or `algorithm` (latest model of that kind).
#[derive(Deserialize)]
struct ModelChoice {
    #[serde(default)]
    model_id: Option<String>,
    #[serde(default)]
    algorithm: Option<String>,
}

fn resolve_model(store: &Store, choice: &ModelChoice) -> Result<(String, TrainedModel), ApiError> {
    let id = match (&choice.model_id, &choice.algorithm) {
        (Some(id), _) => id.clone(),
        (None, Some(alg)) => store.latest_model(parse_algorithm(alg)?)?.model_id,
        (None, None) => {
            return Err(ApiError::bad_request("InvalidBody", "either `model_id` or `algorithm` is required"))
        }
    };
    let model = store.load_model(&id)?;
    if let Some(alg) = &choice.algorithm {
        if parse_algorithm(alg)? != model.algorithm {
            return Err(ApiError::bad_request(
                "InvalidBody",
                format!("model `{id}` was trained with {}", model.algorithm),
            ));
        }
    }
    Ok((id, model))
}

#[derive(Deserialize)]
struct PredictBody {
    name: String,
    app_id: String,
    gender: String,
    percent: f64,
    merit: f64,
    #[serde(rename = "type")]
    admission_type: String,
    #[serde(flatten)]
    model: ModelChoice,
}

async fn predict(State(st): State<AppState>, staff: Staff, Body(b): Body<PredictBody>) -> Result<Json<Value>, ApiError> {
    let out = blocking(move || {
        let (model_id, model) = resolve_model(&st.store, &b.model)?;
        let input = StudentInput {
            merit: Score::Raw(b.merit),
            gender: b.gender.clone(),
            percent: Score::Raw(b.percent),
            admission_type: b.admission_type.clone(),
        };
        let record = pipeline::student_record(&input, &st.config.thresholds)?;
        let prediction = pipeline::predict(&model, &input, &st.config.thresholds)?;
        let predicted = Outcome::parse_loose(&prediction.predicted)
            .ok_or_else(|| {
                ApiError::bad_request(
                    "InvalidModel",
                    format!("model `{model_id}` predicts `{}`, not pass/fail", prediction.predicted),
                )
            })?
            .as_str()
            .to_string();
        let entry = st.store.history_append(
            &staff.account_id,
            NewHistoryEntry {
                app_id: b.app_id,
                name: b.name,
                gender: record[gradegauge_core::preprocess::GENDER].as_text().unwrap_or_default().to_string(),
                percent_raw: b.percent,
                merit_raw: b.merit,
                admission_type_raw: b.admission_type,
                algorithm: model.algorithm,
                model_id: model_id.clone(),
                predicted: predicted.clone(),
            },
        )?;
        let features: BTreeMap<&String, &str> =
            record.iter().map(|(k, v)| (k, v.as_text().unwrap_or_default())).collect();
        Ok(json!({
            "predicted": predicted,
            "model_id": model_id,
            "algorithm": model.algorithm,
            "features": features,
            "history_entry": entry,
        }))
    })
    .await?;
    Ok(Json(out))
}

#[derive(Deserialize)]
struct DatasetJob {
    dataset_id: String,
    #[serde(flatten)]
    model: ModelChoice,
}

fn mismatch_json(schema: &gradegauge_core::Schema, m: &Mismatch) -> Value {
    json!({
        "row": m.row,
        "app_id": m.app_id,
        "record": m.record.as_ref().map(|r| csv_io::row_map(schema, r)),
        "actual": m.actual,
        "predicted": m.predicted,
    })
}

async fn evaluate(State(st): State<AppState>, staff: Staff, Body(b): Body<DatasetJob>) -> Result<Json<Value>, ApiError> {
    let out = blocking(move || {
        let (model_id, model) = resolve_model(&st.store, &b.model)?;
        let (_, csv) = st.store.dataset(&staff.account_id, &b.dataset_id)?;
        let (d, bulk) = pipeline::evaluate_csv(&model, csv.as_bytes(), &st.config.thresholds, pipeline::monotonic_ms())?;
        let columns: Vec<&str> = d.schema().attributes().iter().map(|a| a.name.as_str()).collect();
        let rows: Vec<Value> = bulk
            .predictions
            .iter()
            .map(|p| {
                let row = p.row.expect("bulk predictions carry a row");
                json!({
                    "row": row,
                    "app_id": p.app_id,
                    "record": csv_io::row_map(d.schema(), &d.rows()[row]),
                    "predicted": p.predicted,
                })
            })
            .collect();
        let skipped: Vec<Value> = bulk
            .skipped
            .iter()
            .map(|s| json!({ "row": s.row, "reason": s.reason }))
            .collect();
        Ok(json!({
            "model_id": model_id,
            "algorithm": model.algorithm,
            "columns": columns,
            "rows": rows,
            "skipped": skipped,
            "wall_ms": bulk.wall_time_ms,
        }))
    })
    .await?;
    Ok(Json(out))
}

async fn verify(State(st): State<AppState>, staff: Staff, Body(b): Body<DatasetJob>) -> Result<Json<Value>, ApiError> {
    let out = blocking(move || {
        let (model_id, model) = resolve_model(&st.store, &b.model)?;
        let (_, csv) = st.store.dataset(&staff.account_id, &b.dataset_id)?;
        let (d, report) = pipeline::verify_csv(&model, csv.as_bytes(), &st.config.thresholds, pipeline::monotonic_ms())?;
        let mismatches: Vec<Value> = report.mismatches.iter().map(|m| mismatch_json(d.schema(), m)).collect();
        Ok(json!({
            "model_id": model_id,
            "algorithm": model.algorithm,
            "total": report.total,
            "correct": report.correct,
            "accuracy": report.accuracy_percent,
            "wall_ms": report.wall_time_ms,
            "mismatches": mismatches,
        }))
    })
    .await?;
    Ok(Json(out))
}

async fn history_list(State(st): State<AppState>, staff: Staff) -> Result<Json<Value>, ApiError> {
    let entries = blocking(move || Ok(st.store.history_list(&staff.account_id)?)).await?;
    Ok(Json(json!({ "entries": entries })))
}

async fn history_delete(
    State(st): State<AppState>,
    staff: Staff,
    Path(id): Path<String>,
) -> Result<StatusCode, ApiError> {
    blocking(move || Ok(st.store.history_delete(&staff.account_id, &id)?)).await?;
    Ok(StatusCode::NO_CONTENT)
}
