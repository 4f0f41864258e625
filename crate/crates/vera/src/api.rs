//! JSON-over-HTTP facade. Each handler maps onto one core operation.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};
use std::time::Duration;

use anyhow::Context;
use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use vera_core::calibration::{import_observations, recommend_parameters, FitConfig, ObservationSeries, ParamPath};
use vera_core::compiler::compile_seeded;
use vera_core::engine::{simulate, EngineKind, RunConfig};
use vera_core::library::Library;
use vera_core::{validate_model, ConceptualModel, TraitStore};

use crate::error::ApiError;

pub const DEFAULT_RUN_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Clone)]
pub struct AppState {
    pub library: Arc<Library>,
    pub traits: Arc<RwLock<TraitStore>>,
    /// Wall-clock cap on a single simulate or fit request.
    pub run_timeout: Duration,
}

impl AppState {
    pub fn new(library: Library, traits: TraitStore) -> Self {
        Self {
            library: Arc::new(library),
            traits: Arc::new(RwLock::new(traits)),
            run_timeout: DEFAULT_RUN_TIMEOUT,
        }
    }

    fn traits(&self) -> std::sync::RwLockReadGuard<'_, TraitStore> {
        self.traits.read().expect("trait store lock poisoned")
    }
}

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub port: u16,
    pub library: PathBuf,
    pub traits: Option<PathBuf>,
    pub run_timeout: Duration,
}

/// Opens the library and trait store described by `config`. Fails if the
/// library is unusable or the trait CSV does not ingest.
pub fn load_state(config: &ServeConfig) -> anyhow::Result<AppState> {
    let library = Library::open(&config.library)
        .with_context(|| format!("opening model library at {}", config.library.display()))?;
    let mut traits = TraitStore::new();
    if let Some(path) = &config.traits {
        let file = std::fs::File::open(path).with_context(|| format!("opening trait CSV {}", path.display()))?;
        let report = traits
            .ingest_traits(file)
            .with_context(|| format!("ingesting trait CSV {}", path.display()))?;
        for row in &report.rejected {
            tracing::warn!(line = row.line, field = %row.field, "rejected trait row: {}", row.message);
        }
        tracing::info!(loaded = report.loaded, "trait store ready");
    }
    let mut state = AppState::new(library, traits);
    state.run_timeout = config.run_timeout;
    Ok(state)
}

pub async fn serve(config: ServeConfig) -> anyhow::Result<()> {
    let state = load_state(&config)?;
    let addr = SocketAddr::from(([0, 0, 0, 0], config.port));
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .with_context(|| format!("binding port {}", config.port))?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/models", get(list_models).post(create_model))
        .route("/models/{id}", get(get_model).put(put_model))
        .route("/models/{id}/copy", post(copy_model))
        .route("/models/{id}/validate", post(validate))
        .route("/models/{id}/compile", post(compile_model))
        .route("/models/{id}/simulate", post(simulate_model))
        .route("/models/{id}/fit", post(fit_model))
        .route("/species", get(species))
        .route("/observations/parse", post(parse_observations))
        .fallback(|| async { ApiError::not_found("no such endpoint") })
        .method_not_allowed_fallback(|| async { ApiError::bad_request("method not allowed") })
        .with_state(state)
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))
}

async fn blocking<T, F>(state: &AppState, job: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
{
    match tokio::time::timeout(state.run_timeout, tokio::task::spawn_blocking(job)).await {
        Ok(Ok(result)) => result,
        Ok(Err(join)) => Err(ApiError::engine(format!("run failed: {join}"))),
        Err(_) => Err(ApiError::engine(format!(
            "run exceeded the {} s limit",
            state.run_timeout.as_secs_f64()
        ))),
    }
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

#[derive(Debug, Deserialize)]
struct ListQuery {
    filter: Option<String>,
}

async fn list_models(State(state): State<AppState>, Query(q): Query<ListQuery>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(state.library.list(q.filter.as_deref())?))
}

#[derive(Debug, Deserialize)]
struct TagQuery {
    /// Comma-separated.
    tags: Option<String>,
}

fn split_tags(tags: Option<String>) -> Option<Vec<String>> {
    tags.map(|t| {
        t.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect()
    })
}

async fn create_model(
    State(state): State<AppState>,
    Query(q): Query<TagQuery>,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let model: ConceptualModel = parse_body(&body)?;
    let id = state.library.create(&model, split_tags(q.tags).unwrap_or_default())?;
    Ok((StatusCode::CREATED, Json(state.library.load(&id)?)))
}

async fn get_model(State(state): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(state.library.load(&id)?))
}

async fn put_model(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<TagQuery>,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let model: ConceptualModel = parse_body(&body)?;
    state.library.update(&id, &model, split_tags(q.tags))?;
    Ok(Json(state.library.load(&id)?))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CopyRequest {
    pub name: String,
}

async fn copy_model(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let req: CopyRequest = parse_body(&body)?;
    let new_id = state.library.copy(&id, &req.name)?;
    Ok((StatusCode::CREATED, Json(state.library.load(&new_id)?)))
}

async fn validate(State(state): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    let stored = state.library.load(&id)?;
    Ok(Json(validate_model(&stored.model)))
}

async fn compile_model(State(state): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    let stored = state.library.load(&id)?;
    Ok(Json(compile_seeded(&stored.model, &state.traits())?))
}

fn default_stride() -> usize {
    1
}

fn default_runs() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateRequest {
    pub duration: f64,
    pub dt: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_stride")]
    pub record_every: usize,
    #[serde(default)]
    pub engine: EngineKind,
    /// Stochastic ensemble size; values above 1 return the pointwise mean.
    #[serde(default = "default_runs")]
    pub runs: usize,
}

impl SimulateRequest {
    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            duration: self.duration,
            dt: self.dt,
            seed: self.seed,
            record_every: self.record_every,
        }
    }
}

async fn simulate_model(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let req: SimulateRequest = parse_body(&body)?;
    let stored = state.library.load(&id)?;
    let spec = compile_seeded(&stored.model, &state.traits())?.spec;
    let series = blocking(&state, move || {
        Ok(simulate(&spec, &req.run_config(), req.engine, req.runs)?)
    })
    .await?;
    Ok(Json(series))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitRequest {
    pub observations: ObservationSeries,
    pub free: Vec<ParamPath>,
    pub budget: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

impl FitRequest {
    pub fn fit_config(&self) -> FitConfig {
        let mut cfg = FitConfig::with_budget(self.budget);
        if let Some(dt) = self.dt {
            cfg.dt = dt;
        }
        cfg
    }
}

async fn fit_model(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let req: FitRequest = parse_body(&body)?;
    let stored = state.library.load(&id)?;
    let result = blocking(&state, move || {
        Ok(recommend_parameters(
            &stored.model,
            &req.observations,
            &req.free,
            &req.fit_config(),
        )?)
    })
    .await?;
    Ok(Json(result))
}

#[derive(Debug, Deserialize)]
struct SpeciesQuery {
    #[serde(default)]
    q: String,
}

async fn species(State(state): State<AppState>, Query(q): Query<SpeciesQuery>) -> Json<Vec<vera_core::TraitRecord>> {
    Json(state.traits().lookup_species(&q.q))
}

#[derive(Debug, Deserialize)]
struct ParseQuery {
    name: Option<String>,
}

async fn parse_observations(Query(q): Query<ParseQuery>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let imported = import_observations(body.as_ref(), q.name.as_deref().unwrap_or("upload"))?;
    for w in &imported.warnings {
        tracing::warn!("{w}");
    }
    Ok(Json(imported.observations))
}
