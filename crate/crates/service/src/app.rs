use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::CorsLayer;
use tower_http::trace::TraceLayer;

use emagent_core::agent::{Agent, AgentConfig, ConversationTurn, PromptPack};
use emagent_core::corpus::{chunk_corpus, load_corpus, ChunkParams};
use emagent_core::efrec::{load_ef_db, Attribute, EfQuery, EfRecommender, Recommendation, RecommendOutcome, RegionHierarchy};
use emagent_core::evalkit::{load_benchmark, run_benchmark, EvalError, EvalItem, EvalReport, DEFAULT_TAU};
use emagent_core::inventory::{load_inventory, InventoryStore, QueryOutput};
use emagent_core::providers::{build_provider, ModelProvider, ProviderConfig};
use emagent_core::retrieval::VectorIndex;
use emagent_core::toolchain::FunctionRegistry;
use emagent_core::tools::{analysis_registry, parse_inventory_query};

use crate::config::ServiceConfig;
use crate::error::{inventory_error, ApiError, ServiceError};
use crate::session::SessionStore;

/// Loaded data and models shared by all requests.
pub struct Backend {
    pub provider: Arc<dyn ModelProvider>,
    pub index: VectorIndex,
    pub inventory: InventoryStore,
    pub registry: FunctionRegistry<InventoryStore>,
    pub prompts: PromptPack,
    pub recommender: EfRecommender,
    pub agent_config: AgentConfig,
    pub benchmark: Option<Vec<EvalItem>>,
}

fn load_err(what: &'static str) -> impl Fn(String) -> ServiceError {
    move |message| ServiceError::Load { what, message }
}

impl Backend {
    pub fn load(config: &ServiceConfig) -> Result<Self, ServiceError> {
        let mut provider_config = ProviderConfig::from_env().map_err(|e| ServiceError::Config(e.to_string()))?;
        if let Some(mode) = config.provider_mode()? {
            provider_config.mode = mode;
        }
        let fixtures: BTreeMap<String, String> = match &config.stub_fixtures {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| load_err("stub fixtures")(e.to_string()))?;
                serde_json::from_str(&text).map_err(|e| load_err("stub fixtures")(e.to_string()))?
            }
            None => BTreeMap::new(),
        };
        let provider = build_provider(&provider_config, fixtures).map_err(|e| ServiceError::Config(e.to_string()))?;

        let chunks = match &config.corpus {
            Some(path) => {
                let docs = load_corpus(path).map_err(|e| load_err("corpus")(e.to_string()))?;
                let params = ChunkParams { max_tokens: config.max_tokens, ..ChunkParams::default() };
                chunk_corpus(&docs, params).map_err(|e| load_err("corpus")(e.to_string()))?
            }
            None => Vec::new(),
        };
        let index = match &config.index {
            Some(path) => VectorIndex::load(path, &chunks).map_err(|e| load_err("index")(e.to_string()))?,
            None => VectorIndex::build(chunks, provider.as_ref()).map_err(|e| load_err("index")(e.to_string()))?,
        };
        let inventory = match &config.inventory {
            Some(path) => load_inventory(path).map_err(|e| load_err("inventory")(e.to_string()))?,
            None => InventoryStore::new(Vec::new()),
        };
        let ef_db = |path: &Option<std::path::PathBuf>, what| match path {
            Some(p) => load_ef_db(p).map_err(|e| load_err(what)(e.to_string())),
            None => Ok(Vec::new()),
        };
        let mut recommender = EfRecommender::new(
            ef_db(&config.ef_guidelines, "EF guidelines")?,
            ef_db(&config.ef_literature, "EF literature")?,
            EfRecommender::current_year(),
        );
        if let Some(path) = &config.regions {
            recommender.regions = RegionHierarchy::load(path).map_err(|e| load_err("regions")(e.to_string()))?;
        }
        let prompts = match &config.prompts {
            Some(dir) => PromptPack::load_dir(dir).map_err(|e| load_err("prompts")(e.to_string()))?,
            None => PromptPack::default(),
        };
        let benchmark = match &config.benchmark {
            Some(path) => Some(load_benchmark(path).map_err(|e| load_err("benchmark")(e.to_string()))?),
            None => None,
        };
        Ok(Self {
            provider,
            index,
            inventory,
            registry: analysis_registry(),
            prompts,
            recommender,
            agent_config: AgentConfig { top_k: config.top_k, max_retries: config.max_retries },
            benchmark,
        })
    }

    pub fn agent(&self) -> Agent<'_> {
        Agent {
            provider: self.provider.as_ref(),
            index: &self.index,
            registry: &self.registry,
            inventory: &self.inventory,
            prompts: &self.prompts,
            config: self.agent_config,
        }
    }

    /// Retrieval plus grounded answering over each item, scored and aggregated.
    pub fn evaluate(&self, items: &[EvalItem], tau: f64) -> Result<EvalReport, EvalError> {
        let agent = self.agent();
        run_benchmark(items, self.provider.as_ref(), tau, |item| {
            let (answer, contexts) = agent
                .answer_with_contexts(&item.question, &[])
                .map_err(|e| EvalError::Pipeline { item_id: item.item_id.clone(), message: e.to_string() })?;
            Ok((contexts, answer.answer_text))
        })
    }
}

pub struct AppState {
    pub backend: Arc<Backend>,
    pub sessions: SessionStore,
    eval_runs: Mutex<HashMap<String, EvalRunResponse>>,
}

impl AppState {
    pub fn new(backend: Backend, session_ttl: Duration) -> Arc<Self> {
        Arc::new(Self {
            backend: Arc::new(backend),
            sessions: SessionStore::new(session_ttl),
            eval_runs: Mutex::new(HashMap::new()),
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatRequest {
    #[serde(default)]
    pub session_id: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChatResponse {
    pub session_id: String,
    #[serde(flatten)]
    pub turn: ConversationTurn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfResponse {
    pub complete: bool,
    pub missing: Vec<Attribute>,
    pub recommendations: Vec<Recommendation>,
}

impl From<RecommendOutcome> for EfResponse {
    fn from(outcome: RecommendOutcome) -> Self {
        match outcome {
            RecommendOutcome::Missing(missing) => Self { complete: false, missing, recommendations: Vec::new() },
            RecommendOutcome::Recommendations(recommendations) => {
                Self { complete: true, missing: Vec::new(), recommendations }
            }
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalRunRequest {
    /// Items to evaluate; defaults to the configured benchmark.
    #[serde(default)]
    pub items: Option<Vec<EvalItem>>,
    #[serde(default)]
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalRunResponse {
    pub run_id: String,
    pub report: EvalReport,
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/chat", post(chat))
        .route("/api/ef/recommend", post(ef_recommend))
        .route("/api/inventory/query", post(inventory_query))
        .route("/api/eval/run", post(eval_run))
        .route("/api/eval/{run_id}", get(eval_get))
        .layer(CorsLayer::permissive())
        .layer(TraceLayer::new_for_http())
        .with_state(state)
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(format!("worker failed: {e}")))
}

async fn health(State(state): State<Arc<AppState>>) -> Json<Value> {
    let b = &state.backend;
    Json(json!({
        "status": "ok",
        "provider_mode": b.provider.mode(),
        "index_chunks": b.index.len(),
        "inventory_rows": b.inventory.len(),
        "ef_guidelines": b.recommender.guidelines.len(),
        "ef_literature": b.recommender.literature.len(),
        "functions": b.registry.len(),
        "sessions": state.sessions.len(),
    }))
}

async fn chat(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<ChatResponse>, ApiError> {
    let req: ChatRequest = parse_body(&body)?;
    if req.message.trim().is_empty() {
        return Err(ApiError::bad_request("message must not be empty"));
    }
    let mut guard = state.sessions.acquire(req.session_id.as_deref()).await;
    let backend = Arc::clone(&state.backend);
    let (guard, result) = blocking(move || {
        let result = backend.agent().handle(&mut guard.session, &req.message).cloned();
        (guard, result)
    })
    .await?;
    let turn = result?;
    Ok(Json(ChatResponse { session_id: guard.session_id.clone(), turn }))
}

async fn ef_recommend(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<EfResponse>, ApiError> {
    let query: EfQuery = parse_body(&body)?;
    let backend = Arc::clone(&state.backend);
    let outcome = blocking(move || backend.recommender.recommend(&query, backend.provider.as_ref())).await?;
    let outcome = outcome.map_err(|e| ApiError::new(crate::error::ErrorCode::ProviderUnavailable, e.to_string()))?;
    Ok(Json(outcome.into()))
}

async fn inventory_query(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<QueryOutput>, ApiError> {
    let raw: Value = parse_body(&body)?;
    let query = parse_inventory_query(&raw)?;
    let output = query.run(&state.backend.inventory).map_err(inventory_error)?;
    Ok(Json(output))
}

fn check_items(items: &[EvalItem]) -> Result<(), ApiError> {
    if items.is_empty() {
        return Err(ApiError::bad_request("no evaluation items"));
    }
    let mut seen = HashSet::new();
    for item in items {
        item.validate().map_err(|e| ApiError::bad_request(e.to_string()))?;
        if !seen.insert(item.item_id.as_str()) {
            return Err(ApiError::bad_request(format!("duplicate item_id `{}`", item.item_id)));
        }
    }
    Ok(())
}

async fn eval_run(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<EvalRunResponse>, ApiError> {
    let req: EvalRunRequest = if body.is_empty() { EvalRunRequest::default() } else { parse_body(&body)? };
    let tau = req.tau.unwrap_or(DEFAULT_TAU);
    if !(0.0..=1.0).contains(&tau) {
        return Err(ApiError::bad_request("tau must lie in [0, 1]"));
    }
    let items = match req.items {
        Some(items) => items,
        None => state
            .backend
            .benchmark
            .clone()
            .ok_or_else(|| ApiError::bad_request("no items given and no benchmark configured"))?,
    };
    check_items(&items)?;
    let backend = Arc::clone(&state.backend);
    let report = blocking(move || backend.evaluate(&items, tau)).await?.map_err(|e| match e {
        EvalError::Provider(_) | EvalError::Pipeline { .. } => {
            ApiError::new(crate::error::ErrorCode::ProviderUnavailable, e.to_string())
        }
        other => ApiError::internal(other.to_string()),
    })?;
    let response = EvalRunResponse { run_id: uuid::Uuid::new_v4().to_string(), report };
    state
        .eval_runs
        .lock()
        .expect("eval run map poisoned")
        .insert(response.run_id.clone(), response.clone());
    Ok(Json(response))
}

async fn eval_get(
    State(state): State<Arc<AppState>>,
    Path(run_id): Path<String>,
) -> Result<Json<EvalRunResponse>, ApiError> {
    let runs = state.eval_runs.lock().expect("eval run map poisoned");
    runs.get(&run_id)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::not_found(format!("no evaluation run `{run_id}`")))
}
