//! Read-mostly HTTP API over a sealed workspace.
//!
//! Pipeline artifacts are loaded once and never written. Labels and
//! adjudications are the only mutable state: each accepted POST appends one
//! line to its log (flushed before the response) while holding the single
//! writer lock, so the on-disk log always replays to the in-memory state.
//!
//! All routes live under `/api` and speak JSON.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::net::SocketAddr;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use liminal_core::centrality::{CentralityScores, LiminalReport};
use liminal_core::classifier::{
    append_adjudication, findings_breakdown, load_classifications, AdjudicationRecord, AdjudicationStore,
    Classification,
};
use liminal_core::community::{modularity, Partition};
use liminal_core::corpus::{load_corpus, Corpus};
use liminal_core::detection::{campaign_report, disruption_candidates, CampaignReport};
use liminal_core::graph::WeightedGraph;
use liminal_core::stratagem::{append_to_log, upsert_label, LabelRecord, LabelStore};
use liminal_core::workspace::{self as ws, Workspace};
use liminal_core::{Error, Result};

pub const DEFAULT_CANDIDATES: usize = 20;

/// Immutable pipeline outputs.
pub struct Artifacts {
    pub corpus: Corpus,
    pub graph: WeightedGraph,
    pub partition: Partition,
    pub scores: CentralityScores,
    pub liminal: LiminalReport,
    pub classifications: Vec<Classification>,
    pub report: CampaignReport,
    tweet_index: HashMap<String, usize>,
    classification_index: HashMap<String, usize>,
}

impl Artifacts {
    pub fn load(workspace: &Workspace) -> Result<Self> {
        let corpus = load_corpus(&workspace.path(ws::CORPUS))?.corpus;
        let graph = WeightedGraph::load(&workspace.path(ws::GRAPH))?;
        let partition = Partition::load(&workspace.path(ws::PARTITION))?;
        let scores = CentralityScores::load(&workspace.path(ws::CENTRALITY))?;
        let liminal = LiminalReport::load(&workspace.path(ws::LIMINAL))?;
        let classifications = load_classifications(&workspace.path(ws::CLASSIFICATIONS))?;
        Self::new(corpus, graph, partition, scores, liminal, classifications)
    }

    pub fn new(
        corpus: Corpus,
        graph: WeightedGraph,
        partition: Partition,
        scores: CentralityScores,
        liminal: LiminalReport,
        classifications: Vec<Classification>,
    ) -> Result<Self> {
        let report = campaign_report(&classifications, &corpus, &graph, &partition, &scores, &liminal)?;
        let tweet_index = corpus.tweets.iter().enumerate().map(|(i, t)| (t.tweet_id.clone(), i)).collect();
        let classification_index =
            classifications.iter().enumerate().map(|(i, c)| (c.tweet_id.clone(), i)).collect();
        Ok(Artifacts {
            corpus,
            graph,
            partition,
            scores,
            liminal,
            classifications,
            report,
            tweet_index,
            classification_index,
        })
    }

    fn flagged_ids(&self) -> HashSet<&str> {
        self.classifications.iter().filter(|c| c.flagged).map(|c| c.tweet_id.as_str()).collect()
    }
}

struct Logs {
    labels: LabelStore,
    adjudications: AdjudicationStore,
}

pub struct AppState {
    workspace: Workspace,
    artifacts: Artifacts,
    logs: Mutex<Logs>,
}

impl AppState {
    /// Refuses workspaces without a valid manifest.
    pub fn open(workspace: Workspace) -> Result<Self> {
        workspace.verify()?;
        let artifacts = Artifacts::load(&workspace)?;
        Self::with_artifacts(workspace, artifacts)
    }

    pub fn with_artifacts(workspace: Workspace, artifacts: Artifacts) -> Result<Self> {
        let labels = LabelStore::read_log(&workspace.path(ws::LABELS))?;
        let adjudications = AdjudicationStore::read_log(&workspace.path(ws::ADJUDICATIONS))?;
        Ok(AppState {
            workspace,
            artifacts,
            logs: Mutex::new(Logs { labels, adjudications }),
        })
    }

    fn logs(&self) -> MutexGuard<'_, Logs> {
        // a panic mid-append leaves the log consistent: append happens before apply
        self.logs.lock().unwrap_or_else(|p| p.into_inner())
    }
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::UnknownTweet(_) | Error::UnknownNode(_) => StatusCode::NOT_FOUND,
            Error::InvalidInput(_) | Error::InvalidConfig(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError(StatusCode::BAD_REQUEST, e.body_text())
    }
}

type ApiResult = std::result::Result<Json<Value>, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/graph", get(graph))
        .route("/api/communities", get(communities))
        .route("/api/centrality", get(centrality))
        .route("/api/flagged", get(flagged))
        .route("/api/tweets/{id}", get(tweet))
        .route("/api/candidates", get(candidates))
        .route("/api/labels", get(labels).post(post_label))
        .route("/api/adjudications", get(adjudications).post(post_adjudication))
        .with_state(state)
}

async fn health(State(s): State<Arc<AppState>>) -> ApiResult {
    let a = &s.artifacts;
    Ok(Json(json!({
        "status": "ok",
        "tweets": a.corpus.tweets.len(),
        "nodes": a.graph.node_count(),
        "communities": a.partition.community_count(),
        "flagged": a.report.flagged_total,
    })))
}

async fn graph(State(s): State<Arc<AppState>>) -> ApiResult {
    let a = &s.artifacts;
    let nodes: Vec<Value> = (0..a.graph.node_count())
        .map(|v| json!({ "id": v, "account": a.graph.label(v), "community": a.partition.community_of(v) }))
        .collect();
    let edges: Vec<Value> = a
        .graph
        .edges()
        .into_iter()
        .map(|(u, v, w)| json!({ "source": u, "target": v, "weight": w }))
        .collect();
    Ok(Json(json!({ "nodes": nodes, "edges": edges })))
}

async fn communities(State(s): State<Arc<AppState>>) -> ApiResult {
    let a = &s.artifacts;
    let q = modularity(&a.graph, &a.partition, 1.0).ok();
    let list: Vec<Value> = a
        .partition
        .communities()
        .iter()
        .enumerate()
        .map(|(c, members)| {
            let accounts: Vec<&str> = members.iter().map(|&v| a.graph.label(v)).collect();
            json!({ "id": c, "members": members, "accounts": accounts })
        })
        .collect();
    Ok(Json(json!({ "modularity": q, "communities": list })))
}

async fn centrality(State(s): State<Arc<AppState>>) -> ApiResult {
    let a = &s.artifacts;
    let relative = a.scores.relative_to_max();
    let scores: Vec<Value> = a
        .scores
        .scores
        .iter()
        .enumerate()
        .map(|(v, b)| json!({ "node": v, "account": a.graph.label(v), "betweenness": b, "relative": relative[v] }))
        .collect();
    Ok(Json(json!({
        "normalized": a.scores.normalized,
        "scores": scores,
        "liminal": a.liminal.ranked,
        "top_fraction": a.liminal.cutoff,
        "candidate_count": a.liminal.candidate_count,
    })))
}

#[derive(Deserialize)]
struct FlaggedQuery {
    min_score: Option<f64>,
}

#[derive(Serialize)]
struct FlaggedRow<'a> {
    tweet_id: &'a str,
    score: f64,
    verdict: Option<liminal_core::classifier::Verdict>,
}

/// Flagged tweets by score descending, with any current verdict.
async fn flagged(State(s): State<Arc<AppState>>, Query(q): Query<FlaggedQuery>) -> ApiResult {
    let min = q.min_score.unwrap_or(0.0);
    if min.is_nan() {
        return Err(ApiError(StatusCode::BAD_REQUEST, "min_score is NaN".into()));
    }
    let logs = s.logs();
    let rows: Vec<FlaggedRow> = s
        .artifacts
        .classifications
        .iter()
        .filter(|c| c.flagged && c.score >= min)
        .map(|c| FlaggedRow {
            tweet_id: &c.tweet_id,
            score: c.score,
            verdict: logs.adjudications.get(&c.tweet_id),
        })
        .collect();
    Ok(Json(serde_json::to_value(rows).expect("rows serialize")))
}

async fn tweet(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let a = &s.artifacts;
    let i = *a.tweet_index.get(&id).ok_or_else(|| ApiError::from(Error::UnknownTweet(id.clone())))?;
    let t = &a.corpus.tweets[i];
    let node = a.graph.index_of(t.author.as_str());
    let classification = a.classification_index.get(&id).map(|&k| &a.classifications[k]);
    let logs = s.logs();
    Ok(Json(json!({
        "tweet": t,
        "author_node": node,
        "community": node.map(|v| a.partition.community_of(v)),
        "classification": classification,
        "label": logs.labels.get(&id),
        "verdict": logs.adjudications.get(&id),
        "candidate": a.report.candidates.iter().find(|c| c.tweet_id == id),
    })))
}

#[derive(Deserialize)]
struct CandidatesQuery {
    k: Option<usize>,
}

async fn candidates(State(s): State<Arc<AppState>>, Query(q): Query<CandidatesQuery>) -> ApiResult {
    let top = disruption_candidates(&s.artifacts.report, q.k.unwrap_or(DEFAULT_CANDIDATES))?;
    Ok(Json(serde_json::to_value(top).expect("candidates serialize")))
}

async fn labels(State(s): State<Arc<AppState>>) -> ApiResult {
    let logs = s.logs();
    let current: &BTreeMap<_, _> = logs.labels.current();
    Ok(Json(json!({
        "revisions": logs.labels.log().len(),
        "positives": logs.labels.positive_count(),
        "labels": current,
    })))
}

async fn post_label(
    State(s): State<Arc<AppState>>,
    body: std::result::Result<Json<LabelRecord>, JsonRejection>,
) -> ApiResult {
    let Json(record) = body?;
    let known: HashSet<&str> = s.artifacts.tweet_index.keys().map(String::as_str).collect();
    if !known.contains(record.tweet_id.as_str()) {
        return Err(Error::UnknownTweet(record.tweet_id).into());
    }
    let mut logs = s.logs();
    append_to_log(&s.workspace.path(ws::LABELS), &record)?;
    let revision = upsert_label(&mut logs.labels, &known, &record.tweet_id.clone(), record.label)?;
    Ok(Json(json!({ "revision": revision, "labels": logs.labels.len() })))
}

async fn adjudications(State(s): State<Arc<AppState>>) -> ApiResult {
    let flagged = s.artifacts.flagged_ids();
    let logs = s.logs();
    Ok(Json(json!({
        "records": logs.adjudications.log(),
        "findings": findings_breakdown(flagged.iter().copied(), &logs.adjudications),
    })))
}

async fn post_adjudication(
    State(s): State<Arc<AppState>>,
    body: std::result::Result<Json<AdjudicationRecord>, JsonRejection>,
) -> ApiResult {
    let Json(record) = body?;
    let flagged = s.artifacts.flagged_ids();
    if !flagged.contains(record.tweet_id.as_str()) {
        let status = if s.artifacts.tweet_index.contains_key(&record.tweet_id) {
            StatusCode::BAD_REQUEST
        } else {
            StatusCode::NOT_FOUND
        };
        return Err(ApiError(status, format!("tweet {:?} is not flagged", record.tweet_id)));
    }
    let mut logs = s.logs();
    append_adjudication(&s.workspace.path(ws::ADJUDICATIONS), &record)?;
    let revision = logs.adjudications.record(&flagged, record)?;
    Ok(Json(json!({
        "revision": revision,
        "findings": findings_breakdown(flagged.iter().copied(), &logs.adjudications),
    })))
}

/// A running server. Dropping it without [`ServiceHandle::shutdown`] leaves
/// the task running until the runtime stops.
pub struct ServiceHandle {
    pub addr: SocketAddr,
    stop: oneshot::Sender<()>,
    task: JoinHandle<std::io::Result<()>>,
}

impl ServiceHandle {
    /// Stops accepting connections and waits for in-flight requests.
    pub async fn shutdown(self) -> std::io::Result<()> {
        let _ = self.stop.send(());
        self.task.await.map_err(std::io::Error::other)?
    }

    /// Resolves when the server exits on its own.
    pub async fn wait(self) -> std::io::Result<()> {
        let _stop = self.stop;
        self.task.await.map_err(std::io::Error::other)?
    }
}

/// Opens the workspace (manifest must verify) and starts serving.
pub async fn serve(workspace: Workspace, addr: SocketAddr) -> Result<ServiceHandle> {
    let state = Arc::new(AppState::open(workspace)?);
    let listener = TcpListener::bind(addr)
        .await
        .map_err(|e| Error::InvalidInput(format!("cannot bind {addr}: {e}")))?;
    let addr = listener
        .local_addr()
        .map_err(|e| Error::InvalidInput(format!("no local address: {e}")))?;
    let (stop, stopped) = oneshot::channel::<()>();
    let app = router(state);
    let task = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = stopped.await;
            })
            .await
    });
    Ok(ServiceHandle { addr, stop, task })
}
