//! HTTP/JSON surface. Every handler takes the platform lock, so writes are
//! applied in arrival order and a success response is only sent after the
//! events behind it are durable.

use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use soo_core::aggregator::AggregationPolicy;
use soo_core::catalog::{AnswerPayload, EiInstance};
use soo_core::model::{EiId, ElementId, ParticipantId, Seq};
use soo_core::participants::{SelfEstimation, StakeholderGroup};

use crate::engine::{Alternative, IntroTestView, Platform, PlatformError};
use crate::stats::{participant_stats, stats};
use crate::views::{MilestoneView, SooView};

pub type Shared = Arc<Mutex<Platform>>;

impl IntoResponse for PlatformError {
    fn into_response(self) -> Response {
        let status = match &self {
            PlatformError::BadRequest(_) => StatusCode::BAD_REQUEST,
            PlatformError::NotFound(_) => StatusCode::NOT_FOUND,
            PlatformError::Conflict(_) => StatusCode::CONFLICT,
            PlatformError::Forbidden(_) => StatusCode::FORBIDDEN,
            PlatformError::Storage(_) | PlatformError::Replay(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        };
        (status, Json(json!({ "error": self.to_string() }))).into_response()
    }
}

type ApiResult<T> = Result<T, PlatformError>;

fn lock(shared: &Shared) -> MutexGuard<'_, Platform> {
    // A panic mid-command leaves state that matches the log up to the last
    // folded event, so the lock stays usable.
    shared.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

pub fn router(platform: Platform) -> Router {
    router_shared(Arc::new(Mutex::new(platform)))
}

pub fn router_shared(shared: Shared) -> Router {
    Router::new()
        .route("/api/goal", post(define_goal))
        .route("/api/participants", post(register))
        .route("/api/participants/{id}/intro-test", post(intro_test))
        .route("/api/participants/{id}/stream", get(stream))
        .route("/api/participants/{id}/stats", get(participant_stats_handler))
        .route("/api/answers", post(submit_answer))
        .route("/api/soo", get(soo))
        .route("/api/soo/milestones", get(milestones))
        .route("/api/soo/milestones/{id}", get(milestone))
        .route(
            "/api/elements/{id}/discussion",
            get(discussion).post(post_discussion),
        )
        .route("/api/stats", get(stats_handler))
        .route("/api/assess", post(assess))
        .route("/api/admin/policy", put(set_policy))
        .route("/api/admin/milestone", post(force_milestone))
        .with_state(shared)
}

/// Serves until the process is stopped.
pub async fn serve(platform: Platform, addr: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(platform)).await
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct GoalRequest {
    title: String,
    #[serde(default)]
    description: String,
    #[serde(default)]
    system_boundaries: String,
}

async fn define_goal(State(s): State<Shared>, Json(req): Json<GoalRequest>) -> ApiResult<impl IntoResponse> {
    let id = lock(&s).define_goal(&req.title, &req.description, &req.system_boundaries)?;
    Ok((StatusCode::CREATED, Json(json!({ "goalId": id }))))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct RegisterRequest {
    name: String,
    stakeholder_group: StakeholderGroup,
    self_estimation: SelfEstimation,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct RegisterResponse {
    participant_id: ParticipantId,
    intro_test: IntroTestView,
}

async fn register(State(s): State<Shared>, Json(req): Json<RegisterRequest>) -> ApiResult<impl IntoResponse> {
    let (participant_id, intro_test) =
        lock(&s).register(&req.name, req.stakeholder_group, req.self_estimation)?;
    Ok((
        StatusCode::CREATED,
        Json(RegisterResponse {
            participant_id,
            intro_test,
        }),
    ))
}

#[derive(Deserialize)]
struct IntroTestRequest {
    choices: Vec<usize>,
}

async fn intro_test(
    State(s): State<Shared>,
    Path(id): Path<u64>,
    Json(req): Json<IntroTestRequest>,
) -> ApiResult<impl IntoResponse> {
    let competency = lock(&s).submit_intro_test(ParticipantId(id), &req.choices)?;
    Ok(Json(json!({ "competency": competency })))
}

#[derive(Deserialize)]
struct StreamQuery {
    count: Option<usize>,
    seed: Option<u64>,
}

#[derive(Serialize)]
struct StreamResponse {
    instances: Vec<EiInstance>,
}

async fn stream(
    State(s): State<Shared>,
    Path(id): Path<u64>,
    Query(q): Query<StreamQuery>,
) -> ApiResult<Json<StreamResponse>> {
    let mut platform = lock(&s);
    // Without a seed the page depends on the log position, which is still
    // reproducible from the log.
    let seed = q.seed.unwrap_or(platform.state().seq);
    let instances = platform.stream(ParticipantId(id), q.count, seed)?;
    Ok(Json(StreamResponse { instances }))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct AnswerRequest {
    ei_id: EiId,
    participant_id: ParticipantId,
    payload: AnswerPayload,
}

async fn submit_answer(State(s): State<Shared>, Json(req): Json<AnswerRequest>) -> ApiResult<impl IntoResponse> {
    let seq: Seq = lock(&s).submit_answer(req.ei_id, req.participant_id, req.payload)?;
    Ok((StatusCode::ACCEPTED, Json(json!({ "seq": seq }))))
}

async fn soo(State(s): State<Shared>) -> Json<SooView> {
    Json(SooView::of(lock(&s).state()))
}

async fn milestones(State(s): State<Shared>) -> Json<Vec<MilestoneView>> {
    let platform = lock(&s);
    Json(
        platform
            .state()
            .tree
            .milestones()
            .iter()
            .map(MilestoneView::from)
            .collect(),
    )
}

async fn milestone(State(s): State<Shared>, Path(id): Path<u64>) -> ApiResult<Json<MilestoneView>> {
    let platform = lock(&s);
    platform
        .state()
        .tree
        .milestones()
        .iter()
        .find(|m| m.id == id)
        .map(|m| Json(MilestoneView::from(m)))
        .ok_or_else(|| PlatformError::NotFound(format!("milestone {id} not found")))
}

async fn discussion(State(s): State<Shared>, Path(id): Path<u64>) -> ApiResult<impl IntoResponse> {
    let posts = lock(&s).discussion(ElementId(id))?;
    Ok(Json(json!({ "posts": posts })))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct DiscussionRequest {
    text: String,
    participant_id: Option<ParticipantId>,
}

async fn post_discussion(
    State(s): State<Shared>,
    Path(id): Path<u64>,
    Json(req): Json<DiscussionRequest>,
) -> ApiResult<impl IntoResponse> {
    let post = lock(&s).post_discussion(ElementId(id), req.participant_id, &req.text)?;
    Ok((StatusCode::CREATED, Json(post)))
}

async fn stats_handler(State(s): State<Shared>) -> impl IntoResponse {
    let mut platform = lock(&s);
    let now = platform.now();
    Json(stats(platform.state(), now))
}

async fn participant_stats_handler(State(s): State<Shared>, Path(id): Path<u64>) -> ApiResult<impl IntoResponse> {
    let mut platform = lock(&s);
    let now = platform.now();
    participant_stats(platform.state(), ParticipantId(id), now)
        .map(Json)
        .ok_or_else(|| PlatformError::NotFound(format!("participant P{id} not found")))
}

#[derive(Deserialize)]
struct AssessRequest {
    alternatives: Vec<Alternative>,
}

#[derive(Serialize)]
struct Ranked {
    name: String,
    score: f64,
}

async fn assess(State(s): State<Shared>, Json(req): Json<AssessRequest>) -> ApiResult<impl IntoResponse> {
    let ranking = lock(&s).assess(&req.alternatives)?;
    let ranking: Vec<Ranked> = ranking
        .into_iter()
        .map(|(name, score)| Ranked { name, score })
        .collect();
    Ok(Json(json!({ "ranking": ranking })))
}

async fn set_policy(State(s): State<Shared>, Json(policy): Json<AggregationPolicy>) -> ApiResult<impl IntoResponse> {
    let seq = lock(&s).set_policy(policy)?;
    Ok(Json(json!({ "seq": seq })))
}

async fn force_milestone(State(s): State<Shared>) -> ApiResult<impl IntoResponse> {
    let id = lock(&s).force_milestone()?;
    Ok((StatusCode::CREATED, Json(json!({ "milestoneId": id }))))
}
