//! HTTP endpoints: report intake and the console JSON API.

use std::net::SocketAddr;
use std::thread::JoinHandle;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::NaiveDate;
use serde::Deserialize;
use serde_json::json;
use tokio::sync::oneshot;

use crate::console::{ConsoleApi, ConsoleError, GroupBy};
use crate::domain::{UserId, UtcTimestamp};
use crate::ingest::{IngestResponse, IngestionService};
use crate::store::Audience;

#[derive(Clone)]
pub struct AppState {
    pub ingest: IngestionService,
    pub console: ConsoleApi,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sensor", post(sensor))
        .route("/meter", post(meter))
        .route("/health", get(|| async { "ok" }))
        .route("/config/{user_id}", get(sumve_config))
        .route("/api/home/{user_id}", get(home))
        .route("/api/energy/{user_id}", get(energy))
        .route("/api/comfort/{user_id}", post(comfort))
        .route("/api/target/{user_id}", post(target))
        .route("/api/notify", post(notify))
        .route("/api/report", get(report))
        .route("/api/rogue", get(rogue))
        .route("/api/manager/notifications", get(manager_notifications))
        .route("/api/manager/comfort", get(manager_comfort))
        .route("/api/meters/flags", get(meter_flags))
        .with_state(state)
}

struct ApiError(ConsoleError);

impl From<ConsoleError> for ApiError {
    fn from(e: ConsoleError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            ConsoleError::NotFound(_) | ConsoleError::UnknownGroup(_) => StatusCode::NOT_FOUND,
            ConsoleError::OutOfRange(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ConsoleError::Invalid(_) => StatusCode::BAD_REQUEST,
            ConsoleError::Forbidden => StatusCode::FORBIDDEN,
            ConsoleError::Store(_) => StatusCode::SERVICE_UNAVAILABLE,
        };
        (status, Json(json!({ "error": self.0.to_string() }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn plain(r: IngestResponse) -> (StatusCode, String) {
    (StatusCode::from_u16(r.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR), r.body)
}

fn user_id(raw: &str) -> Result<UserId, ApiError> {
    UserId::new(raw).map_err(|e| ApiError(ConsoleError::Invalid(e.to_string())))
}

async fn sensor(State(s): State<AppState>, body: String) -> (StatusCode, String) {
    plain(s.ingest.handle_sensor_post(&body))
}

async fn meter(State(s): State<AppState>, body: String) -> (StatusCode, String) {
    plain(s.ingest.handle_meter_post(&body))
}

async fn sumve_config(State(s): State<AppState>, Path(user): Path<String>) -> Response {
    let r = s.ingest.sumve_config(&user);
    let status = StatusCode::from_u16(r.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    (status, [("content-type", "application/json")], r.body).into_response()
}

async fn home(State(s): State<AppState>, Path(user): Path<String>) -> ApiResult<crate::console::HomeView> {
    Ok(Json(s.console.get_home_view(&user_id(&user)?)?))
}

async fn energy(State(s): State<AppState>, Path(user): Path<String>) -> ApiResult<crate::console::EnergyComparisonView> {
    Ok(Json(s.console.get_energy_comparison(&user_id(&user)?)?))
}

#[derive(Deserialize)]
struct VoteBody {
    value: f64,
}

async fn comfort(
    State(s): State<AppState>,
    Path(user): Path<String>,
    Json(body): Json<VoteBody>,
) -> ApiResult<crate::console::StoredVote> {
    Ok(Json(s.console.submit_comfort_vote(&user_id(&user)?, body.value)?))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct TargetBody {
    target_wh: f64,
}

async fn target(State(s): State<AppState>, Path(user): Path<String>, Json(body): Json<TargetBody>) -> ApiResult<serde_json::Value> {
    s.console.set_target(&user_id(&user)?, body.target_wh)?;
    Ok(Json(json!({ "targetWh": body.target_wh })))
}

#[derive(Deserialize, Default)]
struct Role {
    #[serde(default)]
    manager: bool,
}

#[derive(Deserialize)]
struct NotifyBody {
    audience: Audience,
    text: String,
}

async fn notify(
    State(s): State<AppState>,
    Query(role): Query<Role>,
    Json(body): Json<NotifyBody>,
) -> ApiResult<crate::store::DeliveryRecord> {
    Ok(Json(s.console.post_notification(body.audience, &body.text, role.manager)?))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct ReportQuery {
    group_by: GroupBy,
    from: NaiveDate,
    to: NaiveDate,
    #[serde(default)]
    manager: bool,
}

async fn report(State(s): State<AppState>, Query(q): Query<ReportQuery>) -> ApiResult<Vec<crate::console::ReportRow>> {
    Ok(Json(s.console.manager_energy_report(q.group_by, q.from, q.to, q.manager)?))
}

#[derive(Deserialize)]
struct PeriodQuery {
    from: UtcTimestamp,
    to: UtcTimestamp,
    #[serde(default)]
    manager: bool,
}

async fn rogue(State(s): State<AppState>, Query(q): Query<PeriodQuery>) -> ApiResult<Vec<crate::console::RogueZoneReport>> {
    Ok(Json(s.console.rogue_zones(q.from, q.to)?))
}

async fn manager_notifications(State(s): State<AppState>, Query(role): Query<Role>) -> ApiResult<Vec<crate::store::Notification>> {
    Ok(Json(s.console.manager_notifications(role.manager)?))
}

async fn manager_comfort(State(s): State<AppState>, Query(role): Query<Role>) -> ApiResult<Vec<crate::analytics::ZoneComfortSummary>> {
    Ok(Json(s.console.comfort_summaries(role.manager)?))
}

async fn meter_flags(State(s): State<AppState>, Query(q): Query<PeriodQuery>) -> ApiResult<Vec<crate::console::MeterFlag>> {
    Ok(Json(s.console.meter_flags(q.from, q.to, q.manager)?))
}

/// A server running on its own runtime thread.
pub struct ServerHandle {
    pub addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Stops accepting connections and waits for the server thread.
    pub fn stop(mut self) {
        self.shutdown_now();
    }

    fn shutdown_now(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.shutdown_now();
    }
}

/// Binds `addr` (port 0 picks a free port) and serves on a background thread.
pub fn spawn_server(state: AppState, addr: SocketAddr) -> std::io::Result<ServerHandle> {
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    let listener = runtime.block_on(tokio::net::TcpListener::bind(addr))?;
    let addr = listener.local_addr()?;
    let (tx, rx) = oneshot::channel::<()>();
    let thread = std::thread::spawn(move || {
        runtime.block_on(async move {
            let _ = axum::serve(listener, router(state))
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await;
        });
    });
    Ok(ServerHandle { addr, shutdown: Some(tx), thread: Some(thread) })
}
