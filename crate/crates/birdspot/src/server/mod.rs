//! HTTP/JSON service over the engine.
//!
//! Commands for one player (and the hikes inside that player's record) or
//! one verification session are serialized by a per-entity mutex. Engine
//! lookups go through an `Arc` snapshot that [`AppState::swap_engine`]
//! replaces atomically.

pub mod error;
pub mod idempotency;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use birdspot_core::game::{GameEvent, HikeReport, PlayerRecord};
use birdspot_core::geo::{GeoPoint, Route};
use birdspot_core::ingest::canonicalize_species;
use birdspot_core::suggester::Suggestion;
use birdspot_core::verifier::{Answer, Status, VerificationSession};
use birdspot_core::PrimitiveDateTime;
use serde::{Deserialize, Serialize};

use crate::engine::Engine;
use crate::events::{append_event, LogLine};
use crate::formats::parse_timestamp;
pub use error::{ApiError, ApiJson, ErrorCode};
use idempotency::IdempotencyStore;

type Registry<T> = RwLock<HashMap<String, Arc<Mutex<T>>>>;

struct PlayerEntry {
    record: PlayerRecord,
    log: Vec<LogLine>,
}

struct HikeInfo {
    player_id: String,
    route: Arc<Route>,
    start: PrimitiveDateTime,
    level_at_start: u32,
}

struct SessionEntry {
    session: VerificationSession,
    player_id: String,
    hike_id: String,
}

struct Shared {
    engine: RwLock<Arc<Engine>>,
    players: Registry<PlayerEntry>,
    sessions: Registry<SessionEntry>,
    routes: RwLock<HashMap<String, Arc<Route>>>,
    hikes: RwLock<HashMap<String, Arc<HikeInfo>>>,
    counter: AtomicU64,
    events_dir: Option<PathBuf>,
}

#[derive(Clone)]
pub struct AppState {
    shared: Arc<Shared>,
}

fn lookup<T: Clone>(map: &RwLock<HashMap<String, T>>, what: &str, id: &str) -> Result<T, ApiError> {
    map.read()
        .expect("registry lock")
        .get(id)
        .cloned()
        .ok_or_else(|| ApiError::not_found(what, id))
}

impl AppState {
    /// `events_dir`, when set, receives one `<player_id>.jsonl` log per player.
    pub fn new(engine: Engine, events_dir: Option<PathBuf>) -> Self {
        Self {
            shared: Arc::new(Shared {
                engine: RwLock::new(Arc::new(engine)),
                players: RwLock::default(),
                sessions: RwLock::default(),
                routes: RwLock::default(),
                hikes: RwLock::default(),
                counter: AtomicU64::new(0),
                events_dir,
            }),
        }
    }

    pub fn engine(&self) -> Arc<Engine> {
        self.shared.engine.read().expect("engine lock").clone()
    }

    pub fn swap_engine(&self, engine: Engine) {
        *self.shared.engine.write().expect("engine lock") = Arc::new(engine);
    }

    fn next_id(&self, prefix: &str) -> String {
        format!("{prefix}{}", self.shared.counter.fetch_add(1, Ordering::Relaxed) + 1)
    }

    /// Event log of a player, as applied so far.
    pub fn player_log(&self, player_id: &str) -> Option<Vec<LogLine>> {
        let entry = lookup(&self.shared.players, "player", player_id).ok()?;
        let log = entry.lock().expect("player lock").log.clone();
        Some(log)
    }

    fn with_player<R>(
        &self,
        player_id: &str,
        f: impl FnOnce(&mut PlayerEntry) -> Result<R, ApiError>,
    ) -> Result<R, ApiError> {
        let entry = lookup(&self.shared.players, "player", player_id)?;
        let mut guard = entry.lock().expect("player lock");
        f(&mut guard)
    }

    fn hike(&self, id: &str) -> Result<Arc<HikeInfo>, ApiError> {
        lookup(&self.shared.hikes, "hike", id)
    }

    /// Validate and apply `event`, then record it in the log.
    fn apply(&self, entry: &mut PlayerEntry, ts: PrimitiveDateTime, event: GameEvent) -> Result<u64, ApiError> {
        let gained = entry.record.apply(ts, &event)?;
        let line = LogLine::new(ts, event);
        if let Some(dir) = &self.shared.events_dir {
            let path = dir.join(format!("{}.jsonl", entry.record.player.id));
            append_event(&path, &line).map_err(|e| ApiError::engine(e.to_string()))?;
        }
        entry.log.push(line);
        Ok(gained)
    }
}

pub fn router(state: AppState) -> Router {
    let store = Arc::new(IdempotencyStore::default());
    Router::new()
        .route("/health", get(health))
        .route("/players", post(create_player))
        .route("/players/{id}", get(get_player))
        .route("/routes", post(create_route))
        .route("/hikes", post(create_hike))
        .route("/hikes/{id}/position", post(post_position))
        .route("/hikes/{id}/sightings", post(post_sighting))
        .route("/hikes/{id}/finish", post(finish_hike))
        .route("/verification/{session_id}/answer", post(post_answer))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, ErrorCode::NotFound, "no such endpoint") })
        .method_not_allowed_fallback(|| async {
            ApiError::new(StatusCode::METHOD_NOT_ALLOWED, ErrorCode::BadRequest, "method not allowed")
        })
        .layer(axum::middleware::from_fn_with_state(store, idempotency::middleware))
        .with_state(state)
}

/// Serve until Ctrl-C, then let in-flight requests finish.
pub async fn serve(state: AppState, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
}

async fn health() -> Json<Health> {
    Json(Health { status: "ok".into() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerView {
    pub player_id: String,
    pub points: u64,
    pub level: u32,
    pub captures: Vec<String>,
}

impl PlayerView {
    fn of(record: &PlayerRecord) -> Self {
        let p = &record.player;
        Self {
            player_id: p.id.clone(),
            points: p.points,
            level: p.level,
            captures: p.captures.iter().cloned().collect(),
        }
    }
}

async fn create_player(State(state): State<AppState>) -> (StatusCode, Json<PlayerView>) {
    let id = state.next_id("p");
    let record = PlayerRecord::new(id.clone());
    let view = PlayerView::of(&record);
    let entry = PlayerEntry { record, log: Vec::new() };
    state
        .shared
        .players
        .write()
        .expect("registry lock")
        .insert(id, Arc::new(Mutex::new(entry)));
    (StatusCode::CREATED, Json(view))
}

async fn get_player(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<PlayerView>, ApiError> {
    state.with_player(&id, |p| Ok(Json(PlayerView::of(&p.record))))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RouteCreated {
    pub route_id: String,
    pub length_km: f64,
}

async fn create_route(
    State(state): State<AppState>,
    ApiJson(route): ApiJson<Route>,
) -> (StatusCode, Json<RouteCreated>) {
    let id = state.next_id("r");
    let length_km = route.length_km();
    state
        .shared
        .routes
        .write()
        .expect("registry lock")
        .insert(id.clone(), Arc::new(route));
    (StatusCode::CREATED, Json(RouteCreated { route_id: id, length_km }))
}

fn parse_ts(s: &str) -> Result<PrimitiveDateTime, ApiError> {
    parse_timestamp(s).map_err(ApiError::bad_request)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NewHike {
    pub player_id: String,
    pub route_id: String,
    /// Start time; defaults to the current UTC time.
    #[serde(default)]
    pub ts: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct HikeCreated {
    pub hike_id: String,
}

async fn create_hike(
    State(state): State<AppState>,
    ApiJson(req): ApiJson<NewHike>,
) -> Result<(StatusCode, Json<HikeCreated>), ApiError> {
    let route = lookup(&state.shared.routes, "route", &req.route_id)?;
    let start = match &req.ts {
        Some(ts) => parse_ts(ts)?,
        None => {
            let now = time::OffsetDateTime::now_utc();
            PrimitiveDateTime::new(now.date(), now.time())
        }
    };
    let hike_id = state.next_id("h");
    let level = state.with_player(&req.player_id, |p| {
        state.apply(
            p,
            start,
            GameEvent::HikeStart {
                hike_id: hike_id.clone(),
                route: (*route).clone(),
            },
        )?;
        Ok(p.record.player.level)
    })?;
    let info = HikeInfo {
        player_id: req.player_id,
        route,
        start,
        level_at_start: level,
    };
    state
        .shared
        .hikes
        .write()
        .expect("registry lock")
        .insert(hike_id.clone(), Arc::new(info));
    Ok((StatusCode::CREATED, Json(HikeCreated { hike_id })))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PositionUpdate {
    pub lat: f64,
    pub lon: f64,
    pub ts: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PositionResponse {
    pub suggestions: Vec<Suggestion>,
}

/// Too little nearby data is not an error here: the hiker simply gets no
/// suggestions at this spot.
async fn post_position(
    State(state): State<AppState>,
    Path(hike_id): Path<String>,
    ApiJson(req): ApiJson<PositionUpdate>,
) -> Result<Json<PositionResponse>, ApiError> {
    let hike = state.hike(&hike_id)?;
    let ts = parse_ts(&req.ts)?;
    let point = GeoPoint::new(req.lat, req.lon).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let engine = state.engine();
    state.with_player(&hike.player_id, |p| {
        state.apply(
            p,
            ts,
            GameEvent::Position {
                hike_id: hike_id.clone(),
                lat: req.lat,
                lon: req.lon,
            },
        )?;
        let suggestions = engine.suggest_or_empty(point, ts, p.record.player.level)?;
        Ok(Json(PositionResponse { suggestions }))
    })
}

/// A 0/1 or boolean photo attribute.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bit {
    Bool(bool),
    Int(u8),
}

impl Bit {
    fn value(self) -> Result<bool, ApiError> {
        match self {
            Self::Bool(b) => Ok(b),
            Self::Int(0) => Ok(false),
            Self::Int(1) => Ok(true),
            Self::Int(n) => Err(ApiError::bad_request(format!("photo attribute {n} is not 0 or 1"))),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NewSighting {
    pub claimed_species: String,
    pub photo_attributes: Vec<Bit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub question: Option<String>,
    pub status: Status,
    pub posterior_claimed: f64,
}

impl SessionView {
    fn of(s: &VerificationSession) -> Self {
        Self {
            session_id: s.id.clone(),
            question: s.pending_question().map(str::to_string),
            status: s.status(),
            posterior_claimed: s.posterior_claimed(),
        }
    }
}

fn ensure_active(record: &PlayerRecord, hike_id: &str) -> Result<(), ApiError> {
    match record.hikes.get(hike_id) {
        Some(h) if h.status() == birdspot_core::game::HikeStatus::Active => Ok(()),
        Some(_) => Err(ApiError::conflict(format!("hike `{hike_id}` is already finished"))),
        None => Err(ApiError::not_found("hike", hike_id)),
    }
}

async fn post_sighting(
    State(state): State<AppState>,
    Path(hike_id): Path<String>,
    ApiJson(req): ApiJson<NewSighting>,
) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let hike = state.hike(&hike_id)?;
    state.with_player(&hike.player_id, |p| ensure_active(&p.record, &hike_id))?;
    let claimed = canonicalize_species(&req.claimed_species).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let photo = req.photo_attributes.iter().map(|b| b.value()).collect::<Result<Vec<_>, _>>()?;
    let session_id = state.next_id("v");
    let mut session = state.engine().open_verification(session_id.clone(), &claimed, &photo)?;
    session.next_question()?;
    let view = SessionView::of(&session);
    let entry = SessionEntry {
        session,
        player_id: hike.player_id.clone(),
        hike_id,
    };
    state
        .shared
        .sessions
        .write()
        .expect("registry lock")
        .insert(session_id, Arc::new(Mutex::new(entry)));
    Ok((StatusCode::CREATED, Json(view)))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AnswerRequest {
    pub attribute: String,
    pub answer: Answer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerResponse {
    pub question: Option<String>,
    pub status: Status,
    pub posterior_claimed: f64,
    pub points_awarded: u64,
    pub points: u64,
    pub level: u32,
}

async fn post_answer(
    State(state): State<AppState>,
    Path(session_id): Path<String>,
    ApiJson(req): ApiJson<AnswerRequest>,
) -> Result<Json<AnswerResponse>, ApiError> {
    let entry = lookup(&state.shared.sessions, "verification session", &session_id)?;
    let mut guard = entry.lock().expect("session lock");
    let SessionEntry {
        session,
        player_id,
        hike_id,
    } = &mut *guard;
    state.with_player(player_id, |p| {
        ensure_active(&p.record, hike_id)?;
        let status = session.submit_answer(&req.attribute, req.answer)?;
        let mut points_awarded = 0;
        match status {
            Status::Open => {
                session.next_question()?;
            }
            Status::Verified => {
                let species = session.claimed_species().to_string();
                let tier = state
                    .engine()
                    .rarity()
                    .tier(&species)
                    .ok_or_else(|| ApiError::engine(format!("no rarity entry for `{species}`")))?;
                let ts = p
                    .record
                    .hikes
                    .get(hike_id.as_str())
                    .and_then(|h| h.trace().last_timestamp())
                    .unwrap_or(state.hike(hike_id)?.start);
                let event = GameEvent::Capture {
                    species,
                    tier,
                    hike_id: Some(hike_id.clone()),
                };
                points_awarded = state.apply(p, ts, event)?;
            }
            Status::Rejected | Status::Inconclusive => {}
        }
        Ok(Json(AnswerResponse {
            question: session.pending_question().map(str::to_string),
            status,
            posterior_claimed: session.posterior_claimed(),
            points_awarded,
            points: p.record.player.points,
            level: p.record.player.level,
        }))
    })
}

async fn finish_hike(State(state): State<AppState>, Path(hike_id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    let hike = state.hike(&hike_id)?;
    let engine = state.engine();
    let expected = engine.expected_species(&hike.route, hike.start, hike.level_at_start)?;
    let report: HikeReport = state.with_player(&hike.player_id, |p| {
        ensure_active(&p.record, &hike_id)?;
        let ts = p
            .record
            .hikes
            .get(&hike_id)
            .and_then(|h| h.trace().last_timestamp())
            .unwrap_or(hike.start);
        state.apply(
            p,
            ts,
            GameEvent::HikeFinish {
                hike_id: hike_id.clone(),
                expected_species: expected,
            },
        )?;
        Ok(p.record.reports[&hike_id].clone())
    })?;
    Ok(Json(report))
}
