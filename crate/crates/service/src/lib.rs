//! HTTP host for live games.
//!
//! Routes:
//! - `POST /games` with an optional config document creates a session
//! - `POST /games/{id}/join` with `{"name": ..}` claims the next seat and returns its token
//! - `GET /games/{id}/state` returns the public state; with a bearer token it lists that seat's legal actions
//! - `POST /games/{id}/actions` with a bearer token submits one action
//! - `GET /games/{id}/report` returns the score report once the game is finished
//! - `GET /games/{id}/log` returns the decision log once the game is finished
//! - `GET /games/{id}/events` streams log events as server-sent events, resumable via
//!   `?after=N` or `Last-Event-ID`

mod error;
mod session;
mod view;

use std::collections::HashMap;
use std::convert::Infallible;
use std::path::{Path as FsPath, PathBuf};
use std::sync::{Arc, RwLock};

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use forestplay_core::game::{Action, GameConfig};
use futures::stream::{self, Stream, StreamExt};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use error::ApiError;
pub use session::{Accepted, Joined, SessionHandle, Snapshot, Status};
pub use view::{public_config, StateView};

/// Environment variable holding the listen address, e.g. `0.0.0.0:8080`.
pub const BIND_ENV: &str = "FORESTPLAY_BIND";
pub const DEFAULT_BIND: &str = "127.0.0.1:8080";

pub fn bind_addr_from_env() -> String {
    std::env::var(BIND_ENV).unwrap_or_else(|_| DEFAULT_BIND.to_owned())
}

pub(crate) fn canonical_response<T: Serialize>(status: StatusCode, body: &T) -> Response {
    let text = forestplay_core::canonical::to_canonical_string(body).expect("response serializes");
    (
        status,
        [(header::CONTENT_TYPE, HeaderValue::from_static("application/json"))],
        text,
    )
        .into_response()
}

/// All sessions hosted by this process, persisted under one data directory.
pub struct App {
    data_dir: PathBuf,
    sessions: RwLock<HashMap<String, SessionHandle>>,
}

impl App {
    /// Open `data_dir`, restoring every session found there.
    pub async fn open(data_dir: impl Into<PathBuf>) -> Result<Arc<App>, ApiError> {
        let data_dir = data_dir.into();
        tokio::fs::create_dir_all(&data_dir).await?;
        let mut sessions = HashMap::new();
        let mut entries = tokio::fs::read_dir(&data_dir).await?;
        while let Some(entry) = entries.next_entry().await? {
            if entry.file_type().await?.is_dir() && entry.path().join(session::SESSION_FILE).exists() {
                let id = entry.file_name().to_string_lossy().into_owned();
                sessions.insert(id, SessionHandle::restore(entry.path()).await?);
            }
        }
        Ok(Arc::new(App {
            data_dir,
            sessions: RwLock::new(sessions),
        }))
    }

    pub fn data_dir(&self) -> &FsPath {
        &self.data_dir
    }

    pub async fn create(&self, config: GameConfig) -> Result<String, ApiError> {
        let id = hex::encode(rand::random::<[u8; 12]>());
        let handle = SessionHandle::create(self.data_dir.join(&id), id.clone(), config).await?;
        self.sessions.write().expect("session map").insert(id.clone(), handle);
        Ok(id)
    }

    pub fn get(&self, id: &str) -> Result<SessionHandle, ApiError> {
        self.sessions
            .read()
            .expect("session map")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::UnknownSession(id.to_owned()))
    }
}

pub fn router(app: Arc<App>) -> Router {
    Router::new()
        .route("/games", post(create_game))
        .route("/games/{id}/join", post(join_game))
        .route("/games/{id}/state", get(get_state))
        .route("/games/{id}/actions", post(submit_action))
        .route("/games/{id}/report", get(get_report))
        .route("/games/{id}/log", get(get_log))
        .route("/games/{id}/events", get(events))
        .with_state(app)
}

/// Serve `app` on `listener` until the process stops.
pub async fn serve(listener: tokio::net::TcpListener, app: Arc<App>) -> std::io::Result<()> {
    axum::serve(listener, router(app)).await
}

fn bearer(headers: &HeaderMap) -> Option<String> {
    headers
        .get(header::AUTHORIZATION)?
        .to_str()
        .ok()?
        .strip_prefix("Bearer ")
        .map(|t| t.trim().to_owned())
}

async fn create_game(State(app): State<Arc<App>>, body: String) -> Result<Response, ApiError> {
    let mut doc: Value = if body.trim().is_empty() {
        Value::Object(Default::default())
    } else {
        serde_json::from_str(&body).map_err(|e| ApiError::BadRequest(e.to_string()))?
    };
    // An unspecified seed is drawn here so nobody can predict the deck.
    if let Some(obj) = doc.as_object_mut() {
        obj.entry("seed").or_insert_with(|| Value::from(rand::random::<u64>()));
    }
    let config: GameConfig = serde_json::from_value(doc).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let seats = config.player_count;
    let id = app.create(config).await?;
    Ok(canonical_response(
        StatusCode::CREATED,
        &serde_json::json!({"id": id, "status": Status::Lobby, "seats": seats}),
    ))
}

#[derive(Deserialize)]
struct JoinRequest {
    name: String,
}

async fn join_game(
    State(app): State<Arc<App>>,
    Path(id): Path<String>,
    Json(req): Json<JoinRequest>,
) -> Result<Response, ApiError> {
    let joined = app.get(&id)?.join(req.name).await?;
    Ok(canonical_response(StatusCode::OK, &joined))
}

async fn get_state(
    State(app): State<Arc<App>>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let snap = app.get(&id)?.snapshot();
    let seat = match bearer(&headers) {
        Some(token) => Some(snap.seat_of(&token).ok_or(ApiError::Unauthorized)?),
        None => None,
    };
    Ok(canonical_response(StatusCode::OK, &StateView::new(&snap, seat)))
}

async fn submit_action(
    State(app): State<Arc<App>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: String,
) -> Result<Response, ApiError> {
    let handle = app.get(&id)?;
    let token = bearer(&headers).ok_or(ApiError::Unauthorized)?;
    let action: Action = serde_json::from_str(&body).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let accepted = handle.submit(token, action).await?;
    Ok(canonical_response(StatusCode::OK, &accepted))
}

async fn get_report(State(app): State<Arc<App>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let snap = app.get(&id)?.snapshot();
    let report = snap.report.as_ref().ok_or(ApiError::NotFinished)?;
    Ok(canonical_response(StatusCode::OK, report))
}

async fn get_log(State(app): State<Arc<App>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let snap = app.get(&id)?.snapshot();
    match &snap.state {
        Some(state) if state.is_finished() => Ok(canonical_response(StatusCode::OK, &state.export_log())),
        _ => Err(ApiError::NotFinished),
    }
}

#[derive(Deserialize)]
struct EventsQuery {
    after: Option<usize>,
}

#[derive(Serialize)]
struct StreamItem<'a> {
    seq: usize,
    event: &'a forestplay_core::game::LogEvent,
}

/// Log events after `after` as they are accepted, then a final `finished`
/// event once the game is over. Event ids are the 1-based sequence numbers.
async fn events(
    State(app): State<Arc<App>>,
    Path(id): Path<String>,
    Query(query): Query<EventsQuery>,
    headers: HeaderMap,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let handle = app.get(&id)?;
    let resume = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.trim().parse().ok());
    let after = query.after.or(resume).unwrap_or(0);
    let rx = handle.subscribe();

    let batches = stream::unfold(Some((rx, after)), |cursor| async move {
        let (mut rx, mut sent) = cursor?;
        loop {
            let (batch, finished) = {
                let snap = rx.borrow_and_update();
                let events = snap.events();
                let batch: Vec<Event> = events
                    .iter()
                    .enumerate()
                    .skip(sent)
                    .map(|(i, e)| {
                        let data =
                            forestplay_core::canonical::to_canonical_string(&StreamItem { seq: i + 1, event: e })
                                .expect("event serializes");
                        Event::default().id((i + 1).to_string()).event("log_event").data(data)
                    })
                    .collect();
                sent = sent.max(events.len());
                let finished = snap.status == Status::Finished;
                (
                    batch,
                    finished.then(|| snap.state.as_ref().map(|s| s.digest())).flatten(),
                )
            };
            if let Some(digest) = finished {
                let done = serde_json::json!({"seq": sent, "digest": digest}).to_string();
                let mut batch = batch;
                batch.push(Event::default().event("finished").data(done));
                return Some((batch, None));
            }
            if !batch.is_empty() {
                return Some((batch, Some((rx, sent))));
            }
            if rx.changed().await.is_err() {
                return None;
            }
        }
    });
    let stream = batches.flat_map(|batch| stream::iter(batch.into_iter().map(Ok)));
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}
