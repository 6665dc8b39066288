//! One game session: a single writer task owns the state, persists every
//! accepted change, then publishes an immutable snapshot for readers.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use forestplay_core::game::{replay, Action, DecisionLog, GameConfig, GameState, LogEvent, PlayerId};
use forestplay_core::outcomes::{score_state, Directions, ScoreReport};
use serde::{Deserialize, Serialize};
use tokio::sync::{mpsc, oneshot, watch};

use crate::error::ApiError;

pub(crate) const SESSION_FILE: &str = "session.json";
pub(crate) const LOG_FILE: &str = "log.json";
pub(crate) const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Lobby,
    Active,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct SeatRecord {
    pub name: String,
    pub token: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct SessionFile {
    pub id: String,
    pub config: GameConfig,
    pub seats: Vec<SeatRecord>,
}

/// Read-only view of a session at one point in its history.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub id: String,
    pub status: Status,
    pub config: GameConfig,
    pub names: Vec<String>,
    tokens: Vec<String>,
    pub state: Option<GameState>,
    pub report: Option<ScoreReport>,
}

impl Snapshot {
    pub fn seat_of(&self, token: &str) -> Option<PlayerId> {
        self.tokens.iter().position(|t| t == token).map(|i| PlayerId(i as u8))
    }

    pub fn events(&self) -> &[LogEvent] {
        self.state.as_ref().map_or(&[], |s| &s.log.events)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Joined {
    pub seat: PlayerId,
    pub token: String,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Accepted {
    /// Sequence number of the last event produced by this action.
    pub seq: usize,
    pub digest: String,
    pub status: Status,
}

enum Command {
    Join {
        name: String,
        reply: oneshot::Sender<Result<Joined, ApiError>>,
    },
    Submit {
        token: String,
        action: Action,
        reply: oneshot::Sender<Result<Accepted, ApiError>>,
    },
}

#[derive(Clone)]
pub struct SessionHandle {
    tx: mpsc::Sender<Command>,
    snapshot: watch::Receiver<Arc<Snapshot>>,
}

impl SessionHandle {
    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.borrow().clone()
    }

    pub fn subscribe(&self) -> watch::Receiver<Arc<Snapshot>> {
        self.snapshot.clone()
    }

    pub async fn join(&self, name: String) -> Result<Joined, ApiError> {
        let (reply, rx) = oneshot::channel();
        self.tx
            .send(Command::Join { name, reply })
            .await
            .map_err(|_| ApiError::Gone)?;
        rx.await.map_err(|_| ApiError::Gone)?
    }

    pub async fn submit(&self, token: String, action: Action) -> Result<Accepted, ApiError> {
        let (reply, rx) = oneshot::channel();
        self.tx
            .send(Command::Submit { token, action, reply })
            .await
            .map_err(|_| ApiError::Gone)?;
        rx.await.map_err(|_| ApiError::Gone)?
    }

    /// Start a new session in the lobby and persist its header.
    pub(crate) async fn create(dir: PathBuf, id: String, config: GameConfig) -> Result<Self, ApiError> {
        config.validate()?;
        tokio::fs::create_dir_all(&dir).await?;
        let file = SessionFile {
            id,
            config,
            seats: Vec::new(),
        };
        write_atomic(&dir.join(SESSION_FILE), &to_doc(&file)).await?;
        Ok(Writer::spawn(dir, file, None))
    }

    /// Rebuild a session from its directory by replaying the stored log.
    pub(crate) async fn restore(dir: PathBuf) -> Result<Self, ApiError> {
        let text = tokio::fs::read_to_string(dir.join(SESSION_FILE)).await?;
        let file: SessionFile = serde_json::from_str(&text).map_err(|e| ApiError::BadRequest(e.to_string()))?;
        let state = match tokio::fs::read_to_string(dir.join(LOG_FILE)).await {
            Ok(text) => Some(replay(&DecisionLog::from_document(&text)?)?),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
            Err(e) => return Err(e.into()),
        };
        Ok(Writer::spawn(dir, file, state))
    }
}

struct Writer {
    dir: PathBuf,
    file: SessionFile,
    state: Option<GameState>,
    report: Option<ScoreReport>,
    publish: watch::Sender<Arc<Snapshot>>,
}

fn to_doc<T: Serialize>(value: &T) -> String {
    forestplay_core::canonical::to_canonical_pretty(value).expect("document serializes")
}

async fn write_atomic(path: &Path, text: &str) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    tokio::fs::write(&tmp, text).await?;
    tokio::fs::rename(&tmp, path).await
}

fn new_token() -> String {
    hex::encode(rand::random::<[u8; 16]>())
}

fn report_for(state: &GameState) -> Option<ScoreReport> {
    state
        .is_finished()
        .then(|| score_state(state, &state.config.coefficients, &Directions::default()))
}

impl Writer {
    fn spawn(dir: PathBuf, file: SessionFile, state: Option<GameState>) -> SessionHandle {
        let report = state.as_ref().and_then(report_for);
        let (publish, snapshot) = watch::channel(Arc::new(Snapshot {
            id: String::new(),
            status: Status::Lobby,
            config: file.config.clone(),
            names: Vec::new(),
            tokens: Vec::new(),
            state: None,
            report: None,
        }));
        let mut writer = Writer {
            dir,
            file,
            state,
            report,
            publish,
        };
        writer.publish();
        let (tx, mut rx) = mpsc::channel(64);
        tokio::spawn(async move {
            while let Some(cmd) = rx.recv().await {
                match cmd {
                    Command::Join { name, reply } => {
                        let _ = reply.send(writer.join(name).await);
                    }
                    Command::Submit { token, action, reply } => {
                        let _ = reply.send(writer.submit(&token, action).await);
                    }
                }
            }
        });
        SessionHandle { tx, snapshot }
    }

    fn status(&self) -> Status {
        match &self.state {
            None => Status::Lobby,
            Some(s) if s.is_finished() => Status::Finished,
            Some(_) => Status::Active,
        }
    }

    fn publish(&mut self) {
        let snap = Snapshot {
            id: self.file.id.clone(),
            status: self.status(),
            config: self.file.config.clone(),
            names: self.file.seats.iter().map(|s| s.name.clone()).collect(),
            tokens: self.file.seats.iter().map(|s| s.token.clone()).collect(),
            state: self.state.clone(),
            report: self.report.clone(),
        };
        self.publish.send_replace(Arc::new(snap));
    }

    async fn persist_game(&self, state: &GameState, report: Option<&ScoreReport>) -> std::io::Result<()> {
        write_atomic(&self.dir.join(LOG_FILE), &state.export_log().to_document()).await?;
        if let Some(report) = report {
            write_atomic(&self.dir.join(REPORT_FILE), &report.to_document()).await?;
        }
        Ok(())
    }

    async fn join(&mut self, name: String) -> Result<Joined, ApiError> {
        let seats = usize::from(self.file.config.player_count);
        if self.state.is_some() || self.file.seats.len() >= seats {
            return Err(ApiError::SessionFull);
        }
        let name = name.trim();
        if name.is_empty() {
            return Err(ApiError::BadRequest("name must not be empty".into()));
        }
        let mut file = self.file.clone();
        let token = new_token();
        file.seats.push(SeatRecord {
            name: name.to_owned(),
            token: token.clone(),
        });
        let seat = PlayerId((file.seats.len() - 1) as u8);
        let state = if file.seats.len() == seats {
            let roster = file.seats.iter().map(|s| s.name.clone()).collect();
            let mut state = GameState::with_roster(file.config.clone(), roster)?;
            state.advance_while_idle()?;
            Some(state)
        } else {
            None
        };
        write_atomic(&self.dir.join(SESSION_FILE), &to_doc(&file)).await?;
        if let Some(state) = &state {
            self.persist_game(state, None).await?;
        }
        self.file = file;
        self.state = state;
        self.publish();
        Ok(Joined {
            seat,
            token,
            status: self.status(),
        })
    }

    async fn submit(&mut self, token: &str, action: Action) -> Result<Accepted, ApiError> {
        let current = match &self.state {
            Some(s) if !s.is_finished() => s,
            _ => return Err(ApiError::NotActive),
        };
        let seat = self
            .file
            .seats
            .iter()
            .position(|s| s.token == token)
            .map(|i| PlayerId(i as u8))
            .ok_or(ApiError::Unauthorized)?;
        if action.actor != seat {
            return Err(ApiError::WrongSeat {
                token_seat: seat,
                actor: action.actor,
            });
        }
        let mut next = current.clone();
        next.apply(action)?;
        next.advance_while_idle()?;
        let report = report_for(&next);
        // Write-ahead: nothing becomes visible until it is on disk.
        self.persist_game(&next, report.as_ref()).await?;
        let accepted = Accepted {
            seq: next.log.events.len(),
            digest: next.digest(),
            status: if next.is_finished() {
                Status::Finished
            } else {
                Status::Active
            },
        };
        self.state = Some(next);
        self.report = report;
        self.publish();
        Ok(accepted)
    }
}
