//! Decision log document and replay.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::risk::RiskCard;

use super::{Action, ConfigError, GameConfig, GamePhase, GameState, PlayerId, RuleError};

pub const LOG_FORMAT: &str = "forestplay-decision-log";
pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub format: String,
    pub version: u32,
    pub config: GameConfig,
    pub seed: u64,
    pub roster: Vec<String>,
}

impl LogHeader {
    pub fn new(config: GameConfig, roster: Vec<String>) -> Self {
        Self {
            format: LOG_FORMAT.to_owned(),
            version: LOG_VERSION,
            seed: config.seed,
            config,
            roster,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogEvent {
    Action(Action),
    CardDrawn { player: PlayerId, card: RiskCard },
    PhaseAdvanced { to: GamePhase },
}

/// Append-only record of a game, sufficient to rebuild it exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionLog {
    pub header: LogHeader,
    pub events: Vec<LogEvent>,
    /// Digest of the state after the last event, stamped when the log is exported.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digest: Option<String>,
}

impl DecisionLog {
    pub fn new(header: LogHeader) -> Self {
        Self {
            header,
            events: Vec::new(),
            digest: None,
        }
    }

    /// Canonical text form: sorted keys, two-space indent, trailing newline.
    pub fn to_document(&self) -> String {
        crate::canonical::to_canonical_pretty(self).expect("log serializes")
    }

    pub fn from_document(text: &str) -> Result<Self, ReplayError> {
        serde_json::from_str(text).map_err(|e| ReplayError::Malformed(e.to_string()))
    }

    /// The same log truncated to its first `n` events, without a digest.
    pub fn prefix(&self, n: usize) -> DecisionLog {
        DecisionLog {
            header: self.header.clone(),
            events: self.events[..n.min(self.events.len())].to_vec(),
            digest: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReplayError {
    #[error("malformed log document: {0}")]
    Malformed(String),
    #[error("unsupported log format {format:?} version {version}")]
    Version { format: String, version: u32 },
    #[error("header seed {header} does not match config seed {config}")]
    SeedMismatch { header: u64, config: u64 },
    #[error("invalid config: {0}")]
    Config(#[from] ConfigError),
    #[error("event {index}: {source}")]
    Illegal {
        index: usize,
        #[source]
        source: RuleError,
    },
    #[error("event {index}: expected {expected:?}, log has {found:?}")]
    Mismatch {
        index: usize,
        expected: Box<LogEvent>,
        found: Box<LogEvent>,
    },
    #[error("event {index}: {found:?} is not produced by the engine at this point")]
    Unexpected { index: usize, found: Box<LogEvent> },
    #[error("log ends at event {index} inside an engine-generated sequence")]
    Truncated { index: usize },
    #[error("final digest {actual} differs from recorded {recorded}")]
    Digest { recorded: String, actual: String },
}

impl ReplayError {
    /// Index of the offending event, when the failure is tied to one.
    pub fn event_index(&self) -> Option<usize> {
        match self {
            ReplayError::Illegal { index, .. }
            | ReplayError::Mismatch { index, .. }
            | ReplayError::Unexpected { index, .. }
            | ReplayError::Truncated { index } => Some(*index),
            _ => None,
        }
    }
}

/// Re-execute `log` from its header and verify every engine-generated event.
pub fn replay(log: &DecisionLog) -> Result<GameState, ReplayError> {
    let header = &log.header;
    if header.format != LOG_FORMAT || header.version != LOG_VERSION {
        return Err(ReplayError::Version {
            format: header.format.clone(),
            version: header.version,
        });
    }
    if header.seed != header.config.seed {
        return Err(ReplayError::SeedMismatch {
            header: header.seed,
            config: header.config.seed,
        });
    }
    let mut state = GameState::with_roster(header.config.clone(), header.roster.clone())?;

    let mut index = 0;
    while index < log.events.len() {
        let event = log.events[index];
        match event {
            LogEvent::Action(action) => {
                state
                    .apply(action)
                    .map_err(|source| ReplayError::Illegal { index, source })?;
            }
            LogEvent::PhaseAdvanced { .. } => {
                state
                    .advance_phase()
                    .map_err(|source| ReplayError::Illegal { index, source })?;
            }
            LogEvent::CardDrawn { .. } => {
                return Err(ReplayError::Unexpected {
                    index,
                    found: Box::new(event),
                })
            }
        }
        // Everything the engine appended must match the log, event for event.
        for (at, expected) in state.log.events.iter().enumerate().skip(index) {
            match log.events.get(at) {
                Some(found) if found == expected => {}
                Some(found) => {
                    return Err(ReplayError::Mismatch {
                        index: at,
                        expected: Box::new(*expected),
                        found: Box::new(*found),
                    })
                }
                None => return Err(ReplayError::Truncated { index: at }),
            }
        }
        index = state.log.events.len();
    }

    if let Some(recorded) = &log.digest {
        let actual = state.digest();
        if &actual != recorded {
            return Err(ReplayError::Digest {
                recorded: recorded.clone(),
                actual,
            });
        }
    }
    Ok(state)
}
