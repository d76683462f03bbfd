//! Last-meters wayfinding study engine: crossover plans, timed trials,
//! per-volunteer normalisation and improvement statistics, with a durable
//! append-only record log per study.

mod journal;
pub mod plan;
mod service;
mod stats;
mod summary;

use thiserror::Error;

pub use journal::{LogLine, StudyLog, SCHEMA_VERSION};
pub use plan::{Condition, Dataset, ImagePair, ScheduledTrial, StudyPlan, TargetBox};
pub use service::{
    Clock, ManualClock, NextTrial, Session, SessionInfo, StudyService, SystemClock, TrialSubmission,
};
pub use stats::{compute_improvement, normalize_times};
pub use summary::{summarize, DatasetSummary, ExcludedVolunteer, StudySummary, SummaryOptions};

use serde::{Deserialize, Serialize};

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("invalid study plan: {0}")]
    InvalidPlan(String),

    #[error("dataset `{0}` is not observed under both conditions")]
    NotCrossover(String),

    #[error("unknown group `{0}`")]
    UnknownGroup(String),

    #[error("unknown dataset `{0}`")]
    UnknownDataset(String),

    #[error("unknown study `{0}`")]
    UnknownStudy(String),

    #[error("unknown session `{0}`")]
    UnknownSession(String),

    #[error("pair `{0}` is not scheduled for this volunteer")]
    UnassignedPair(String),

    #[error("trial for volunteer `{volunteer_id}` and pair `{pair_id}` already recorded")]
    DuplicateTrial { volunteer_id: String, pair_id: String },

    #[error("volunteer `{0}` already has a session in this study")]
    DuplicateVolunteer(String),

    #[error("started token does not match the trial issued for pair `{0}`")]
    BadToken(String),

    #[error("clock skew: found_at {found_at} precedes shown_at {shown_at}")]
    ClockSkew { shown_at: u64, found_at: u64 },

    #[error("durations are not normalizable: {0}")]
    NotNormalizable(String),

    #[error("mean original time must be positive, got {0}")]
    NonPositiveBaseline(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("corrupt study log {path}: line {line}: {reason}")]
    CorruptLog { path: String, line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Click {
    pub x: f64,
    pub y: f64,
}

/// One timed search: from the server-side image delivery to the Found
/// submission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub volunteer_id: String,
    pub pair_id: String,
    pub dataset: String,
    pub condition: Condition,
    pub shown_at_ms: u64,
    pub found_at_ms: u64,
    pub duration_ms: u64,
    pub click: Click,
    pub hit: bool,
    /// Duration measured by the client, kept for skew diagnostics only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub client_duration_ms: Option<u64>,
}

impl TrialRecord {
    /// Builds a record, deriving the duration and validating the clock.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        volunteer_id: impl Into<String>,
        pair_id: impl Into<String>,
        dataset: impl Into<String>,
        condition: Condition,
        shown_at_ms: u64,
        found_at_ms: u64,
        click: Click,
        hit: bool,
    ) -> Result<Self, StudyError> {
        if found_at_ms < shown_at_ms {
            return Err(StudyError::ClockSkew {
                shown_at: shown_at_ms,
                found_at: found_at_ms,
            });
        }
        Ok(TrialRecord {
            volunteer_id: volunteer_id.into(),
            pair_id: pair_id.into(),
            dataset: dataset.into(),
            condition,
            shown_at_ms,
            found_at_ms,
            duration_ms: found_at_ms - shown_at_ms,
            click,
            hit,
            client_duration_ms: None,
        })
    }
}
