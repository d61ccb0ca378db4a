use thiserror::Error;

use crate::agents::AgentError;
use crate::domain::CaseViolation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid case: {}", format_violations(.0))]
    InvalidCase(Vec<CaseViolation>),
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("degenerate shape: need at least 2 agents and 2 treatments, got {agents}x{treatments}")]
    DegenerateShape { agents: usize, treatments: usize },
    #[error("agent {agent} failed: {source}")]
    AgentFailure {
        agent: String,
        #[source]
        source: AgentError,
    },
    #[error("unknown role `{0}`")]
    UnknownRole(String),
    #[error("episode already finished")]
    EpisodeDone,
    #[error("replay buffer is empty")]
    EmptyBuffer,
    #[error("insufficient samples: requested {requested}, available {available}")]
    InsufficientSamples { requested: usize, available: usize },
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("state layout mismatch: policy expects {expected} inputs, environment emits {got}")]
    LayoutMismatch { expected: usize, got: usize },
    #[error("configuration: {0}")]
    Config(String),
    #[error("model file: {0}")]
    Model(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable short identifier, used as a machine-readable prefix by the CLI.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidCase(_) => "invalid_case",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::NonFinite(_) => "non_finite",
            Error::DegenerateShape { .. } => "degenerate_shape",
            Error::AgentFailure { .. } => "agent_failure",
            Error::UnknownRole(_) => "unknown_role",
            Error::EpisodeDone => "episode_done",
            Error::EmptyBuffer => "empty_buffer",
            Error::InsufficientSamples { .. } => "insufficient_samples",
            Error::LengthMismatch(_) => "length_mismatch",
            Error::LayoutMismatch { .. } => "layout_mismatch",
            Error::Config(_) => "config",
            Error::Model(_) => "model",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

fn format_violations(v: &[CaseViolation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}
