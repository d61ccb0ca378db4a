use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::evidence::EvidenceChain;

/// Maximum reasoning length, counted in whitespace-separated words.
pub const MAX_REASONING_TOKENS: usize = 512;

/// One agent's structured output for one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Opinion {
    pub agent_id: String,
    /// Preference per treatment on `[-1, 1]` (−1 oppose, 0 neutral, 1 support).
    pub raw_preferences: Vec<f64>,
    pub reasoning: String,
    pub confidence: f64,
    pub concerns: BTreeSet<String>,
    pub evidence: EvidenceChain,
    pub round: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OpinionViolation {
    PreferenceLength { expected: usize, got: usize },
    PreferenceRange { index: usize, value: f64 },
    ConfidenceRange(f64),
    ReasoningTooLong(usize),
    RoundZero,
}

impl std::fmt::Display for OpinionViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::PreferenceLength { expected, got } => {
                write!(f, "expected {expected} preferences, got {got}")
            }
            Self::PreferenceRange { index, value } => {
                write!(f, "preference {index} = {value} not in [-1,1]")
            }
            Self::ConfidenceRange(c) => write!(f, "confidence {c} not in [0,1]"),
            Self::ReasoningTooLong(n) => write!(f, "reasoning has {n} tokens (max {MAX_REASONING_TOKENS})"),
            Self::RoundZero => write!(f, "round must be >= 1"),
        }
    }
}

pub fn token_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Truncate to the token cap, re-joining with single spaces.
pub fn cap_reasoning(text: &str) -> String {
    if token_count(text) <= MAX_REASONING_TOKENS {
        return text.to_string();
    }
    text.split_whitespace()
        .take(MAX_REASONING_TOKENS)
        .collect::<Vec<_>>()
        .join(" ")
}

impl Opinion {
    pub fn violations(&self, n_treatments: usize) -> Vec<OpinionViolation> {
        let mut out = Vec::new();
        if self.raw_preferences.len() != n_treatments {
            out.push(OpinionViolation::PreferenceLength {
                expected: n_treatments,
                got: self.raw_preferences.len(),
            });
        }
        for (index, &value) in self.raw_preferences.iter().enumerate() {
            if !(value.is_finite() && (-1.0..=1.0).contains(&value)) {
                out.push(OpinionViolation::PreferenceRange { index, value });
            }
        }
        if !(self.confidence.is_finite() && (0.0..=1.0).contains(&self.confidence)) {
            out.push(OpinionViolation::ConfidenceRange(self.confidence));
        }
        let tokens = token_count(&self.reasoning);
        if tokens > MAX_REASONING_TOKENS {
            out.push(OpinionViolation::ReasoningTooLong(tokens));
        }
        if self.round == 0 {
            out.push(OpinionViolation::RoundZero);
        }
        out
    }

    /// Index of the most preferred treatment, lowest index on ties.
    pub fn top_choice(&self) -> usize {
        argmax(&self.raw_preferences)
    }
}

/// First index of the maximum; 0 for an empty slice.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
