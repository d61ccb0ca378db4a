//! Consensus-matrix engine: normalization, confidence weighting, Kendall's W,
//! discordance, the composite objective, voting baselines and the
//! multi-round consultation protocol.

mod baselines;
mod matrix_ops;
mod objective;
mod protocol;

use serde::{Deserialize, Serialize};

pub use baselines::{aggregate_baselines, BaselineWinners};
pub use matrix_ops::{
    argmax_column_sum, build_matrix, discordance, kendall_w, normalize_preferences, rank_row, weight_entry,
};
pub use objective::{consensus_support, evidence_quality, j_breakdown, objective_j, JTerm, ObjectiveWeights};
pub use protocol::{
    apply_feedback, collect_opinions, feedback_for, matrix_from_opinions, run_consultation, ConsultationResult,
    Deliberation, TerminationReason,
};

use crate::agents::InteractionMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConsensusConfig {
    pub w_threshold: f64,
    pub max_rounds: u32,
    pub convergence_tol: f64,
    pub norm_epsilon: f64,
    pub objective_weights: ObjectiveWeights,
    pub tie_correction: bool,
    /// Interaction mode used when feedback is given outside RL control.
    pub feedback_mode: InteractionMode,
}

impl Default for ConsensusConfig {
    fn default() -> Self {
        Self {
            w_threshold: 0.7,
            max_rounds: 3,
            convergence_tol: 0.05,
            norm_epsilon: 1e-6,
            objective_weights: ObjectiveWeights::default(),
            tie_correction: false,
            feedback_mode: InteractionMode::ProvideFeedback,
        }
    }
}

impl ConsensusConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.w_threshold > 0.0 && self.w_threshold < 1.0) {
            return Err(format!("w_threshold {} not in (0,1)", self.w_threshold));
        }
        if self.max_rounds < 1 {
            return Err("max_rounds must be >= 1".into());
        }
        if !(self.norm_epsilon.is_finite() && self.norm_epsilon > 0.0) {
            return Err("norm_epsilon must be positive".into());
        }
        if !(self.convergence_tol.is_finite() && self.convergence_tol >= 0.0) {
            return Err("convergence_tol must be non-negative".into());
        }
        if !self.objective_weights.is_valid() {
            return Err("objective weights must be non-negative and sum to 1".into());
        }
        Ok(())
    }
}
