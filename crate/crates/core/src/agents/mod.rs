//! Role-specialised opinion generators and the agent contract used by the
//! consultation protocol.

mod external;
mod policy;
mod profile;
mod scoring;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use external::{parse_response, ExternalAgent, ExternalRequest, ExternalResponse, ProcessTransport, Transport};
pub use policy::{PolicyAgent, ScriptedAgent};
pub use profile::{
    Attr, CaseCondition, Cmp, ConcernRule, DecisionFactor, FactorSpec, PreferenceTerm, RoleProfile, Transform,
    WeightedAttr,
};
pub use scoring::{case_score, derive_factor_scores, generate_concerns, role_preference, FactorScores, InverseMode};

use crate::domain::{ConsensusMatrix, Opinion, PatientCase, Role, TreatmentCatalog};
use crate::evidence::{CorpusStore, EvidenceConfig};

/// How feedback is delivered to a discordant agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionMode {
    EncourageConsensus,
    RequestClarification,
    ProvideFeedback,
    MaintainPosition,
}

impl InteractionMode {
    pub const ALL: [InteractionMode; 4] = [
        InteractionMode::EncourageConsensus,
        InteractionMode::RequestClarification,
        InteractionMode::ProvideFeedback,
        InteractionMode::MaintainPosition,
    ];

    /// Scale applied to the base revision rate.
    pub fn multiplier(self) -> f64 {
        match self {
            InteractionMode::EncourageConsensus => 1.5,
            InteractionMode::RequestClarification => 1.0,
            InteractionMode::ProvideFeedback => 1.25,
            InteractionMode::MaintainPosition => 0.0,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("no response within {0:?}")]
    Timeout(Duration),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("range violation: {0}")]
    RangeViolation(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("invalid opinion: {0}")]
    InvalidOpinion(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentsConfig {
    /// Base opinion revision rate λ before the interaction-mode multiplier.
    pub revision_rate: f64,
    pub inverse_mode: InverseMode,
    /// Confidence reduction per documented concern.
    pub concern_penalty: f64,
    /// Team composition, one agent per entry.
    pub roles: Vec<Role>,
    /// Replacement profiles; roles without one use the standard profile.
    pub profiles: Vec<RoleProfile>,
}

impl Default for AgentsConfig {
    fn default() -> Self {
        Self {
            revision_rate: 0.3,
            inverse_mode: InverseMode::Bounded,
            concern_penalty: 0.05,
            roles: Role::ALL.to_vec(),
            profiles: Vec::new(),
        }
    }
}

impl AgentsConfig {
    pub fn profile(&self, role: Role) -> RoleProfile {
        self.profiles
            .iter()
            .find(|p| p.role == role)
            .cloned()
            .unwrap_or_else(|| RoleProfile::standard(role))
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.revision_rate) {
            return Err(format!("revision_rate {} not in [0,1]", self.revision_rate));
        }
        if !(0.0..=1.0).contains(&self.concern_penalty) {
            return Err(format!("concern_penalty {} not in [0,1]", self.concern_penalty));
        }
        for p in &self.profiles {
            p.validate()?;
        }
        Ok(())
    }

    /// Agent id for the `i`-th team member, e.g. `a1-Oncologist`.
    pub fn agent_id(&self, i: usize) -> String {
        format!("a{}-{}", i + 1, self.roles[i])
    }

    /// Instantiate the rule-based team for one case. Each agent draws from
    /// its own stream keyed by `(master_seed, case_id, agent_id)`.
    pub fn build_team(&self, master_seed: u64, case_id: &str) -> Vec<PolicyAgent> {
        (0..self.roles.len())
            .map(|i| {
                let id = self.agent_id(i);
                let rng = crate::rng::stream(master_seed, &[case_id.into(), id.as_str().into()]);
                PolicyAgent::new(id, self.profile(self.roles[i]), self, rng)
            })
            .collect()
    }
}

/// Everything an agent sees when forming an opinion.
pub struct OpinionContext<'a> {
    pub case: &'a PatientCase,
    /// Case-adjusted treatment catalog.
    pub catalog: &'a TreatmentCatalog,
    pub store: &'a CorpusStore,
    pub evidence: &'a EvidenceConfig,
    pub round: u32,
    /// This agent's opinion from the previous round.
    pub previous: Option<&'a Opinion>,
    pub previous_matrix: Option<&'a ConsensusMatrix<f64>>,
}

/// Feedback addressed to one discordant agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feedback {
    /// Mean raw preference per treatment across the team, on `[-1, 1]`.
    pub group_mean: Vec<f64>,
    /// Consensus-matrix column means.
    pub column_means: Vec<f64>,
    /// This agent's matrix row minus the column means.
    pub deviation: Vec<f64>,
    pub discordance: f64,
}

/// `p_new = (1 − λ)·p_old + λ·mean` per treatment, with `λ` clipped to `[0, 1]`.
pub fn revise_preferences(old: &[f64], group_mean: &[f64], lambda: f64) -> Vec<f64> {
    let lambda = lambda.clamp(0.0, 1.0);
    if lambda == 0.0 {
        return old.to_vec();
    }
    if lambda == 1.0 {
        return group_mean.to_vec();
    }
    old.iter()
        .zip(group_mean)
        .map(|(&p, &m)| ((1.0 - lambda) * p + lambda * m).clamp(-1.0, 1.0))
        .collect()
}

pub trait ClinicalAgent: Send {
    fn id(&self) -> &str;

    fn role(&self) -> Role;

    fn generate_opinion(&mut self, ctx: &OpinionContext<'_>) -> Result<Opinion, AgentError>;

    /// Move toward the group after being flagged discordant. `Maintain`
    /// returns `previous` unchanged.
    fn revise_opinion(
        &mut self,
        previous: &Opinion,
        feedback: &Feedback,
        mode: InteractionMode,
    ) -> Result<Opinion, AgentError>;
}

impl ClinicalAgent for Box<dyn ClinicalAgent> {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn role(&self) -> Role {
        (**self).role()
    }

    fn generate_opinion(&mut self, ctx: &OpinionContext<'_>) -> Result<Opinion, AgentError> {
        (**self).generate_opinion(ctx)
    }

    fn revise_opinion(
        &mut self,
        previous: &Opinion,
        feedback: &Feedback,
        mode: InteractionMode,
    ) -> Result<Opinion, AgentError> {
        (**self).revise_opinion(previous, feedback, mode)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn revision_spot_values() {
        assert_eq!(revise_preferences(&[0.0], &[1.0], 0.3), vec![0.3]);
        assert_eq!(revise_preferences(&[0.2, -0.4], &[1.0, 0.5], 0.0), vec![0.2, -0.4]);
        assert_eq!(revise_preferences(&[0.2, -0.4], &[1.0, 0.5], 1.0), vec![1.0, 0.5]);
        assert_eq!(revise_preferences(&[0.2], &[1.0], 3.0), vec![1.0]);
    }

    #[test]
    fn mode_multipliers() {
        let rates: Vec<f64> = InteractionMode::ALL.iter().map(|m| 0.3 * m.multiplier()).collect();
        assert!((rates[0] - 0.45).abs() < 1e-15);
        assert_eq!(rates[3], 0.0);
        for m in InteractionMode::ALL {
            assert_eq!(InteractionMode::from_index(m.index()), Some(m));
        }
    }

    #[test]
    fn team_ids_follow_roles() {
        let cfg = AgentsConfig::default();
        assert_eq!(cfg.agent_id(0), "a1-Oncologist");
        assert_eq!(cfg.build_team(1, "c").len(), 7);
    }
}
