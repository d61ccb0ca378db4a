use std::collections::BTreeSet;
use std::fmt::Write;

use rand::Rng;

use super::profile::RoleProfile;
use super::scoring::{case_score, derive_factor_scores, generate_concerns, role_preference, InverseMode};
use super::{revise_preferences, AgentError, AgentsConfig, ClinicalAgent, Feedback, InteractionMode, OpinionContext};
use crate::domain::{argmax, cap_reasoning, EvidenceChain, Opinion, PatientCase, Role, TreatmentCatalog};
use crate::evidence::build_chain;
use crate::rng::SimRng;

/// Rule-based stand-in for a role-specialised clinician.
#[derive(Debug, Clone)]
pub struct PolicyAgent {
    id: String,
    profile: RoleProfile,
    revision_rate: f64,
    inverse_mode: InverseMode,
    concern_penalty: f64,
    rng: SimRng,
    base_confidence: Option<f64>,
}

impl PolicyAgent {
    pub fn new(id: String, profile: RoleProfile, cfg: &AgentsConfig, rng: SimRng) -> Self {
        Self {
            id,
            profile,
            revision_rate: cfg.revision_rate,
            inverse_mode: cfg.inverse_mode,
            concern_penalty: cfg.concern_penalty,
            rng,
            base_confidence: None,
        }
    }

    pub fn profile(&self) -> &RoleProfile {
        &self.profile
    }

    /// Raw preferences on `[-1, 1]`: the role formula mapped through `2x − 1`.
    pub fn preferences(&self, case: &PatientCase, catalog: &TreatmentCatalog) -> Vec<f64> {
        let max_cost = catalog.max_cost();
        catalog
            .options
            .iter()
            .map(|t| {
                let scores = derive_factor_scores(&self.profile, case, t, max_cost);
                2.0 * role_preference(&self.profile, &scores, self.inverse_mode) - 1.0
            })
            .collect()
    }

    /// Confidence after the concern penalty, floored at the range minimum.
    fn confidence(&mut self, concerns: usize) -> f64 {
        let [lo, hi] = self.profile.confidence_range;
        let base = match self.base_confidence {
            Some(v) => v,
            None => {
                let v = if hi > lo { self.rng.gen_range(lo..=hi) } else { lo };
                self.base_confidence = Some(v);
                v
            }
        };
        (base - self.concern_penalty * concerns as f64).max(lo)
    }

    fn reasoning(
        &self,
        ctx: &OpinionContext<'_>,
        prefs: &[f64],
        top: usize,
        concerns: &BTreeSet<String>,
        chain: &EvidenceChain,
    ) -> String {
        let treatment = &ctx.catalog.options[top];
        let mut text = String::new();
        let _ = write!(
            text,
            "{} assessment, round {}: favours {} (preference {:.2}). Case score {:.2}.",
            self.profile.role.display_name(),
            ctx.round,
            treatment.name,
            prefs[top],
            case_score(&self.profile, ctx.case),
        );
        let mut factors: Vec<_> = self.profile.decision_factors.iter().collect();
        factors.sort_by(|a, b| b.weight.total_cmp(&a.weight));
        let listed: Vec<String> = factors
            .iter()
            .take(3)
            .map(|f| format!("{} {:.0}% = {:.2}", f.name, f.weight * 100.0, ctx.case.slice_mean(&f.block, f.lo, f.hi)))
            .collect();
        let _ = write!(text, " Leading factors: {}.", listed.join(", "));
        let _ = write!(
            text,
            " Evidence: {} guideline(s), {} literature item(s), GRADE {}.",
            chain.guidelines.len(),
            chain.literature.len(),
            chain.grade.label()
        );
        if concerns.is_empty() {
            text.push_str(" Concerns: none.");
        } else {
            let _ = write!(text, " Concerns: {}.", concerns.iter().cloned().collect::<Vec<_>>().join(", "));
        }
        cap_reasoning(&text)
    }
}

impl ClinicalAgent for PolicyAgent {
    fn id(&self) -> &str {
        &self.id
    }

    fn role(&self) -> Role {
        self.profile.role
    }

    fn generate_opinion(&mut self, ctx: &OpinionContext<'_>) -> Result<Opinion, AgentError> {
        if ctx.previous.is_none() {
            self.base_confidence = None;
        }
        // Later rounds keep the stance reached through revision; only the
        // evidence, concerns and reasoning follow the current top choice.
        let prefs = match ctx.previous {
            Some(prev) => prev.raw_preferences.clone(),
            None => self.preferences(ctx.case, ctx.catalog),
        };
        let top = argmax(&prefs);
        let treatment = &ctx.catalog.options[top];
        let max_cost = ctx.catalog.max_cost();
        let concerns = generate_concerns(&self.profile, ctx.case, treatment, max_cost);
        let confidence = self.confidence(concerns.len());
        let evidence = build_chain(ctx.case, self.profile.role, treatment, ctx.store, ctx.evidence);
        let reasoning = self.reasoning(ctx, &prefs, top, &concerns, &evidence);
        let opinion = Opinion {
            agent_id: self.id.clone(),
            raw_preferences: prefs,
            reasoning,
            confidence,
            concerns,
            evidence,
            round: ctx.round,
        };
        let violations = opinion.violations(ctx.catalog.len());
        if violations.is_empty() {
            Ok(opinion)
        } else {
            Err(AgentError::InvalidOpinion(
                violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "),
            ))
        }
    }

    fn revise_opinion(
        &mut self,
        previous: &Opinion,
        feedback: &Feedback,
        mode: InteractionMode,
    ) -> Result<Opinion, AgentError> {
        let lambda = self.revision_rate * mode.multiplier();
        Ok(Opinion {
            raw_preferences: revise_preferences(&previous.raw_preferences, &feedback.group_mean, lambda),
            ..previous.clone()
        })
    }
}

/// Agent emitting a fixed preference row; revision follows the same
/// dynamics as [`PolicyAgent`]. Used for controlled experiments.
#[derive(Debug, Clone)]
pub struct ScriptedAgent {
    pub id: String,
    pub role: Role,
    pub preferences: Vec<f64>,
    pub confidence: f64,
    pub concerns: BTreeSet<String>,
    pub revision_rate: f64,
}

impl ScriptedAgent {
    pub fn new(id: &str, role: Role, preferences: Vec<f64>, confidence: f64, revision_rate: f64) -> Self {
        Self {
            id: id.to_string(),
            role,
            preferences,
            confidence,
            concerns: BTreeSet::new(),
            revision_rate,
        }
    }
}

impl ClinicalAgent for ScriptedAgent {
    fn id(&self) -> &str {
        &self.id
    }

    fn role(&self) -> Role {
        self.role
    }

    fn generate_opinion(&mut self, ctx: &OpinionContext<'_>) -> Result<Opinion, AgentError> {
        let prefs = match ctx.previous {
            Some(prev) => prev.raw_preferences.clone(),
            None => self.preferences.clone(),
        };
        let top = argmax(&prefs);
        let evidence = match ctx.catalog.options.get(top) {
            Some(t) => build_chain(ctx.case, self.role, t, ctx.store, ctx.evidence),
            None => EvidenceChain::empty(None),
        };
        let opinion = Opinion {
            agent_id: self.id.clone(),
            raw_preferences: prefs,
            reasoning: format!("scripted position for {}", self.role.display_name()),
            confidence: self.confidence,
            concerns: self.concerns.clone(),
            evidence,
            round: ctx.round,
        };
        let violations = opinion.violations(ctx.catalog.len());
        if violations.is_empty() {
            Ok(opinion)
        } else {
            Err(AgentError::InvalidOpinion(
                violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "),
            ))
        }
    }

    fn revise_opinion(
        &mut self,
        previous: &Opinion,
        feedback: &Feedback,
        mode: InteractionMode,
    ) -> Result<Opinion, AgentError> {
        let lambda = self.revision_rate * mode.multiplier();
        Ok(Opinion {
            raw_preferences: revise_preferences(&previous.raw_preferences, &feedback.group_mean, lambda),
            ..previous.clone()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::default_blocks;
    use crate::evidence::{CorpusStore, EvidenceConfig};
    use crate::rng;

    fn case(v: f64) -> PatientCase {
        PatientCase {
            id: "case-7".into(),
            features: vec![v; 247],
            blocks: default_blocks(247),
            hidden_label: None,
            metadata: Default::default(),
        }
    }

    fn ctx<'a>(
        case: &'a PatientCase,
        catalog: &'a TreatmentCatalog,
        store: &'a CorpusStore,
        ev: &'a EvidenceConfig,
    ) -> OpinionContext<'a> {
        OpinionContext {
            case,
            catalog,
            store,
            evidence: ev,
            round: 1,
            previous: None,
            previous_matrix: None,
        }
    }

    #[test]
    fn repeat_generation_is_bitwise_identical() {
        let cfg = AgentsConfig::default();
        let c = case(0.5);
        let catalog = TreatmentCatalog::standard().adjusted_for(&c);
        let store = CorpusStore::empty(2025);
        let ev = EvidenceConfig::default();
        let a = cfg.build_team(11, &c.id)[0].generate_opinion(&ctx(&c, &catalog, &store, &ev)).unwrap();
        let b = cfg.build_team(11, &c.id)[0].generate_opinion(&ctx(&c, &catalog, &store, &ev)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.raw_preferences.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                   b.raw_preferences.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn confidence_within_role_range_without_concerns() {
        let cfg = AgentsConfig::default();
        let c = case(0.5);
        let catalog = TreatmentCatalog::standard().adjusted_for(&c);
        let store = CorpusStore::empty(2025);
        let ev = EvidenceConfig::default();
        for seed in 0..50 {
            for mut agent in cfg.build_team(seed, &c.id) {
                let o = agent.generate_opinion(&ctx(&c, &catalog, &store, &ev)).unwrap();
                assert!(o.concerns.is_empty());
                let [lo, hi] = agent.profile().confidence_range;
                assert!(o.confidence >= lo && o.confidence <= hi);
            }
        }
    }

    #[test]
    fn three_concerns_cost_fifteen_points() {
        use crate::agents::{CaseCondition, Cmp, ConcernRule};
        let mut profile = RoleProfile::standard(Role::Oncologist);
        profile.concern_rules = (0..3)
            .map(|i| ConcernRule {
                code: format!("c{i}"),
                case: CaseCondition {
                    block: "labs".into(),
                    lo: 0.0,
                    hi: 1.0,
                    cmp: Cmp::AtLeast,
                    threshold: 0.0,
                },
                min_toxicity: None,
                min_cost_fraction: None,
            })
            .collect();
        profile.confidence_range = [0.2, 0.95];
        let cfg = AgentsConfig::default();
        let c = case(0.5);
        let catalog = TreatmentCatalog::standard().adjusted_for(&c);
        let store = CorpusStore::empty(2025);
        let ev = EvidenceConfig::default();
        let mut agent = PolicyAgent::new("x".into(), profile, &cfg, rng::seeded(5));
        let o = agent.generate_opinion(&ctx(&c, &catalog, &store, &ev)).unwrap();

        // oracle: first draw of the same stream, minus 3 × 0.05
        let sampled: f64 = rng::seeded(5).gen_range(0.2..=0.95);
        assert_eq!(o.concerns.len(), 3);
        assert!((o.confidence - (sampled - 0.15).max(0.2)).abs() < 1e-15);
    }

    #[test]
    fn maintain_mode_is_identity() {
        let mut agent = ScriptedAgent::new("s", Role::Nurse, vec![0.1, -0.3], 0.8, 0.3);
        let prev = Opinion {
            agent_id: "s".into(),
            raw_preferences: vec![0.1, -0.3],
            reasoning: "r".into(),
            confidence: 0.8,
            concerns: Default::default(),
            evidence: EvidenceChain::empty(None),
            round: 1,
        };
        let fb = Feedback {
            group_mean: vec![1.0, 1.0],
            column_means: vec![0.5, 0.5],
            deviation: vec![0.0, 0.0],
            discordance: 0.0,
        };
        assert_eq!(agent.revise_opinion(&prev, &fb, InteractionMode::MaintainPosition).unwrap(), prev);
        let moved = agent.revise_opinion(&prev, &fb, InteractionMode::RequestClarification).unwrap();
        assert!((moved.raw_preferences[0] - 0.37).abs() < 1e-12);
        assert_eq!(moved.confidence, prev.confidence);
    }
}
