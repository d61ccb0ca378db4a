use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::env::{Discretizer, Env, Step};
use super::{reward, RewardWeights, RlAction, MODES};
use crate::agents::{AgentsConfig, InteractionMode, PolicyAgent};
use crate::consensus::{
    apply_feedback, argmax_column_sum, collect_opinions, discordance, matrix_from_opinions, ConsensusConfig,
    Deliberation,
};
use crate::domain::{
    AuditEvent, AuditLog, AuditRecord, AuditSink, Clock, ConsensusMatrix, FixedClock, MemorySink, NullSink, Opinion,
    PatientCase, StateLayout, TreatmentCatalog, SYSTEM_AGENT,
};
use crate::error::{Error, Result};
use crate::evidence::{CorpusStore, EvidenceConfig};
use crate::rng::{stream, SimRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    /// Acceptance probability for improving, neutral and harmful actions.
    pub acceptance: [f64; 3],
    pub reward: RewardWeights,
    /// W buckets of the tabular discretisation.
    pub w_buckets: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            acceptance: [0.8, 0.6, 0.3],
            reward: RewardWeights::default(),
            w_buckets: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionEffect {
    Improve,
    Maintain,
    Reduce,
}

impl ActionEffect {
    fn index(self) -> usize {
        match self {
            ActionEffect::Improve => 0,
            ActionEffect::Maintain => 1,
            ActionEffect::Reduce => 2,
        }
    }
}

/// Expected effect of a feedback mode given whether anyone is flagged.
pub fn classify_action(mode: InteractionMode, any_flagged: bool) -> ActionEffect {
    match mode {
        InteractionMode::EncourageConsensus | InteractionMode::ProvideFeedback if any_flagged => ActionEffect::Improve,
        InteractionMode::MaintainPosition => ActionEffect::Reduce,
        _ => ActionEffect::Maintain,
    }
}

/// Outcome of one finished episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub case_id: String,
    pub hidden_label: Option<usize>,
    pub rounds: u32,
    pub steps: usize,
    pub final_w: f64,
    pub consensus: bool,
    pub recommendation: usize,
    pub total_reward: f64,
    pub w_history: Vec<f64>,
}

#[derive(Clone)]
struct Snapshot {
    catalog: TreatmentCatalog,
    team: Vec<PolicyAgent>,
    opinions: Vec<Opinion>,
    matrix: ConsensusMatrix<f64>,
}

struct Episode {
    case_idx: usize,
    catalog: TreatmentCatalog,
    team: Vec<PolicyAgent>,
    opinions: Vec<Opinion>,
    matrix: ConsensusMatrix<f64>,
    rng: SimRng,
    done: bool,
    steps: usize,
    total_reward: f64,
    w_history: Vec<f64>,
}

/// The deliberation process as an MDP. One step is one feedback round
/// chosen by the meta-controller.
pub struct ConsensusEnv {
    cases: Arc<Vec<PatientCase>>,
    seed: u64,
    agents: AgentsConfig,
    consensus: ConsensusConfig,
    evidence: EvidenceConfig,
    store: Arc<CorpusStore>,
    catalog: TreatmentCatalog,
    config: EnvConfig,
    layout: StateLayout,
    cache: Vec<Option<Snapshot>>,
    episode: Option<Episode>,
    clock: FixedClock,
    audit: Option<MemorySink>,
}

impl ConsensusEnv {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        cases: Arc<Vec<PatientCase>>,
        seed: u64,
        agents: AgentsConfig,
        consensus: ConsensusConfig,
        evidence: EvidenceConfig,
        store: Arc<CorpusStore>,
        catalog: TreatmentCatalog,
        config: EnvConfig,
    ) -> Result<Self> {
        if cases.is_empty() {
            return Err(Error::Config("environment needs at least one case".into()));
        }
        let feature_dim = cases[0].features.len();
        if let Some(bad) = cases.iter().find(|c| c.features.len() != feature_dim) {
            return Err(Error::ShapeMismatch {
                what: "case features",
                expected: feature_dim,
                got: bad.features.len(),
            });
        }
        let layout = StateLayout::new(feature_dim, agents.roles.len(), catalog.len());
        let n = cases.len();
        Ok(Self {
            cases,
            seed,
            agents,
            consensus,
            evidence,
            store,
            catalog,
            config,
            layout,
            cache: vec![None; n],
            episode: None,
            clock: FixedClock::default(),
            audit: None,
        })
    }

    pub fn layout(&self) -> StateLayout {
        self.layout
    }

    pub fn cases(&self) -> &[PatientCase] {
        &self.cases
    }

    pub fn treatments(&self) -> usize {
        self.catalog.len()
    }

    /// Record `rl_step` and deliberation events from now on.
    pub fn enable_audit(&mut self, clock: FixedClock) {
        self.clock = clock;
        self.audit = Some(MemorySink::default());
    }

    pub fn take_audit(&mut self) -> Vec<AuditRecord> {
        self.audit.as_mut().map(|s| std::mem::take(&mut s.records)).unwrap_or_default()
    }

    pub fn current_matrix(&self) -> Option<&ConsensusMatrix<f64>> {
        self.episode.as_ref().map(|e| &e.matrix)
    }

    fn initial(&mut self, idx: usize) -> Result<Snapshot> {
        if let Some(s) = &self.cache[idx] {
            return Ok(s.clone());
        }
        let case = &self.cases[idx];
        let catalog = self.catalog.adjusted_for(case);
        let mut team = self.agents.build_team(self.seed, &case.id);
        let d = Deliberation {
            case,
            catalog: &catalog,
            store: &self.store,
            evidence: &self.evidence,
            config: &self.consensus,
        };
        let mut sink = NullSink;
        let mut clock = FixedClock::default();
        let mut log = AuditLog::new(&case.id, &mut clock, &mut sink);
        let opinions = collect_opinions(&d, &mut team, 1, None, None, &mut log)?;
        let matrix = matrix_from_opinions(&opinions, 1, &self.consensus)?;
        let snap = Snapshot {
            catalog,
            team,
            opinions,
            matrix,
        };
        self.cache[idx] = Some(snap.clone());
        Ok(snap)
    }

    /// Start an episode on a specific case. `episode` keys the acceptance
    /// draws.
    pub fn reset_case(&mut self, idx: usize, episode: u64) -> Result<Vec<f64>> {
        if idx >= self.cases.len() {
            return Err(Error::Config(format!("case index {idx} out of range")));
        }
        let snap = self.initial(idx)?;
        let w = snap.matrix.kendall_w;
        let done = w > self.consensus.w_threshold || self.consensus.max_rounds <= 1;
        let rng = stream(self.seed, &["env".into(), self.cases[idx].id.as_str().into(), episode.into()]);
        self.episode = Some(Episode {
            case_idx: idx,
            catalog: snap.catalog,
            team: snap.team,
            opinions: snap.opinions,
            matrix: snap.matrix,
            rng,
            done,
            steps: 0,
            total_reward: 0.0,
            w_history: vec![w],
        });
        self.state()
    }

    pub fn state(&self) -> Result<Vec<f64>> {
        let ep = self.episode.as_ref().ok_or(Error::EpisodeDone)?;
        let case = &self.cases[ep.case_idx];
        self.layout.flatten(
            &case.features,
            &ep.matrix.entries,
            ep.matrix.round,
            &ep.matrix.per_agent_confidence,
            ep.matrix.kendall_w,
        )
    }

    pub fn summary(&self) -> Option<EpisodeSummary> {
        let ep = self.episode.as_ref()?;
        let case = &self.cases[ep.case_idx];
        Some(EpisodeSummary {
            case_id: case.id.clone(),
            hidden_label: case.hidden_label,
            rounds: ep.matrix.round,
            steps: ep.steps,
            final_w: ep.matrix.kendall_w,
            consensus: ep.matrix.kendall_w > self.consensus.w_threshold,
            recommendation: argmax_column_sum(&ep.matrix.entries),
            total_reward: ep.total_reward,
            w_history: ep.w_history.clone(),
        })
    }
}

impl Env for ConsensusEnv {
    fn state_dim(&self) -> usize {
        self.layout.len()
    }

    fn n_actions(&self) -> usize {
        self.catalog.len() * MODES
    }

    fn reset(&mut self, episode: u64) -> Result<Vec<f64>> {
        let mut pick = stream(self.seed, &["pick".into(), episode.into()]);
        let idx = pick.gen_range(0..self.cases.len());
        self.reset_case(idx, episode)
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        let k = self.catalog.len();
        let threshold = self.consensus.w_threshold;
        let max_rounds = self.consensus.max_rounds;
        let Some(ep) = self.episode.as_mut() else {
            return Err(Error::EpisodeDone);
        };
        if ep.done {
            return Err(Error::EpisodeDone);
        }
        let act = RlAction::decode(action, k).ok_or(Error::ShapeMismatch {
            what: "action",
            expected: k * MODES,
            got: action,
        })?;
        let case = &self.cases[ep.case_idx];
        let mut null = NullSink;
        let sink: &mut dyn AuditSink = match self.audit.as_mut() {
            Some(s) => s,
            None => &mut null,
        };
        let mut log = AuditLog::new(&case.id, &mut self.clock as &mut dyn Clock, sink);

        let (scores, flagged) = discordance(&ep.matrix.entries);
        let effect = classify_action(act.mode, !flagged.is_empty());
        let draw: f64 = ep.rng.gen();
        let accepted = draw < self.config.acceptance[effect.index()];
        let old: Vec<Vec<f64>> = ep.opinions.iter().map(|o| o.raw_preferences.clone()).collect();
        let w_old = ep.matrix.kendall_w;
        let round = ep.matrix.round;

        let mut opinions = ep.opinions.clone();
        if accepted {
            apply_feedback(&mut ep.team, &mut opinions, &ep.matrix, &scores, &flagged, act.mode, &mut log)?;
        }
        let d = Deliberation {
            case,
            catalog: &ep.catalog,
            store: &self.store,
            evidence: &self.evidence,
            config: &self.consensus,
        };
        let next_round = round + 1;
        let opinions = collect_opinions(&d, &mut ep.team, next_round, Some(&opinions), Some(&ep.matrix), &mut log)?;
        let matrix = matrix_from_opinions(&opinions, next_round, &self.consensus)?;
        let w = matrix.kendall_w;

        let moved: f64 = opinions
            .iter()
            .zip(&old)
            .map(|(o, p)| o.raw_preferences.iter().zip(p).map(|(a, b)| (a - b).abs()).sum::<f64>() / k as f64)
            .sum::<f64>()
            / opinions.len() as f64;
        let stability = (1.0 - moved).clamp(0.0, 1.0);
        let recommendation = argmax_column_sum(&matrix.entries);
        let quality = case.hidden_label.map(|h| if h == recommendation { 1.0 } else { 0.0 });
        let r = reward(w - w_old, stability, 1.0 - w, quality, &self.config.reward);
        let done = w > threshold || next_round >= max_rounds;

        log.emit(
            next_round,
            SYSTEM_AGENT,
            AuditEvent::RlStep,
            json!({
                "action": action,
                "treatment": act.treatment,
                "mode": act.mode,
                "effect": effect,
                "accepted": accepted,
                "flagged": flagged,
                "kendall_w": w,
                "reward": r,
                "done": done,
            }),
        );

        ep.opinions = opinions;
        ep.matrix = matrix;
        ep.done = done;
        ep.steps += 1;
        ep.total_reward += r;
        ep.w_history.push(w);
        Ok(Step {
            state: self.state()?,
            reward: r,
            done,
            truncated: false,
        })
    }

    fn is_done(&self) -> bool {
        self.episode.as_ref().is_none_or(|e| e.done)
    }

    fn discretizer(&self) -> Discretizer {
        Discretizer::Consensus {
            layout: self.layout,
            w_buckets: self.config.w_buckets.max(1),
            max_rounds: self.consensus.max_rounds,
        }
    }

    fn episode_metrics(&self) -> Option<(f64, u32)> {
        self.episode.as_ref().map(|e| (e.matrix.kendall_w, e.matrix.round))
    }
}

/// Action that maintains every position, steering toward the current
/// leader.
pub(crate) fn maintain_action(matrix: &ConsensusMatrix<f64>) -> usize {
    RlAction {
        treatment: argmax_column_sum(&matrix.entries),
        mode: InteractionMode::MaintainPosition,
    }
    .encode()
}
