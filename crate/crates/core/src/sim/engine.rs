use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::generate_cases;
use crate::agents::ClinicalAgent;
use crate::config::AppConfig;
use crate::consensus::{run_consultation, ConsultationResult, Deliberation, TerminationReason};
use crate::domain::{require_valid, AuditLog, NullSink, FixedClock, PatientCase};
use crate::error::{Error, Result};
use crate::evidence::CorpusStore;
use crate::rl::{
    Algo, ApproxQLearner, ConsensusEnv, DqnTrainer, Env, EpisodeStats, EpisodeSummary, MaintainPolicy, ModelFile,
    Policy, PpoTrainer, TabularQ, TrainedModel,
};
use crate::rng::{derive_seed, stream};

/// Configuration plus the loaded evidence corpus.
#[derive(Debug, Clone)]
pub struct Engine {
    pub config: AppConfig,
    pub store: Arc<CorpusStore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseOutcome {
    pub case_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<ConsultationResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortMetrics {
    pub n_cases: usize,
    pub n_failed: usize,
    /// Fraction of completed consultations ending with W above threshold.
    pub consensus_rate: f64,
    pub mean_w: f64,
    pub mean_rounds: f64,
    /// Recommendation accuracy against hidden labels.
    pub accuracy: f64,
    pub per_method_accuracy: BTreeMap<String, f64>,
    /// Termination reasons plus `agent_failure`; sums to `n_cases`.
    pub failure_breakdown: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortOutcome {
    pub metrics: CohortMetrics,
    pub cases: Vec<CaseOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub method: String,
    pub n: usize,
    pub mean_rounds: f64,
    pub consensus_rate: f64,
    pub mean_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyComparison {
    pub baseline: MethodMetrics,
    pub policy: MethodMetrics,
    /// Baseline rounds minus policy rounds, per case.
    pub paired_round_diff: Vec<i64>,
    pub mean_paired_diff: f64,
    pub baseline_episodes: Vec<EpisodeSummary>,
    pub policy_episodes: Vec<EpisodeSummary>,
}

impl PolicyComparison {
    pub fn rows(&self) -> [&MethodMetrics; 2] {
        [&self.baseline, &self.policy]
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ModelFile,
    pub curve: Vec<EpisodeStats>,
    pub manifest: serde_json::Value,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

impl CohortMetrics {
    pub fn from_outcomes(cases: &[CaseOutcome], threshold: f64) -> Self {
        let done: Vec<&ConsultationResult> = cases.iter().filter_map(|c| c.result.as_ref()).collect();
        let labelled: Vec<&&ConsultationResult> = done.iter().filter(|r| r.hidden_label.is_some()).collect();
        let acc = |pick: &dyn Fn(&ConsultationResult) -> usize| {
            mean(labelled.iter().map(|r| f64::from(u8::from(Some(pick(r)) == r.hidden_label))))
        };
        let mut per_method = BTreeMap::new();
        per_method.insert("consensus".to_string(), acc(&|r| r.recommendation));
        per_method.insert("majority".to_string(), acc(&|r| r.baselines.majority));
        per_method.insert("weighted".to_string(), acc(&|r| r.baselines.weighted));
        per_method.insert("borda".to_string(), acc(&|r| r.baselines.borda));
        let mut breakdown = BTreeMap::new();
        for reason in [TerminationReason::Threshold, TerminationReason::Stalled, TerminationReason::MaxRounds] {
            breakdown.insert(reason.as_str().to_string(), 0usize);
        }
        breakdown.insert("agent_failure".to_string(), cases.len() - done.len());
        for r in &done {
            *breakdown.entry(r.termination_reason.as_str().to_string()).or_default() += 1;
        }
        Self {
            n_cases: cases.len(),
            n_failed: cases.len() - done.len(),
            consensus_rate: mean(done.iter().map(|r| f64::from(u8::from(r.final_matrix.kendall_w > threshold)))),
            mean_w: mean(done.iter().map(|r| r.final_matrix.kendall_w)),
            mean_rounds: mean(done.iter().map(|r| f64::from(r.rounds_used))),
            accuracy: per_method["consensus"],
            per_method_accuracy: per_method,
            failure_breakdown: breakdown,
        }
    }
}

impl Engine {
    pub fn new(config: AppConfig) -> Result<Self> {
        config.validate()?;
        let store = Arc::new(config.evidence.load_store(&config.catalog)?);
        Ok(Self { config, store })
    }

    pub fn validate_case(&self, case: PatientCase) -> Result<PatientCase> {
        require_valid(case, self.config.sim.feature_dim, self.config.catalog.len())
    }

    /// Consult the rule-based team on one case.
    pub fn consult(&self, case: &PatientCase, audit: &mut AuditLog<'_>) -> Result<ConsultationResult> {
        let mut team = self.config.agents.build_team(self.config.seed, &case.id);
        self.consult_with(case, &mut team, audit)
    }

    pub fn consult_with<A: ClinicalAgent>(
        &self,
        case: &PatientCase,
        agents: &mut [A],
        audit: &mut AuditLog<'_>,
    ) -> Result<ConsultationResult> {
        let catalog = self.config.catalog.adjusted_for(case);
        let d = Deliberation {
            case,
            catalog: &catalog,
            store: &self.store,
            evidence: &self.config.evidence,
            config: &self.config.consensus,
        };
        run_consultation(&d, agents, self.config.trace, audit)
    }

    /// Generate `n` cases from `seed` and consult the default team on each.
    pub fn run_cohort(&self, n: usize, seed: u64) -> CohortOutcome {
        let agents = &self.config.agents;
        self.run_cohort_with(n, seed, |case| {
            agents
                .build_team(seed, &case.id)
                .into_iter()
                .map(|a| Box::new(a) as Box<dyn ClinicalAgent>)
                .collect()
        })
    }

    /// Cohort run with a custom team per case. Cases run in parallel on the
    /// current rayon pool; results are collected in case order and every
    /// case draws only from its own streams.
    pub fn run_cohort_with<F>(&self, n: usize, seed: u64, team: F) -> CohortOutcome
    where
        F: Fn(&PatientCase) -> Vec<Box<dyn ClinicalAgent>> + Sync,
    {
        let cfg = &self.config;
        let cases = generate_cases(n, seed, cfg.sim.difficulty, &cfg.sim, &cfg.catalog);
        let outcomes: Vec<CaseOutcome> = cases
            .par_iter()
            .map(|case| {
                let mut agents = team(case);
                let mut clock = FixedClock::default();
                let mut sink = NullSink;
                let mut log = AuditLog::new(&case.id, &mut clock, &mut sink);
                match self.consult_with(case, &mut agents, &mut log) {
                    Ok(r) => CaseOutcome {
                        case_id: case.id.clone(),
                        result: Some(r),
                        error: None,
                    },
                    Err(e) => CaseOutcome {
                        case_id: case.id.clone(),
                        result: None,
                        error: Some(format!("{}: {e}", e.kind())),
                    },
                }
            })
            .collect();
        CohortOutcome {
            metrics: CohortMetrics::from_outcomes(&outcomes, cfg.consensus.w_threshold),
            cases: outcomes,
        }
    }

    pub fn env(&self, cases: Vec<PatientCase>, seed: u64) -> Result<ConsensusEnv> {
        let cfg = &self.config;
        ConsensusEnv::new(
            Arc::new(cases),
            seed,
            cfg.agents.clone(),
            cfg.consensus.clone(),
            cfg.evidence.clone(),
            Arc::clone(&self.store),
            cfg.catalog.clone(),
            cfg.rl.env.clone(),
        )
    }

    /// Environment over the training pool derived from `seed`.
    pub fn training_env(&self, seed: u64) -> Result<ConsensusEnv> {
        let cfg = &self.config;
        let cases = generate_cases(
            cfg.rl.train_cases,
            derive_seed(seed, &["train-cases".into()]),
            cfg.rl.train_difficulty,
            &cfg.sim,
            &cfg.catalog,
        );
        self.env(cases, seed)
    }

    pub fn train(&self, algo: Algo, episodes: u64, seed: u64) -> Result<TrainOutcome> {
        let rl = &self.config.rl;
        let mut env = self.training_env(seed)?;
        let (state_dim, n_actions) = (env.state_dim(), env.n_actions());
        let mut rng = stream(seed, &["explore".into()]);
        let (model, curve) = match algo {
            Algo::Q => {
                let mut init = stream(seed, &["q-init".into()]);
                let mut learner = ApproxQLearner::new(state_dim, n_actions, &rl.q, rl.gamma, &mut init)?;
                let curve = learner.train(&mut env, episodes, &rl.epsilon, &mut rng)?;
                (TrainedModel::Network { net: learner.net, value: None }, curve)
            }
            Algo::QTabular => {
                let mut q = TabularQ::new(env.discretizer(), n_actions, rl.tabular_alpha, rl.gamma);
                let curve = q.train(&mut env, episodes, &rl.epsilon, &mut rng)?;
                (TrainedModel::Tabular { q }, curve)
            }
            Algo::Dqn => {
                let mut t = DqnTrainer::new(state_dim, n_actions, &rl.dqn, rl.gamma, seed)?;
                let curve = t.train(&mut env, episodes, &rl.epsilon, &mut rng)?;
                (TrainedModel::Network { net: t.online, value: None }, curve)
            }
            Algo::Ppo => {
                let mut t = PpoTrainer::new(state_dim, n_actions, &rl.ppo, rl.gamma, seed)?;
                let curve = t.train(&mut env, episodes, &mut rng)?;
                (
                    TrainedModel::Network {
                        net: t.policy,
                        value: Some(t.value),
                    },
                    curve,
                )
            }
        };
        let model = ModelFile::new(algo, seed, episodes, n_actions, model);
        let manifest = json!({
            "algo": algo,
            "seed": seed,
            "episodes": episodes,
            "state_dim": state_dim,
            "n_actions": n_actions,
            "layer_sizes": model.layer_sizes,
            "rl": rl,
            "consensus": self.config.consensus,
            "agents_revision_rate": self.config.agents.revision_rate,
        });
        Ok(TrainOutcome { model, curve, manifest })
    }

    fn run_episodes(&self, env: &mut ConsensusEnv, policy: &dyn Policy) -> Result<Vec<EpisodeSummary>> {
        let n = env.cases().len();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut state = env.reset_case(i, i as u64)?;
            while !env.is_done() {
                state = env.step(policy.act(&state)?)?.state;
            }
            out.push(env.summary().expect("episode started"));
        }
        Ok(out)
    }

    /// Run a held-out cohort under the maintain-position baseline and under
    /// `policy`, with identical acceptance draws per case.
    pub fn evaluate_policy(&self, policy: &dyn Policy, cohort_seed: u64, n: usize) -> Result<PolicyComparison> {
        let cfg = &self.config;
        let cases = generate_cases(n, cohort_seed, cfg.sim.difficulty, &cfg.sim, &cfg.catalog);
        let mut env = self.env(cases, cohort_seed)?;
        let layout = env.layout();
        if let Some(dim) = policy.input_dim() {
            if dim != layout.len() {
                return Err(Error::LayoutMismatch {
                    expected: layout.len(),
                    got: dim,
                });
            }
        }
        let baseline = self.run_episodes(&mut env, &MaintainPolicy { layout })?;
        let trained = self.run_episodes(&mut env, policy)?;
        let summarize = |method: &str, eps: &[EpisodeSummary]| MethodMetrics {
            method: method.to_string(),
            n: eps.len(),
            mean_rounds: mean(eps.iter().map(|e| f64::from(e.rounds))),
            consensus_rate: mean(eps.iter().map(|e| f64::from(u8::from(e.consensus)))),
            mean_w: mean(eps.iter().map(|e| e.final_w)),
        };
        let paired: Vec<i64> = baseline
            .iter()
            .zip(&trained)
            .map(|(b, p)| i64::from(b.rounds) - i64::from(p.rounds))
            .collect();
        Ok(PolicyComparison {
            baseline: summarize("maintain", &baseline),
            policy: summarize("policy", &trained),
            mean_paired_diff: mean(paired.iter().map(|&d| d as f64)),
            paired_round_diff: paired,
            baseline_episodes: baseline,
            policy_episodes: trained,
        })
    }
}

/// Write `cohort_summary.json`, `per_case/<id>.json` and `metrics.csv`.
pub fn write_cohort(dir: &Path, outcome: &CohortOutcome) -> Result<()> {
    fs::create_dir_all(dir.join("per_case"))?;
    fs::write(
        dir.join("cohort_summary.json"),
        serde_json::to_string_pretty(&outcome.metrics)? + "\n",
    )?;
    let mut csv = fs::File::create(dir.join("metrics.csv"))?;
    writeln!(
        csv,
        "case_id,hidden_label,recommendation,consensus,final_w,rounds,termination,majority,weighted,borda,error"
    )?;
    for c in &outcome.cases {
        fs::write(
            dir.join("per_case").join(format!("{}.json", c.case_id)),
            serde_json::to_string_pretty(c)? + "\n",
        )?;
        match &c.result {
            Some(r) => writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{},{},",
                c.case_id,
                r.hidden_label.map_or(String::new(), |l| l.to_string()),
                r.recommendation,
                r.consensus_achieved,
                r.final_matrix.kendall_w,
                r.rounds_used,
                r.termination_reason.as_str(),
                r.baselines.majority,
                r.baselines.weighted,
                r.baselines.borda,
            )?,
            None => writeln!(
                csv,
                "{},,,,,,,,,,{}",
                c.case_id,
                c.error.as_deref().unwrap_or_default().replace(',', ";")
            )?,
        }
    }
    Ok(())
}
