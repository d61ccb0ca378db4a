use serde::{Deserialize, Serialize};
use serde_json::json;

use super::baselines::{aggregate_baselines, BaselineWinners};
use super::matrix_ops::{argmax_column_sum, build_matrix, discordance, kendall_w};
use super::objective::{j_breakdown, JTerm};
use super::ConsensusConfig;
use crate::agents::{ClinicalAgent, Feedback, InteractionMode, OpinionContext};
use crate::domain::{AuditEvent, AuditLog, ConsensusMatrix, Opinion, PatientCase, TreatmentCatalog, SYSTEM_AGENT};
use crate::error::{Error, Result};
use crate::evidence::{CorpusStore, EvidenceConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    Threshold,
    Stalled,
    MaxRounds,
}

impl TerminationReason {
    pub fn as_str(self) -> &'static str {
        match self {
            TerminationReason::Threshold => "threshold",
            TerminationReason::Stalled => "stalled",
            TerminationReason::MaxRounds => "max_rounds",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsultationResult {
    pub case_id: String,
    pub hidden_label: Option<usize>,
    pub recommendation: usize,
    pub recommendation_name: String,
    pub consensus_achieved: bool,
    pub rounds_used: u32,
    pub termination_reason: TerminationReason,
    pub w_history: Vec<f64>,
    pub final_matrix: ConsensusMatrix<f64>,
    pub j_scores: Vec<f64>,
    pub j_breakdown: Vec<JTerm>,
    pub baselines: BaselineWinners,
    pub per_round_opinions: Vec<Vec<Opinion>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix_trace: Option<Vec<ConsensusMatrix<f64>>>,
}

/// Shared inputs of one consultation.
pub struct Deliberation<'a> {
    pub case: &'a PatientCase,
    /// Case-adjusted catalog.
    pub catalog: &'a TreatmentCatalog,
    pub store: &'a CorpusStore,
    pub evidence: &'a EvidenceConfig,
    pub config: &'a ConsensusConfig,
}

fn agent_failure(agent: &str, source: crate::agents::AgentError) -> Error {
    Error::AgentFailure {
        agent: agent.to_string(),
        source,
    }
}

/// One opinion per agent for `round`. `previous[i]` is agent `i`'s opinion
/// from the prior round (after any revision).
pub fn collect_opinions<A: ClinicalAgent>(
    d: &Deliberation<'_>,
    agents: &mut [A],
    round: u32,
    previous: Option<&[Opinion]>,
    previous_matrix: Option<&ConsensusMatrix<f64>>,
    audit: &mut AuditLog<'_>,
) -> Result<Vec<Opinion>> {
    let mut out = Vec::with_capacity(agents.len());
    for (i, agent) in agents.iter_mut().enumerate() {
        let ctx = OpinionContext {
            case: d.case,
            catalog: d.catalog,
            store: d.store,
            evidence: d.evidence,
            round,
            previous: previous.and_then(|p| p.get(i)),
            previous_matrix,
        };
        let opinion = agent
            .generate_opinion(&ctx)
            .map_err(|e| agent_failure(agent.id(), e))?;
        let violations = opinion.violations(d.catalog.len());
        if !violations.is_empty() {
            let msg = violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
            return Err(agent_failure(agent.id(), crate::agents::AgentError::InvalidOpinion(msg)));
        }
        audit.emit(
            round,
            agent.id(),
            AuditEvent::Opinion,
            json!({
                "preferences": opinion.raw_preferences,
                "confidence": opinion.confidence,
                "concerns": opinion.concerns,
                "grade": opinion.evidence.grade,
                "citations": opinion.evidence.citations,
            }),
        );
        out.push(opinion);
    }
    Ok(out)
}

/// Normalize, weight and score a set of opinions.
pub fn matrix_from_opinions(opinions: &[Opinion], round: u32, cfg: &ConsensusConfig) -> Result<ConsensusMatrix<f64>> {
    let rows: Vec<Vec<f64>> = opinions.iter().map(|o| o.raw_preferences.clone()).collect();
    let conf: Vec<f64> = opinions.iter().map(|o| o.confidence).collect();
    let concerns: Vec<usize> = opinions.iter().map(|o| o.concerns.len()).collect();
    let entries = build_matrix(&rows, &conf, &concerns, cfg.norm_epsilon)?;
    let w = kendall_w(&entries, cfg.tie_correction)?;
    Ok(ConsensusMatrix {
        entries,
        round,
        kendall_w: w,
        per_agent_confidence: conf,
    })
}

/// Feedback for agent `i`: team mean raw preferences, matrix column means
/// and the agent's deviation from them.
pub fn feedback_for(opinions: &[Opinion], matrix: &ConsensusMatrix<f64>, scores: &[f64], i: usize) -> Feedback {
    let k = matrix.entries.cols();
    let n = opinions.len().max(1) as f64;
    let mut group_mean = vec![0.0; k];
    for o in opinions {
        for (acc, &p) in group_mean.iter_mut().zip(&o.raw_preferences) {
            *acc += p;
        }
    }
    for v in &mut group_mean {
        *v /= n;
    }
    let column_means = matrix.entries.column_means();
    let deviation = matrix
        .entries
        .row(i)
        .iter()
        .zip(&column_means)
        .map(|(v, m)| v - m)
        .collect();
    Feedback {
        group_mean,
        column_means,
        deviation,
        discordance: scores.get(i).copied().unwrap_or(0.0),
    }
}

/// Revise the opinions of `flagged` agents in place.
pub fn apply_feedback<A: ClinicalAgent>(
    agents: &mut [A],
    opinions: &mut [Opinion],
    matrix: &ConsensusMatrix<f64>,
    scores: &[f64],
    flagged: &[usize],
    mode: InteractionMode,
    audit: &mut AuditLog<'_>,
) -> Result<()> {
    let snapshot = opinions.to_vec();
    for &i in flagged {
        let fb = feedback_for(&snapshot, matrix, scores, i);
        let agent = &mut agents[i];
        let revised = agent
            .revise_opinion(&snapshot[i], &fb, mode)
            .map_err(|e| agent_failure(agent.id(), e))?;
        audit.emit(
            matrix.round,
            agent.id(),
            AuditEvent::Feedback,
            json!({
                "mode": mode,
                "discordance": fb.discordance,
                "deviation": fb.deviation,
                "revised_preferences": revised.raw_preferences,
            }),
        );
        opinions[i] = revised;
    }
    Ok(())
}

/// Run the multi-round consensus protocol for one case.
///
/// Each round every agent states an opinion, the matrix and W are rebuilt,
/// and, if W is at or below the threshold with rounds remaining, discordant
/// agents receive feedback. The loop ends when W exceeds the threshold, when
/// the round budget is spent, or (from round 2 on) when W moved by less than
/// the convergence tolerance.
pub fn run_consultation<A: ClinicalAgent>(
    d: &Deliberation<'_>,
    agents: &mut [A],
    trace: bool,
    audit: &mut AuditLog<'_>,
) -> Result<ConsultationResult> {
    let cfg = d.config;
    if agents.len() < 2 || d.catalog.len() < 2 {
        return Err(Error::DegenerateShape {
            agents: agents.len(),
            treatments: d.catalog.len(),
        });
    }

    let mut history: Vec<Vec<Opinion>> = Vec::new();
    let mut w_history: Vec<f64> = Vec::new();
    let mut snapshots: Vec<ConsensusMatrix<f64>> = Vec::new();
    let mut carried: Option<Vec<Opinion>> = None;
    let mut prev_matrix: Option<ConsensusMatrix<f64>> = None;
    let mut round = 1u32;

    let (matrix, opinions, reason) = loop {
        let mut opinions = collect_opinions(d, agents, round, carried.as_deref(), prev_matrix.as_ref(), audit)?;
        let matrix = matrix_from_opinions(&opinions, round, cfg)?;
        let w = matrix.kendall_w;
        audit.emit(
            round,
            SYSTEM_AGENT,
            AuditEvent::MatrixUpdate,
            json!({ "kendall_w": w, "matrix": matrix.entries.to_rows() }),
        );
        let w_prev = w_history.last().copied();
        w_history.push(w);
        history.push(opinions.clone());
        if trace {
            snapshots.push(matrix.clone());
        }

        if w > cfg.w_threshold {
            break (matrix, opinions, TerminationReason::Threshold);
        }
        if round >= cfg.max_rounds {
            break (matrix, opinions, TerminationReason::MaxRounds);
        }
        if let Some(prev) = w_prev {
            if (w - prev).abs() < cfg.convergence_tol {
                break (matrix, opinions, TerminationReason::Stalled);
            }
        }

        let (scores, flagged) = discordance(&matrix.entries);
        apply_feedback(agents, &mut opinions, &matrix, &scores, &flagged, cfg.feedback_mode, audit)?;
        carried = Some(opinions);
        prev_matrix = Some(matrix);
        round += 1;
    };

    let recommendation = argmax_column_sum(&matrix.entries);
    let breakdown = j_breakdown(&matrix.entries, &opinions, d.catalog, &cfg.objective_weights);
    let consensus_achieved = matrix.kendall_w > cfg.w_threshold;
    if consensus_achieved {
        audit.emit(
            round,
            SYSTEM_AGENT,
            AuditEvent::Consensus,
            json!({ "kendall_w": matrix.kendall_w, "recommendation": recommendation }),
        );
    }
    audit.emit(
        round,
        SYSTEM_AGENT,
        AuditEvent::Termination,
        json!({ "reason": reason, "rounds_used": round, "recommendation": recommendation }),
    );

    Ok(ConsultationResult {
        case_id: d.case.id.clone(),
        hidden_label: d.case.hidden_label,
        recommendation,
        recommendation_name: d.catalog.options[recommendation].name.clone(),
        consensus_achieved,
        rounds_used: round,
        termination_reason: reason,
        w_history,
        j_scores: breakdown.iter().map(|t| t.j).collect(),
        j_breakdown: breakdown,
        baselines: aggregate_baselines(&opinions),
        final_matrix: matrix,
        per_round_opinions: history,
        matrix_trace: trace.then_some(snapshots),
    })
}
