use std::fmt::Write;

use mdt_core::consensus::ConsultationResult;
use mdt_core::domain::EvidenceItem;
use mdt_core::{Error, Result};

fn resolve(result: &ConsultationResult, treatment: &str) -> Result<usize> {
    let terms = &result.j_breakdown;
    if let Ok(i) = treatment.parse::<usize>() {
        if i < terms.len() {
            return Ok(i);
        }
    }
    terms
        .iter()
        .position(|t| t.name.eq_ignore_ascii_case(treatment))
        .ok_or_else(|| Error::Config(format!("unknown treatment `{treatment}`")))
}

fn tag<T: serde::Serialize>(v: T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn item_line(out: &mut String, item: &EvidenceItem) {
    let _ = writeln!(
        out,
        "      - [{}] {} ({}, bias {}, relevance {:.3})",
        item.id,
        if item.title.is_empty() { &item.text } else { &item.title },
        item.year,
        tag(item.bias),
        item.relevance
    );
    let _ = writeln!(out, "        type {}; cite: {}", tag(item.kind), item.citation());
}

/// Text report for one treatment: objective decomposition, each agent's
/// stance and the graded evidence chains that back it.
pub fn render(result: &ConsultationResult, treatment: &str) -> Result<String> {
    let k = resolve(result, treatment)?;
    let term = &result.j_breakdown[k];
    let mut out = String::new();
    let _ = writeln!(out, "Case {}", result.case_id);
    let _ = writeln!(
        out,
        "Recommendation: {} (W = {:.4}, {} round(s), {})",
        result.recommendation_name,
        result.final_matrix.kendall_w,
        result.rounds_used,
        result.termination_reason.as_str()
    );
    let _ = writeln!(out);
    let _ = writeln!(out, "Treatment {k}: {}", term.name);
    let _ = writeln!(out, "  J = 0.4 x consensus + 0.4 x clinical fit + 0.2 x evidence quality");
    let _ = writeln!(out, "    consensus support  {:.4}", term.consensus);
    let _ = writeln!(out, "    clinical fit       {:.4}", term.clinical_fit);
    let _ = writeln!(out, "    evidence quality   {:.4}", term.evidence_quality);
    let _ = writeln!(out, "    J                  {:.4}", term.j);
    let rank = 1 + result.j_scores.iter().filter(|&&j| j > term.j).count();
    let _ = writeln!(out, "  rank by J: {rank} of {}", result.j_scores.len());
    let _ = writeln!(out);

    let last = result.per_round_opinions.last().map(Vec::as_slice).unwrap_or_default();
    let _ = writeln!(out, "Agent positions (final round):");
    for (i, o) in last.iter().enumerate() {
        let weight = result.final_matrix.entries.get(i, k);
        let _ = writeln!(
            out,
            "  {:<24} preference {:+.3}  weight {:.4}  confidence {:.2}",
            o.agent_id, o.raw_preferences[k], weight, o.confidence
        );
        if !o.concerns.is_empty() {
            let concerns: Vec<&str> = o.concerns.iter().map(String::as_str).collect();
            let _ = writeln!(out, "    concerns: {}", concerns.join(", "));
        }
    }
    let _ = writeln!(out);

    let backing: Vec<_> = last.iter().filter(|o| o.evidence.treatment == Some(k)).collect();
    if backing.is_empty() {
        let _ = writeln!(out, "No agent attached an evidence chain for {}.", term.name);
        return Ok(out);
    }
    let _ = writeln!(out, "Evidence chains for {}:", term.name);
    for o in backing {
        let e = &o.evidence;
        let _ = writeln!(out, "  {} - GRADE {} (score {:.2})", o.agent_id, e.grade.label(), e.grade_score);
        if !e.guidelines.is_empty() {
            let _ = writeln!(out, "    guidelines:");
            for item in &e.guidelines {
                item_line(&mut out, item);
            }
        }
        if !e.literature.is_empty() {
            let _ = writeln!(out, "    literature:");
            for item in &e.literature {
                item_line(&mut out, item);
            }
        }
        if e.guidelines.is_empty() && e.literature.is_empty() {
            let _ = writeln!(out, "    no items passed the relevance and recency filters");
        }
        if !e.clinical_data.is_empty() {
            let data: Vec<String> = e.clinical_data.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let _ = writeln!(out, "    clinical data: {}", data.join(", "));
        }
    }
    Ok(out)
}
