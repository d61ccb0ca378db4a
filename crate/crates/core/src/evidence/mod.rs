//! Evidence-chain assembly over a local corpus: query construction, tf-idf
//! retrieval with relevance and recency filtering, and GRADE assessment.

mod corpus;
mod grade;
mod store;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use corpus::{role_keywords, synthetic_corpus, SyntheticCorpusSpec, BLOCK_TAGS};
pub use grade::{assess_grade, item_grade};
pub use store::{tokenize, CorpusStore, Query};

use crate::domain::{
    EvidenceChain, EvidenceItem, EvidenceKind, PatientCase, Role, TreatmentOption, BLOCK_COMORBIDITIES,
    BLOCK_DEMOGRAPHICS, BLOCK_LABS, BLOCK_VITALS,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvidenceConfig {
    pub top_k_guidelines: usize,
    pub top_k_literature: usize,
    pub min_year: i32,
    pub min_relevance: f64,
    pub now_year: i32,
    /// Guidelines at most this many years old get `recency_bonus`.
    pub recency_window: i32,
    pub recency_bonus: f64,
    /// Feature-block activation above which the block's tag joins the query.
    pub activation_threshold: f64,
    /// JSONL corpus; when absent a synthetic corpus is generated.
    pub corpus_path: Option<String>,
    pub corpus_seed: u64,
    pub corpus_docs_per_topic: usize,
}

impl Default for EvidenceConfig {
    fn default() -> Self {
        Self {
            top_k_guidelines: 3,
            top_k_literature: 5,
            min_year: 2018,
            min_relevance: 0.7,
            now_year: 2025,
            recency_window: 2,
            recency_bonus: 0.05,
            activation_threshold: 0.5,
            corpus_path: None,
            corpus_seed: 2018,
            corpus_docs_per_topic: 8,
        }
    }
}

impl EvidenceConfig {
    /// Load `corpus_path`, or synthesise the default corpus for `catalog`.
    pub fn load_store(&self, catalog: &crate::domain::TreatmentCatalog) -> crate::error::Result<CorpusStore> {
        match &self.corpus_path {
            Some(path) => {
                let file = std::fs::File::open(path)?;
                CorpusStore::from_jsonl(std::io::BufReader::new(file), self.now_year)
            }
            None => synthetic_corpus(
                SyntheticCorpusSpec {
                    seed: self.corpus_seed,
                    docs_per_topic: self.corpus_docs_per_topic,
                    now_year: self.now_year,
                },
                catalog,
            ),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.min_relevance) {
            return Err(format!("min_relevance {} not in [0,1]", self.min_relevance));
        }
        if !(0.0..=1.0).contains(&self.activation_threshold) {
            return Err(format!("activation_threshold {} not in [0,1]", self.activation_threshold));
        }
        if self.recency_bonus < 0.0 || self.recency_window < 0 {
            return Err("recency settings must be non-negative".into());
        }
        Ok(())
    }
}

/// Role keywords, treatment-name tokens, and tags of case blocks whose mean
/// activation exceeds the threshold.
pub fn construct_query(case: &PatientCase, role: Role, treatment: &TreatmentOption, threshold: f64) -> Query {
    let mut q: Query = role_keywords(role).iter().map(|s| (*s).to_string()).collect();
    q.extend(tokenize(&treatment.name));
    for (block, tag) in BLOCK_TAGS {
        if case.block_mean(block) > threshold {
            q.insert(tag.to_string());
        }
    }
    q
}

/// Cosine relevance plus the guideline recency bonus, clipped to `[0, 1]`.
pub fn relevance(store: &CorpusStore, index: usize, query: &Query, cfg: &EvidenceConfig) -> f64 {
    let item = &store.items()[index];
    let mut score = store.cosine(index, query);
    if item.kind == EvidenceKind::Guideline && item.year >= store.now_year - cfg.recency_window {
        score += cfg.recency_bonus;
    }
    score.clamp(0.0, 1.0)
}

/// Rank candidates by relevance (descending, id ascending on ties), keep the
/// first `top_k`, then drop anything under the relevance floor.
fn rank_and_filter(
    store: &CorpusStore,
    query: &Query,
    cfg: &EvidenceConfig,
    top_k: usize,
    keep: impl Fn(&EvidenceItem) -> bool,
) -> Vec<EvidenceItem> {
    let mut scored: Vec<(f64, &EvidenceItem)> = store
        .items()
        .iter()
        .enumerate()
        .filter(|(_, item)| keep(item))
        .map(|(i, item)| (relevance(store, i, query, cfg), item))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.id.cmp(&b.1.id)));
    scored
        .into_iter()
        .take(top_k)
        .filter(|(r, _)| *r >= cfg.min_relevance)
        .map(|(r, item)| EvidenceItem {
            relevance: r,
            ..item.clone()
        })
        .collect()
}

/// Returns `(guidelines, literature)`.
pub fn retrieve(store: &CorpusStore, query: &Query, cfg: &EvidenceConfig) -> (Vec<EvidenceItem>, Vec<EvidenceItem>) {
    let guidelines = rank_and_filter(store, query, cfg, cfg.top_k_guidelines, |i| {
        i.kind == EvidenceKind::Guideline
    });
    let literature = rank_and_filter(store, query, cfg, cfg.top_k_literature, |i| {
        i.kind != EvidenceKind::Guideline && i.year >= cfg.min_year
    });
    (guidelines, literature)
}

fn relevant_blocks(role: Role) -> &'static [&'static str] {
    match role {
        Role::Oncologist => &[BLOCK_LABS, BLOCK_VITALS, BLOCK_COMORBIDITIES],
        Role::Radiologist => &[BLOCK_LABS, BLOCK_DEMOGRAPHICS],
        Role::Nurse => &[BLOCK_VITALS, BLOCK_COMORBIDITIES, BLOCK_DEMOGRAPHICS],
        Role::Psychologist => &[BLOCK_DEMOGRAPHICS, BLOCK_COMORBIDITIES],
        Role::PatientAdvocate => &[BLOCK_DEMOGRAPHICS],
        Role::Nutritionist => &[BLOCK_LABS, BLOCK_VITALS],
        Role::RehabTherapist => &[BLOCK_VITALS, BLOCK_COMORBIDITIES],
    }
}

/// Role-relevant snapshot of the case: mean activation of each block the
/// role reads, formatted to three decimals.
pub fn extract_clinical_data(case: &PatientCase, role: Role) -> BTreeMap<String, String> {
    relevant_blocks(role)
        .iter()
        .map(|b| (format!("{b}_mean"), format!("{:.3}", case.block_mean(b))))
        .collect()
}

pub fn build_chain(
    case: &PatientCase,
    role: Role,
    treatment: &TreatmentOption,
    store: &CorpusStore,
    cfg: &EvidenceConfig,
) -> EvidenceChain {
    let query = construct_query(case, role, treatment, cfg.activation_threshold);
    let (guidelines, literature) = retrieve(store, &query, cfg);
    let (grade, grade_score) = assess_grade(guidelines.iter().chain(&literature));
    let citations = guidelines.iter().chain(&literature).map(EvidenceItem::citation).collect();
    EvidenceChain {
        treatment: Some(treatment.index),
        guidelines,
        literature,
        clinical_data: extract_clinical_data(case, role),
        grade,
        grade_score,
        citations,
    }
}
