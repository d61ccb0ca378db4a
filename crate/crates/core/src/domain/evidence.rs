use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceKind {
    Guideline,
    Rct,
    Observational,
    ExpertOpinion,
}

impl EvidenceKind {
    pub const ALL: [EvidenceKind; 4] = [
        EvidenceKind::Guideline,
        EvidenceKind::Rct,
        EvidenceKind::Observational,
        EvidenceKind::ExpertOpinion,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bias {
    Low,
    High,
    Unknown,
}

impl Bias {
    pub const ALL: [Bias; 3] = [Bias::Low, Bias::High, Bias::Unknown];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvidenceItem {
    pub id: String,
    pub kind: EvidenceKind,
    pub year: i32,
    pub bias: Bias,
    #[serde(default)]
    pub title: String,
    pub text: String,
    #[serde(default)]
    pub source: String,
    /// Filled in at retrieval time; absent from corpus files.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub relevance: f64,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

impl EvidenceItem {
    /// Citation string `"source, year, id"`.
    pub fn citation(&self) -> String {
        format!("{}, {}, {}", self.source, self.year, self.id)
    }
}

/// Evidence quality level, ordered worst to best.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Grade {
    VeryLow,
    Low,
    Moderate,
    High,
}

impl Grade {
    pub fn score(self) -> f64 {
        match self {
            Grade::High => 1.0,
            Grade::Moderate => 0.66,
            Grade::Low => 0.33,
            Grade::VeryLow => 0.1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Grade::High => "High",
            Grade::Moderate => "Moderate",
            Grade::Low => "Low",
            Grade::VeryLow => "Very Low",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceChain {
    /// Treatment the chain was assembled for.
    pub treatment: Option<usize>,
    pub guidelines: Vec<EvidenceItem>,
    pub literature: Vec<EvidenceItem>,
    pub clinical_data: BTreeMap<String, String>,
    pub grade: Grade,
    pub grade_score: f64,
    pub citations: Vec<String>,
}

impl EvidenceChain {
    pub fn empty(treatment: Option<usize>) -> Self {
        Self {
            treatment,
            guidelines: Vec::new(),
            literature: Vec::new(),
            clinical_data: BTreeMap::new(),
            grade: Grade::VeryLow,
            grade_score: 0.0,
            citations: Vec::new(),
        }
    }

    pub fn items(&self) -> impl Iterator<Item = &EvidenceItem> {
        self.guidelines.iter().chain(&self.literature)
    }

    pub fn is_empty(&self) -> bool {
        self.guidelines.is_empty() && self.literature.is_empty()
    }
}
