use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_FEATURE_DIM: usize = 247;

pub const BLOCK_DEMOGRAPHICS: &str = "demographics";
pub const BLOCK_VITALS: &str = "vitals";
pub const BLOCK_LABS: &str = "labs";
pub const BLOCK_COMORBIDITIES: &str = "comorbidities";

pub const BLOCK_NAMES: [&str; 4] = [
    BLOCK_DEMOGRAPHICS,
    BLOCK_VITALS,
    BLOCK_LABS,
    BLOCK_COMORBIDITIES,
];

/// Half-open index range `[start, end)`, serialized as a two-element array.
pub type BlockRange = [usize; 2];

/// Named partition of the feature vector.
pub type FeatureBlocks = BTreeMap<String, BlockRange>;

/// Default block partition for a feature space of dimension `d`.
///
/// For the standard `d = 247` this is demographics `[0,16)`, vitals
/// `[16,40)`, labs `[40,160)`, comorbidities `[160,247)`. Other sizes are
/// split proportionally, with every block getting at least one index when
/// `d >= 4`.
pub fn default_blocks(d: usize) -> FeatureBlocks {
    let fractions = [16.0 / 247.0, 40.0 / 247.0, 160.0 / 247.0, 1.0];
    let mut blocks = FeatureBlocks::new();
    let mut start = 0usize;
    for (i, (name, frac)) in BLOCK_NAMES.iter().zip(fractions).enumerate() {
        let remaining_blocks = BLOCK_NAMES.len() - i - 1;
        let mut end = if i + 1 == BLOCK_NAMES.len() {
            d
        } else {
            ((d as f64) * frac).round() as usize
        };
        end = end.max(start + 1).min(d.saturating_sub(remaining_blocks));
        if end < start {
            end = start;
        }
        blocks.insert((*name).to_string(), [start, end]);
        start = end;
    }
    blocks
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatientCase {
    pub id: String,
    pub features: Vec<f64>,
    pub blocks: FeatureBlocks,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden_label: Option<usize>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl PatientCase {
    pub fn block(&self, name: &str) -> Option<&[f64]> {
        let [start, end] = *self.blocks.get(name)?;
        self.features.get(start..end)
    }

    /// Mean activation of a block; 0.5 (neutral) for a missing or empty block.
    pub fn block_mean(&self, name: &str) -> f64 {
        match self.block(name) {
            Some(values) if !values.is_empty() => mean(values),
            _ => 0.5,
        }
    }

    /// Mean of the fractional sub-range `[lo, hi)` of a block.
    ///
    /// The sub-range always covers at least one index of a non-empty block.
    pub fn slice_mean(&self, name: &str, lo: f64, hi: f64) -> f64 {
        let Some(values) = self.block(name) else {
            return 0.5;
        };
        if values.is_empty() {
            return 0.5;
        }
        let n = values.len();
        let start = ((n as f64) * lo).floor() as usize;
        let start = start.min(n - 1);
        let end = (((n as f64) * hi).ceil() as usize).clamp(start + 1, n);
        mean(&values[start..end])
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub enum CaseViolation {
    DimensionMismatch { expected: usize, got: usize },
    OutOfRange { index: usize, value: f64 },
    BlockOverlap { first: String, second: String },
    BlockGap { start: usize, end: usize },
    BlockOutOfBounds { block: String, range: BlockRange },
    HiddenLabelOutOfRange { label: usize, treatments: usize },
}

impl fmt::Display for CaseViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CaseViolation::DimensionMismatch { expected, got } => {
                write!(f, "DimensionMismatch: expected {expected} features, got {got}")
            }
            CaseViolation::OutOfRange { index, value } => {
                write!(f, "OutOfRange: feature {index} = {value} not in [0,1]")
            }
            CaseViolation::BlockOverlap { first, second } => {
                write!(f, "BlockOverlap: `{first}` overlaps `{second}`")
            }
            CaseViolation::BlockGap { start, end } => {
                write!(f, "BlockGap: indices [{start},{end}) not covered by any block")
            }
            CaseViolation::BlockOutOfBounds { block, range } => {
                write!(f, "BlockOutOfBounds: `{block}` = [{},{}) invalid", range[0], range[1])
            }
            CaseViolation::HiddenLabelOutOfRange { label, treatments } => {
                write!(f, "HiddenLabelOutOfRange: label {label} with {treatments} treatments")
            }
        }
    }
}

/// Check a case against the configured feature dimension and treatment count.
///
/// Returns the case unchanged when valid, otherwise every violation found.
pub fn validate_case(
    case: PatientCase,
    feature_dim: usize,
    n_treatments: usize,
) -> std::result::Result<PatientCase, Vec<CaseViolation>> {
    let mut violations = Vec::new();
    if case.features.len() != feature_dim {
        violations.push(CaseViolation::DimensionMismatch {
            expected: feature_dim,
            got: case.features.len(),
        });
    }
    for (index, &value) in case.features.iter().enumerate() {
        if !(value.is_finite() && (0.0..=1.0).contains(&value)) {
            violations.push(CaseViolation::OutOfRange { index, value });
        }
    }

    let mut ranges: Vec<(&String, BlockRange)> = Vec::new();
    for (name, &range) in &case.blocks {
        if range[0] >= range[1] || range[1] > feature_dim {
            violations.push(CaseViolation::BlockOutOfBounds {
                block: name.clone(),
                range,
            });
        } else {
            ranges.push((name, range));
        }
    }
    ranges.sort_by_key(|(_, r)| (r[0], r[1]));
    let mut covered_to = 0usize;
    let mut prev: Option<&String> = None;
    for (name, [start, end]) in &ranges {
        if *start < covered_to {
            violations.push(CaseViolation::BlockOverlap {
                first: prev.cloned().unwrap_or_default(),
                second: (*name).clone(),
            });
        } else if *start > covered_to {
            violations.push(CaseViolation::BlockGap {
                start: covered_to,
                end: *start,
            });
        }
        if *end > covered_to {
            covered_to = *end;
            prev = Some(name);
        }
    }
    if covered_to < feature_dim {
        violations.push(CaseViolation::BlockGap {
            start: covered_to,
            end: feature_dim,
        });
    }

    if let Some(label) = case.hidden_label {
        if label >= n_treatments {
            violations.push(CaseViolation::HiddenLabelOutOfRange {
                label,
                treatments: n_treatments,
            });
        }
    }

    if violations.is_empty() {
        Ok(case)
    } else {
        Err(violations)
    }
}

/// [`validate_case`] lifted into the crate error type.
pub fn require_valid(case: PatientCase, feature_dim: usize, n_treatments: usize) -> Result<PatientCase> {
    validate_case(case, feature_dim, n_treatments).map_err(Error::InvalidCase)
}
