use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::case::{PatientCase, BLOCK_COMORBIDITIES, BLOCK_DEMOGRAPHICS, BLOCK_LABS, BLOCK_VITALS};

/// A treatment option with its attribute vector `[efficacy, toxicity, qol, cost]`.
///
/// `modulation` shifts efficacy and toxicity by `Σ_b weight_b · (mean_b − 0.5)`
/// over the case's feature blocks, so the same catalog yields case-specific
/// attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreatmentOption {
    pub index: usize,
    pub name: String,
    pub efficacy: f64,
    pub toxicity: f64,
    pub qol_impact: f64,
    pub cost: f64,
    #[serde(default)]
    pub modulation: AttributeModulation,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeModulation {
    #[serde(default)]
    pub efficacy: BTreeMap<String, f64>,
    #[serde(default)]
    pub toxicity: BTreeMap<String, f64>,
}

impl TreatmentOption {
    pub fn is_valid(&self) -> bool {
        (0.0..=1.0).contains(&self.efficacy)
            && (0.0..=1.0).contains(&self.toxicity)
            && (-1.0..=1.0).contains(&self.qol_impact)
            && self.cost.is_finite()
            && self.cost > 0.0
    }

    /// Attributes specialised to one patient.
    pub fn adjusted_for(&self, case: &PatientCase) -> TreatmentOption {
        let shift = |weights: &BTreeMap<String, f64>| -> f64 {
            weights
                .iter()
                .map(|(block, w)| w * (case.block_mean(block) - 0.5))
                .sum()
        };
        TreatmentOption {
            efficacy: (self.efficacy + shift(&self.modulation.efficacy)).clamp(0.0, 1.0),
            toxicity: (self.toxicity + shift(&self.modulation.toxicity)).clamp(0.0, 1.0),
            ..self.clone()
        }
    }

    /// `(q + 1) / 2`, quality-of-life impact on the unit interval.
    pub fn qol_unit(&self) -> f64 {
        (self.qol_impact + 1.0) / 2.0
    }
}

/// Clinical appropriateness of a treatment from its attributes alone:
/// `0.5·η + 0.3·(1 − τ) + 0.2·(q + 1)/2`, always in `[0, 1]`.
pub fn clinical_fit(t: &TreatmentOption) -> f64 {
    0.5 * t.efficacy + 0.3 * (1.0 - t.toxicity) + 0.2 * t.qol_unit()
}

/// Ordered treatment catalog; `options[k].index == k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TreatmentCatalog {
    pub options: Vec<TreatmentOption>,
}

impl TreatmentCatalog {
    pub fn len(&self) -> usize {
        self.options.len()
    }

    pub fn is_empty(&self) -> bool {
        self.options.is_empty()
    }

    pub fn max_cost(&self) -> f64 {
        self.options.iter().map(|t| t.cost).fold(f64::MIN_POSITIVE, f64::max)
    }

    pub fn adjusted_for(&self, case: &PatientCase) -> TreatmentCatalog {
        TreatmentCatalog {
            options: self.options.iter().map(|t| t.adjusted_for(case)).collect(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.options.is_empty() {
            return Err("treatment catalog is empty".into());
        }
        for (k, t) in self.options.iter().enumerate() {
            if t.index != k {
                return Err(format!("treatment `{}` has index {} at position {k}", t.name, t.index));
            }
            if !t.is_valid() {
                return Err(format!("treatment `{}` has out-of-range attributes", t.name));
            }
        }
        Ok(())
    }

    pub fn standard() -> Self {
        // (name, efficacy, toxicity, qol, cost, efficacy modulation, toxicity modulation)
        type Mods = &'static [(&'static str, f64)];
        let rows: [(&str, f64, f64, f64, f64, Mods, Mods); 7] = [
            (
                "Surgery",
                0.80,
                0.55,
                0.10,
                30.0,
                &[(BLOCK_VITALS, 0.6), (BLOCK_LABS, -0.8)],
                &[(BLOCK_COMORBIDITIES, 0.6), (BLOCK_DEMOGRAPHICS, 0.3)],
            ),
            (
                "Chemotherapy",
                0.70,
                0.75,
                -0.30,
                25.0,
                &[(BLOCK_LABS, 0.4)],
                &[(BLOCK_COMORBIDITIES, 0.5), (BLOCK_VITALS, -0.4)],
            ),
            (
                "Radiotherapy",
                0.65,
                0.50,
                0.00,
                20.0,
                &[(BLOCK_LABS, 0.1), (BLOCK_VITALS, 0.2)],
                &[(BLOCK_COMORBIDITIES, 0.3)],
            ),
            (
                "Immunotherapy",
                0.60,
                0.35,
                0.30,
                60.0,
                &[(BLOCK_LABS, 0.3), (BLOCK_DEMOGRAPHICS, -0.3)],
                &[(BLOCK_COMORBIDITIES, 0.2)],
            ),
            (
                "Combination Therapy",
                0.85,
                0.85,
                -0.50,
                70.0,
                &[(BLOCK_LABS, 0.5), (BLOCK_VITALS, 0.4)],
                &[(BLOCK_COMORBIDITIES, 0.6), (BLOCK_DEMOGRAPHICS, 0.4)],
            ),
            (
                "Palliative Care",
                0.30,
                0.10,
                0.60,
                10.0,
                &[(BLOCK_LABS, 1.0), (BLOCK_COMORBIDITIES, 0.4)],
                &[],
            ),
            (
                "Watchful Waiting",
                0.20,
                0.02,
                0.70,
                2.0,
                &[(BLOCK_LABS, -1.0), (BLOCK_DEMOGRAPHICS, 0.3)],
                &[],
            ),
        ];
        let to_map = |m: Mods| m.iter().map(|(b, w)| ((*b).to_string(), *w)).collect();
        TreatmentCatalog {
            options: rows
                .iter()
                .enumerate()
                .map(|(index, (name, e, t, q, c, me, mt))| TreatmentOption {
                    index,
                    name: (*name).to_string(),
                    efficacy: *e,
                    toxicity: *t,
                    qol_impact: *q,
                    cost: *c,
                    modulation: AttributeModulation {
                        efficacy: to_map(me),
                        toxicity: to_map(mt),
                    },
                })
                .collect(),
        }
    }
}

impl Default for TreatmentCatalog {
    fn default() -> Self {
        Self::standard()
    }
}
