//! Role profiles as data: preference formulas, decision factors, factor
//! derivation table and concern rules. Everything here can be overridden
//! from configuration.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::domain::{Role, TreatmentOption, BLOCK_COMORBIDITIES, BLOCK_DEMOGRAPHICS, BLOCK_LABS, BLOCK_VITALS};

/// How a factor score enters the role's preference formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Direct,
    /// `1 − x`
    Complement,
    /// Reciprocal term; see [`super::InverseMode`].
    Inverse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreferenceTerm {
    pub factor: String,
    pub weight: f64,
    pub transform: Transform,
}

/// Treatment attribute mapped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attr {
    Efficacy,
    Toxicity,
    /// `1 − τ`
    Tolerability,
    /// `(q + 1) / 2`
    Qol,
    /// `1 − (q + 1) / 2`
    QolLoss,
    /// `c / c_max`
    Cost,
    /// `1 − c / c_max`
    Affordability,
}

impl Attr {
    pub fn value(self, t: &TreatmentOption, max_cost: f64) -> f64 {
        let cost = (t.cost / max_cost).clamp(0.0, 1.0);
        match self {
            Attr::Efficacy => t.efficacy,
            Attr::Toxicity => t.toxicity,
            Attr::Tolerability => 1.0 - t.toxicity,
            Attr::Qol => t.qol_unit(),
            Attr::QolLoss => 1.0 - t.qol_unit(),
            Attr::Cost => cost,
            Attr::Affordability => 1.0 - cost,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedAttr {
    pub attr: Attr,
    pub weight: f64,
}

/// One factor score as a convex combination of attribute terms and a
/// case-interaction term `x·a + (1 − x)·(1 − a)`, where `x` is the role's
/// case score and `a = case_attr`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorSpec {
    pub name: String,
    pub terms: Vec<WeightedAttr>,
    pub case_weight: f64,
    pub case_attr: Attr,
}

/// A weighted clinical decision factor read from a fractional slice of one
/// feature block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionFactor {
    pub name: String,
    pub weight: f64,
    pub block: String,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cmp {
    AtLeast,
    AtMost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseCondition {
    pub block: String,
    pub lo: f64,
    pub hi: f64,
    pub cmp: Cmp,
    pub threshold: f64,
}

/// Fires when the case condition holds and every present treatment
/// threshold is met. Toxicity and cost thresholds are lower bounds only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcernRule {
    pub code: String,
    pub case: CaseCondition,
    #[serde(default)]
    pub min_toxicity: Option<f64>,
    #[serde(default)]
    pub min_cost_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoleProfile {
    pub role: Role,
    pub preference: Vec<PreferenceTerm>,
    pub confidence_range: [f64; 2],
    pub decision_factors: Vec<DecisionFactor>,
    pub factors: Vec<FactorSpec>,
    pub concern_rules: Vec<ConcernRule>,
}

impl RoleProfile {
    pub fn validate(&self) -> Result<(), String> {
        let role = self.role;
        let sum: f64 = self.preference.iter().map(|t| t.weight).sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(format!("{role}: preference weights sum to {sum}"));
        }
        let [lo, hi] = self.confidence_range;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return Err(format!("{role}: confidence range [{lo}, {hi}] invalid"));
        }
        let names: BTreeSet<&str> = self.factors.iter().map(|f| f.name.as_str()).collect();
        for term in &self.preference {
            if !names.contains(term.factor.as_str()) {
                return Err(format!("{role}: preference uses undefined factor `{}`", term.factor));
            }
        }
        for f in &self.factors {
            let total = f.case_weight + f.terms.iter().map(|t| t.weight).sum::<f64>();
            let nonneg = f.case_weight >= 0.0 && f.terms.iter().all(|t| t.weight >= 0.0);
            if !nonneg || (total - 1.0).abs() > 1e-9 {
                return Err(format!("{role}: factor `{}` is not a convex combination", f.name));
            }
        }
        let dsum: f64 = self.decision_factors.iter().map(|d| d.weight).sum();
        if (dsum - 1.0).abs() > 1e-9 {
            return Err(format!("{role}: decision factor weights sum to {dsum}"));
        }
        Ok(())
    }

    pub fn standard(role: Role) -> Self {
        use Attr::*;
        use Transform::*;
        let pref = |terms: &[(&str, f64, Transform)]| -> Vec<PreferenceTerm> {
            terms
                .iter()
                .map(|(f, w, t)| PreferenceTerm {
                    factor: (*f).to_string(),
                    weight: *w,
                    transform: *t,
                })
                .collect()
        };
        let factor = |name: &str, terms: &[(Attr, f64)], case_weight: f64, case_attr: Attr| FactorSpec {
            name: name.to_string(),
            terms: terms.iter().map(|(a, w)| WeightedAttr { attr: *a, weight: *w }).collect(),
            case_weight,
            case_attr,
        };
        let decision = |items: &[(&str, f64, &str, f64, f64)]| -> Vec<DecisionFactor> {
            items
                .iter()
                .map(|(n, w, b, lo, hi)| DecisionFactor {
                    name: (*n).to_string(),
                    weight: *w,
                    block: (*b).to_string(),
                    lo: *lo,
                    hi: *hi,
                })
                .collect()
        };
        let rule = |code: &str, block: &str, lo: f64, hi: f64, cmp: Cmp, threshold: f64, tox: Option<f64>, cost: Option<f64>| {
            ConcernRule {
                code: code.to_string(),
                case: CaseCondition {
                    block: block.to_string(),
                    lo,
                    hi,
                    cmp,
                    threshold,
                },
                min_toxicity: tox,
                min_cost_fraction: cost,
            }
        };
        let (d, v, l, c) = (BLOCK_DEMOGRAPHICS, BLOCK_VITALS, BLOCK_LABS, BLOCK_COMORBIDITIES);
        use Cmp::*;

        match role {
            Role::Oncologist => Self {
                role,
                preference: pref(&[("efficacy", 0.6, Direct), ("survival", 0.3, Direct), ("toxicity", 0.1, Inverse)]),
                confidence_range: [0.80, 0.95],
                decision_factors: decision(&[
                    ("tumour_stage", 0.35, l, 0.0, 0.25),
                    ("histology", 0.25, l, 0.25, 0.5),
                    ("molecular_markers", 0.20, l, 0.5, 0.75),
                    ("performance_status", 0.15, v, 0.0, 0.5),
                    ("treatment_history", 0.05, c, 0.0, 0.3),
                ]),
                factors: vec![
                    factor("efficacy", &[(Efficacy, 0.8)], 0.2, Efficacy),
                    factor("survival", &[(Efficacy, 0.5), (Qol, 0.3)], 0.2, Efficacy),
                    factor("toxicity", &[(Toxicity, 1.0)], 0.0, Toxicity),
                ],
                concern_rules: vec![
                    rule("cardiotoxicity_risk", c, 0.0, 0.3, AtLeast, 0.65, Some(0.6), None),
                    rule("advanced_stage_limited_benefit", l, 0.0, 0.25, AtLeast, 0.8, None, None),
                ],
            },
            Role::Radiologist => Self {
                role,
                preference: pref(&[("imaging_support", 0.5, Direct), ("anatomical_fit", 0.3, Direct), ("monitoring", 0.2, Direct)]),
                confidence_range: [0.75, 0.90],
                decision_factors: decision(&[
                    ("imaging_findings", 0.45, l, 0.0, 0.4),
                    ("tumour_response", 0.30, l, 0.4, 0.7),
                    ("anatomical_constraints", 0.15, d, 0.0, 0.5),
                    ("procedural_feasibility", 0.10, v, 0.5, 1.0),
                ]),
                factors: vec![
                    factor("imaging_support", &[(Efficacy, 0.6)], 0.4, Efficacy),
                    factor("anatomical_fit", &[(Tolerability, 0.5)], 0.5, Tolerability),
                    factor("monitoring", &[(Qol, 0.5), (Affordability, 0.5)], 0.0, Qol),
                ],
                concern_rules: vec![
                    rule("imaging_response_uncertain", l, 0.4, 0.7, AtMost, 0.25, None, None),
                    rule("radiation_exposure_risk", d, 0.0, 0.5, AtMost, 0.3, Some(0.5), None),
                ],
            },
            Role::Nurse => Self {
                role,
                preference: pref(&[("care_burden", 0.4, Complement), ("tolerance", 0.3, Direct), ("family_support", 0.3, Direct)]),
                confidence_range: [0.70, 0.85],
                decision_factors: decision(&[
                    ("patient_tolerance", 0.40, v, 0.0, 0.6),
                    ("care_complexity", 0.25, c, 0.0, 0.5),
                    ("resource_requirements", 0.20, d, 0.5, 1.0),
                    ("family_support", 0.15, d, 0.0, 0.5),
                ]),
                factors: vec![
                    factor("care_burden", &[(Toxicity, 0.6), (Cost, 0.2)], 0.2, Toxicity),
                    factor("tolerance", &[(Tolerability, 0.6)], 0.4, Tolerability),
                    factor("family_support", &[(Qol, 0.4)], 0.6, Qol),
                ],
                concern_rules: vec![
                    rule("high_toxicity_frail_patient", c, 0.0, 1.0, AtLeast, 0.6, Some(0.7), None),
                    rule("limited_family_support", d, 0.0, 0.5, AtMost, 0.2, None, None),
                    rule("high_care_burden", v, 0.0, 0.6, AtMost, 0.25, Some(0.8), None),
                ],
            },
            Role::Psychologist => Self {
                role,
                preference: pref(&[("psychological_impact", 0.4, Inverse), ("coping", 0.3, Direct), ("autonomy", 0.3, Direct)]),
                confidence_range: [0.65, 0.80],
                decision_factors: decision(&[
                    ("mental_health", 0.45, c, 0.5, 1.0),
                    ("coping_capacity", 0.25, d, 0.0, 0.5),
                    ("social_support", 0.20, d, 0.5, 1.0),
                    ("treatment_anxiety", 0.10, v, 0.6, 1.0),
                ]),
                factors: vec![
                    factor("psychological_impact", &[(Toxicity, 0.4), (QolLoss, 0.4)], 0.2, Toxicity),
                    factor("coping", &[(Qol, 0.6)], 0.4, Qol),
                    factor("autonomy", &[(Qol, 0.5), (Affordability, 0.3)], 0.2, Qol),
                ],
                concern_rules: vec![
                    rule("treatment_anxiety", v, 0.6, 1.0, AtLeast, 0.75, Some(0.6), None),
                    rule("depression_risk", c, 0.5, 1.0, AtLeast, 0.8, None, None),
                ],
            },
            Role::PatientAdvocate => Self {
                role,
                preference: pref(&[("patient_values", 0.5, Direct), ("ethical_alignment", 0.25, Direct), ("accessibility", 0.25, Direct)]),
                confidence_range: [0.75, 0.90],
                decision_factors: decision(&[
                    ("patient_preferences", 0.50, d, 0.0, 1.0),
                    ("ethical_considerations", 0.25, c, 0.3, 0.7),
                    ("informed_consent", 0.15, d, 0.25, 0.75),
                    ("accessibility", 0.10, d, 0.5, 1.0),
                ]),
                factors: vec![
                    factor("patient_values", &[(Qol, 0.5), (Efficacy, 0.2)], 0.3, Qol),
                    factor("ethical_alignment", &[(Efficacy, 0.5), (Tolerability, 0.5)], 0.0, Efficacy),
                    factor("accessibility", &[(Affordability, 0.7)], 0.3, Affordability),
                ],
                concern_rules: vec![
                    rule("financial_toxicity", d, 0.5, 1.0, AtMost, 0.3, None, Some(0.7)),
                    rule("consent_complexity", d, 0.25, 0.75, AtMost, 0.25, Some(0.7), None),
                ],
            },
            Role::Nutritionist => Self {
                role,
                preference: pref(&[("nutritional_support", 0.4, Direct), ("dietary_restriction", 0.3, Complement), ("metabolic_compatibility", 0.3, Direct)]),
                confidence_range: [0.60, 0.75],
                decision_factors: decision(&[
                    ("nutritional_status", 0.40, l, 0.75, 1.0),
                    ("nutrition_interactions", 0.30, l, 0.5, 0.75),
                    ("metabolic_impact", 0.20, v, 0.3, 0.7),
                    ("dietary_capacity", 0.10, c, 0.7, 1.0),
                ]),
                factors: vec![
                    factor("nutritional_support", &[(Tolerability, 0.5), (Qol, 0.3)], 0.2, Tolerability),
                    factor("dietary_restriction", &[(Toxicity, 0.7)], 0.3, Toxicity),
                    factor("metabolic_compatibility", &[(Tolerability, 0.6), (Efficacy, 0.2)], 0.2, Efficacy),
                ],
                concern_rules: vec![
                    rule("malnutrition_risk", l, 0.75, 1.0, AtMost, 0.2, None, None),
                    rule("metabolic_interaction", v, 0.3, 0.7, AtLeast, 0.75, Some(0.6), None),
                ],
            },
            Role::RehabTherapist => Self {
                role,
                preference: pref(&[("functional_preservation", 0.35, Direct), ("rehab_potential", 0.3, Direct), ("mobility_impact", 0.35, Inverse)]),
                confidence_range: [0.65, 0.80],
                decision_factors: decision(&[
                    ("functional_capacity", 0.35, v, 0.0, 0.5),
                    ("rehab_potential", 0.30, d, 0.0, 0.5),
                    ("mobility_impact", 0.20, c, 0.4, 0.8),
                    ("independence", 0.15, v, 0.5, 1.0),
                ]),
                factors: vec![
                    factor("functional_preservation", &[(Qol, 0.6)], 0.4, Qol),
                    factor("rehab_potential", &[(Efficacy, 0.4), (Qol, 0.3)], 0.3, Efficacy),
                    factor("mobility_impact", &[(Toxicity, 0.5), (QolLoss, 0.3)], 0.2, Toxicity),
                ],
                concern_rules: vec![
                    rule("mobility_loss", c, 0.4, 0.8, AtLeast, 0.75, Some(0.5), None),
                    rule("deconditioning_risk", v, 0.0, 0.5, AtMost, 0.25, None, None),
                ],
            },
        }
    }
}
