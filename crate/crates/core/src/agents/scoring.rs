use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::profile::{Cmp, RoleProfile, Transform};
use crate::domain::{PatientCase, TreatmentOption};

/// Treatment of reciprocal terms `x⁻¹` in the preference formulas.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InverseMode {
    /// `1 − x`
    #[default]
    Bounded,
    /// `min(1 / max(x, 0.1), 10) / 10`
    Literal,
}

impl InverseMode {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            InverseMode::Bounded => 1.0 - x,
            InverseMode::Literal => (1.0 / x.max(0.1)).min(10.0) / 10.0,
        }
    }
}

/// Named factor scores for one (role, treatment) pair, each in `[0, 1]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FactorScores(pub BTreeMap<String, f64>);

impl FactorScores {
    pub fn get(&self, name: &str) -> f64 {
        self.0.get(name).copied().unwrap_or(0.0)
    }

    pub fn from_pairs(pairs: &[(&str, f64)]) -> Self {
        Self(pairs.iter().map(|(k, v)| ((*k).to_string(), *v)).collect())
    }
}

/// Decision-factor-weighted mean activation of the role's case slices.
pub fn case_score(profile: &RoleProfile, case: &PatientCase) -> f64 {
    profile
        .decision_factors
        .iter()
        .map(|f| f.weight * case.slice_mean(&f.block, f.lo, f.hi))
        .sum::<f64>()
        .clamp(0.0, 1.0)
}

pub fn derive_factor_scores(
    profile: &RoleProfile,
    case: &PatientCase,
    treatment: &TreatmentOption,
    max_cost: f64,
) -> FactorScores {
    let x = case_score(profile, case);
    FactorScores(
        profile
            .factors
            .iter()
            .map(|spec| {
                let attrs: f64 = spec
                    .terms
                    .iter()
                    .map(|t| t.weight * t.attr.value(treatment, max_cost))
                    .sum();
                let a = spec.case_attr.value(treatment, max_cost);
                let interaction = x * a + (1.0 - x) * (1.0 - a);
                let score = attrs + spec.case_weight * interaction;
                (spec.name.clone(), score.clamp(0.0, 1.0))
            })
            .collect(),
    )
}

/// Evaluate the role's preference formula, clipped to `[0, 1]`.
pub fn role_preference(profile: &RoleProfile, scores: &FactorScores, inverse: InverseMode) -> f64 {
    profile
        .preference
        .iter()
        .map(|term| {
            let x = scores.get(&term.factor);
            let v = match term.transform {
                Transform::Direct => x,
                Transform::Complement => 1.0 - x,
                Transform::Inverse => inverse.apply(x),
            };
            term.weight * v
        })
        .sum::<f64>()
        .clamp(0.0, 1.0)
}

pub fn generate_concerns(
    profile: &RoleProfile,
    case: &PatientCase,
    treatment: &TreatmentOption,
    max_cost: f64,
) -> BTreeSet<String> {
    profile
        .concern_rules
        .iter()
        .filter(|rule| {
            let c = &rule.case;
            let v = case.slice_mean(&c.block, c.lo, c.hi);
            let case_ok = match c.cmp {
                Cmp::AtLeast => v >= c.threshold,
                Cmp::AtMost => v <= c.threshold,
            };
            let tox_ok = rule.min_toxicity.is_none_or(|t| treatment.toxicity >= t);
            let cost_ok = rule
                .min_cost_fraction
                .is_none_or(|f| treatment.cost / max_cost >= f);
            case_ok && tox_ok && cost_ok
        })
        .map(|rule| rule.code.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{default_blocks, Role, BLOCK_COMORBIDITIES};

    fn neutral_case() -> PatientCase {
        PatientCase {
            id: "n".into(),
            features: vec![0.5; 247],
            blocks: default_blocks(247),
            hidden_label: None,
            metadata: Default::default(),
        }
    }

    fn treatment(efficacy: f64, toxicity: f64, qol: f64) -> TreatmentOption {
        TreatmentOption {
            index: 0,
            name: "T".into(),
            efficacy,
            toxicity,
            qol_impact: qol,
            cost: 10.0,
            modulation: Default::default(),
        }
    }

    #[test]
    fn oncologist_extremes_on_neutral_case() {
        let p = RoleProfile::standard(Role::Oncologist);
        let s = derive_factor_scores(&p, &neutral_case(), &treatment(1.0, 0.0, 1.0), 10.0);
        assert!(s.get("efficacy") >= 0.9);
        assert_eq!(s.get("toxicity"), 0.0);
    }

    #[test]
    fn oncologist_formula() {
        let p = RoleProfile::standard(Role::Oncologist);
        let best = FactorScores::from_pairs(&[("efficacy", 1.0), ("survival", 1.0), ("toxicity", 0.0)]);
        assert!((role_preference(&p, &best, InverseMode::Bounded) - 1.0).abs() < 1e-15);
        let mid = FactorScores::from_pairs(&[("efficacy", 0.8), ("survival", 0.6), ("toxicity", 0.3)]);
        assert!((role_preference(&p, &mid, InverseMode::Bounded) - 0.73).abs() < 1e-12);
    }

    #[test]
    fn nurse_formula() {
        let p = RoleProfile::standard(Role::Nurse);
        let s = FactorScores::from_pairs(&[("care_burden", 0.2), ("tolerance", 0.9), ("family_support", 0.8)]);
        assert!((role_preference(&p, &s, InverseMode::Bounded) - 0.83).abs() < 1e-12);
    }

    #[test]
    fn literal_inverse_is_clamped() {
        assert_eq!(InverseMode::Literal.apply(0.0), 1.0);
        assert_eq!(InverseMode::Literal.apply(1.0), 0.1);
        assert_eq!(InverseMode::Bounded.apply(0.3), 0.7);
    }

    #[test]
    fn nurse_flags_toxic_treatment_for_frail_patient() {
        let p = RoleProfile::standard(Role::Nurse);
        let mut case = neutral_case();
        let [s, e] = case.blocks[BLOCK_COMORBIDITIES];
        for v in &mut case.features[s..e] {
            *v = 0.9;
        }
        let concerns = generate_concerns(&p, &case, &treatment(0.5, 0.9, 0.0), 10.0);
        assert_eq!(concerns.into_iter().collect::<Vec<_>>(), vec!["high_toxicity_frail_patient"]);
    }

    #[test]
    fn neutral_case_raises_no_concerns() {
        for role in Role::ALL {
            let p = RoleProfile::standard(role);
            for tox in [0.0, 0.5, 1.0] {
                assert!(generate_concerns(&p, &neutral_case(), &treatment(0.5, tox, 0.0), 10.0).is_empty());
            }
        }
    }
}
