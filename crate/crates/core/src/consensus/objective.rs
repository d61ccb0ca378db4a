use serde::{Deserialize, Serialize};

use crate::domain::{clinical_fit, Matrix, Opinion, TreatmentCatalog};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveWeights {
    pub consensus: f64,
    pub clinical_fit: f64,
    pub evidence: f64,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        Self {
            consensus: 0.4,
            clinical_fit: 0.4,
            evidence: 0.2,
        }
    }
}

impl ObjectiveWeights {
    pub fn is_valid(&self) -> bool {
        let all = [self.consensus, self.clinical_fit, self.evidence];
        all.iter().all(|w| w.is_finite() && *w >= 0.0) && (all.iter().sum::<f64>() - 1.0).abs() <= 1e-9
    }
}

/// `J = α·consensus + β·fit + γ·evidence`.
pub fn objective_j<T: Scalar>(consensus: T, clinical_fit: T, evidence: T, w: &ObjectiveWeights) -> T {
    T::lit(w.consensus) * consensus + T::lit(w.clinical_fit) * clinical_fit + T::lit(w.evidence) * evidence
}

/// Per-treatment column support: column means scaled so the best column is 1.
pub fn consensus_support<T: Scalar>(m: &Matrix<T>) -> Vec<T> {
    let means = m.column_means();
    let max = means.iter().copied().fold(T::zero(), T::max);
    if max <= T::zero() {
        return vec![T::zero(); means.len()];
    }
    means.into_iter().map(|v| v / max).collect()
}

/// Mean grade score over the opinions whose evidence chain backs treatment `k`;
/// zero when no chain does.
pub fn evidence_quality(opinions: &[Opinion], n_treatments: usize) -> Vec<f64> {
    let mut sums = vec![0.0; n_treatments];
    let mut counts = vec![0usize; n_treatments];
    for o in opinions {
        if let Some(k) = o.evidence.treatment.filter(|&k| k < n_treatments) {
            sums[k] += o.evidence.grade_score;
            counts[k] += 1;
        }
    }
    sums.iter()
        .zip(&counts)
        .map(|(&s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
        .collect()
}

/// Decomposition of `J` for one treatment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JTerm {
    pub treatment: usize,
    pub name: String,
    pub consensus: f64,
    pub clinical_fit: f64,
    pub evidence_quality: f64,
    pub j: f64,
}

pub fn j_breakdown(
    m: &Matrix<f64>,
    opinions: &[Opinion],
    catalog: &TreatmentCatalog,
    w: &ObjectiveWeights,
) -> Vec<JTerm> {
    let support = consensus_support(m);
    let evidence = evidence_quality(opinions, catalog.len());
    catalog
        .options
        .iter()
        .zip(support)
        .zip(evidence)
        .map(|((t, c), e)| {
            let fit = clinical_fit(t);
            JTerm {
                treatment: t.index,
                name: t.name.clone(),
                consensus: c,
                clinical_fit: fit,
                evidence_quality: e,
                j: objective_j(c, fit, e, w),
            }
        })
        .collect()
}
