//! Synthetic cases with hidden labels, cohort execution and metrics.

mod engine;

use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use engine::{
    write_cohort, CaseOutcome, CohortMetrics, CohortOutcome, Engine, MethodMetrics, PolicyComparison, TrainOutcome,
};

use crate::domain::{clinical_fit, default_blocks, PatientCase, TreatmentCatalog};
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub feature_dim: usize,
    /// Default case difficulty in `[0, 1]`.
    pub difficulty: f64,
    /// Beta shape of the per-block latent severity.
    pub latent_shape: f64,
    /// Sub-segments per block, each with its own drift from the block level.
    pub segments: usize,
    pub segment_sd: f64,
    pub feature_sd: f64,
    /// Standard deviation of the label noise at difficulty 1.
    pub label_noise: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            feature_dim: crate::domain::DEFAULT_FEATURE_DIM,
            difficulty: 0.3,
            latent_shape: 2.0,
            segments: 4,
            segment_sd: 0.12,
            feature_sd: 0.08,
            label_noise: 0.2,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.feature_dim < 4 {
            return Err(format!("feature_dim {} < 4", self.feature_dim));
        }
        if !(0.0..=1.0).contains(&self.difficulty) {
            return Err(format!("difficulty {} not in [0,1]", self.difficulty));
        }
        if !(self.latent_shape.is_finite() && self.latent_shape > 0.0) || self.segments == 0 {
            return Err("latent_shape must be positive and segments >= 1".into());
        }
        if self.segment_sd < 0.0 || self.feature_sd < 0.0 || self.label_noise < 0.0 {
            return Err("noise scales must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseProfile {
    pub difficulty: f64,
}

/// Index of the treatment with the highest case-adjusted clinical fit.
pub fn best_fit(case: &PatientCase, catalog: &TreatmentCatalog) -> usize {
    let fits: Vec<f64> = catalog.adjusted_for(case).options.iter().map(clinical_fit).collect();
    crate::domain::argmax(&fits)
}

/// Draw one synthetic case. Each feature block has a latent severity; its
/// segments drift around that level and individual features add noise. The
/// hidden label is the best case-adjusted clinical fit after perturbing
/// every fit by difficulty-scaled Gaussian noise.
pub fn generate_case(seed: u64, profile: CaseProfile, cfg: &SimConfig, catalog: &TreatmentCatalog) -> PatientCase {
    let mut rng = seeded(seed);
    let d = cfg.feature_dim;
    let blocks = default_blocks(d);
    let latent = Beta::new(cfg.latent_shape, cfg.latent_shape).expect("validated shape");
    let seg_noise = Normal::new(0.0, cfg.segment_sd).expect("validated sd");
    let feat_noise = Normal::new(0.0, cfg.feature_sd).expect("validated sd");
    let mut features = vec![0.0; d];
    for &[start, end] in blocks.values() {
        let level: f64 = latent.sample(&mut rng);
        let len = end - start;
        let segs = cfg.segments.min(len).max(1);
        let seg_levels: Vec<f64> = (0..segs)
            .map(|_| (level + seg_noise.sample(&mut rng)).clamp(0.0, 1.0))
            .collect();
        for (j, f) in features[start..end].iter_mut().enumerate() {
            let seg = j * segs / len;
            *f = (seg_levels[seg] + feat_noise.sample(&mut rng)).clamp(0.0, 1.0);
        }
    }
    let mut case = PatientCase {
        id: format!("case-{seed:016x}"),
        features,
        blocks,
        hidden_label: None,
        metadata: Default::default(),
    };
    let adjusted = catalog.adjusted_for(&case);
    let sd = cfg.label_noise * profile.difficulty.clamp(0.0, 1.0);
    let noisy: Vec<f64> = adjusted
        .options
        .iter()
        .map(|t| {
            let noise = if sd > 0.0 {
                Normal::new(0.0, sd).expect("positive sd").sample(&mut rng)
            } else {
                0.0
            };
            clinical_fit(t) + noise
        })
        .collect();
    case.hidden_label = Some(crate::domain::argmax(&noisy));
    case.metadata.insert("difficulty".into(), format!("{:.3}", profile.difficulty));
    case.metadata.insert("generator_seed".into(), seed.to_string());
    case
}

/// `n` cases keyed by `(seed, index)` with ids `case-00000`, `case-00001`, ...
pub fn generate_cases(
    n: usize,
    seed: u64,
    difficulty: f64,
    cfg: &SimConfig,
    catalog: &TreatmentCatalog,
) -> Vec<PatientCase> {
    (0..n)
        .map(|i| {
            let s = derive_seed(seed, &["case".into(), i.into()]);
            let mut c = generate_case(s, CaseProfile { difficulty }, cfg, catalog);
            c.id = format!("case-{i:05}");
            c
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::validate_case;

    #[test]
    fn same_seed_same_case() {
        let cfg = SimConfig::default();
        let cat = TreatmentCatalog::standard();
        let p = CaseProfile { difficulty: 0.5 };
        assert_eq!(generate_case(11, p, &cfg, &cat), generate_case(11, p, &cfg, &cat));
    }

    #[test]
    fn zero_difficulty_label_is_best_fit() {
        let cfg = SimConfig::default();
        let cat = TreatmentCatalog::standard();
        for s in 0..200 {
            let c = generate_case(s, CaseProfile { difficulty: 0.0 }, &cfg, &cat);
            assert_eq!(c.hidden_label, Some(best_fit(&c, &cat)));
        }
    }

    #[test]
    fn generated_cases_validate() {
        let cfg = SimConfig::default();
        let cat = TreatmentCatalog::standard();
        for c in generate_cases(1000, 3, 0.7, &cfg, &cat) {
            assert!(validate_case(c, cfg.feature_dim, cat.len()).is_ok());
        }
    }
}
