//! Seeded synthetic corpus standing in for guideline and literature indices.

use rand::seq::SliceRandom;
use rand::Rng;

use super::store::{tokenize, CorpusStore};
use crate::domain::{
    Bias, EvidenceItem, EvidenceKind, Role, TreatmentCatalog, BLOCK_COMORBIDITIES, BLOCK_DEMOGRAPHICS,
    BLOCK_LABS, BLOCK_VITALS,
};
use crate::error::Result;
use crate::rng;

pub const BLOCK_TAGS: [(&str, &str); 4] = [
    (BLOCK_DEMOGRAPHICS, "elderly"),
    (BLOCK_VITALS, "hemodynamic"),
    (BLOCK_LABS, "advanced"),
    (BLOCK_COMORBIDITIES, "comorbid"),
];

pub fn role_keywords(role: Role) -> &'static [&'static str] {
    match role {
        Role::Oncologist => &["oncology", "tumour", "staging", "survival", "efficacy"],
        Role::Radiologist => &["imaging", "radiology", "response", "anatomy", "monitoring"],
        Role::Nurse => &["nursing", "tolerance", "burden", "caregiving", "support"],
        Role::Psychologist => &["psychological", "coping", "anxiety", "autonomy", "wellbeing"],
        Role::PatientAdvocate => &["preferences", "ethics", "consent", "access", "values"],
        Role::Nutritionist => &["nutrition", "dietary", "metabolic", "supplement", "weight"],
        Role::RehabTherapist => &["rehabilitation", "function", "mobility", "independence", "recovery"],
    }
}

const FILLER: [&str; 32] = [
    "cohort", "patients", "outcome", "analysis", "trial", "randomized", "median", "followup", "hazard",
    "ratio", "endpoint", "secondary", "primary", "baseline", "arm", "interim", "protocol", "adverse",
    "events", "grade", "toxicity", "dose", "regimen", "interval", "cycle", "assessment", "score",
    "scale", "index", "retrospective", "prospective", "registry",
];

const SOURCES: [(EvidenceKind, &str); 4] = [
    (EvidenceKind::Guideline, "NCCN Guidelines"),
    (EvidenceKind::Rct, "PubMed"),
    (EvidenceKind::Observational, "PubMed"),
    (EvidenceKind::ExpertOpinion, "Expert Panel"),
];

#[derive(Debug, Clone, Copy)]
pub struct SyntheticCorpusSpec {
    pub seed: u64,
    /// Documents per (role, treatment) topic.
    pub docs_per_topic: usize,
    pub now_year: i32,
}

/// Documents built from a topic's query vocabulary plus filler, so that
/// relevance scores spread across the 0.7 retention threshold.
pub fn synthetic_corpus(spec: SyntheticCorpusSpec, catalog: &TreatmentCatalog) -> Result<CorpusStore> {
    let mut rng = rng::stream(spec.seed, &["corpus".into()]);
    let mut items = Vec::new();
    for role in Role::ALL {
        for treatment in &catalog.options {
            for n in 0..spec.docs_per_topic {
                let kind = match rng.gen_range(0..20) {
                    0..=4 => EvidenceKind::Guideline,
                    5..=10 => EvidenceKind::Rct,
                    11..=16 => EvidenceKind::Observational,
                    _ => EvidenceKind::ExpertOpinion,
                };
                let bias = *Bias::ALL.choose(&mut rng).expect("non-empty");
                let year = rng.gen_range(2012..=spec.now_year);

                let mut words: Vec<String> = Vec::new();
                let keywords = role_keywords(role);
                let kept = rng.gen_range(3..=keywords.len());
                let mut shuffled = keywords.to_vec();
                shuffled.shuffle(&mut rng);
                words.extend(shuffled[..kept].iter().map(|s| (*s).to_string()));
                words.extend(tokenize(&treatment.name));
                for (_, tag) in BLOCK_TAGS {
                    if rng.gen_bool(0.4) {
                        words.push(tag.to_string());
                    }
                }
                let noise = rng.gen_range(0..=5);
                for _ in 0..noise {
                    words.push((*FILLER.choose(&mut rng).expect("non-empty")).to_string());
                }
                words.shuffle(&mut rng);

                let source = SOURCES
                    .iter()
                    .find(|(k, _)| *k == kind)
                    .map(|(_, s)| *s)
                    .unwrap_or("PubMed");
                let title = format!("{} perspective on {}", role.display_name(), treatment.name);
                items.push(EvidenceItem {
                    id: format!("{}-{}-{n:02}", role.as_str().to_lowercase(), treatment.index),
                    kind,
                    year,
                    bias,
                    title,
                    text: words.join(" "),
                    source: source.to_string(),
                    relevance: 0.0,
                });
            }
        }
    }
    CorpusStore::new(items, spec.now_year)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_unique() {
        let spec = SyntheticCorpusSpec {
            seed: 3,
            docs_per_topic: 4,
            now_year: 2025,
        };
        let catalog = TreatmentCatalog::standard();
        let a = synthetic_corpus(spec, &catalog).unwrap();
        let b = synthetic_corpus(spec, &catalog).unwrap();
        assert_eq!(a.len(), 7 * 7 * 4);
        assert_eq!(a.to_jsonl(), b.to_jsonl());
        assert!(a.items().iter().all(|i| i.year <= 2025));
    }
}
