//! Engine routines against the reference implementations in `support`.

mod support;

use mdt_core::consensus::{discordance, kendall_w, normalize_preferences, weight_entry};
use mdt_core::domain::{Bias, EvidenceItem, EvidenceKind, Grade, Matrix, Role, TreatmentCatalog};
use mdt_core::evidence::{
    assess_grade, construct_query, item_grade, retrieve, synthetic_corpus, CorpusStore, EvidenceConfig, Query,
    SyntheticCorpusSpec,
};
use mdt_core::rng::seeded;
use mdt_core::sim::{generate_cases, SimConfig};
use rand::seq::SliceRandom;
use rand::Rng;
use support::*;

#[test]
fn kendall_w_matches_rank_sum_reference() {
    let mut rng = seeded(11);
    for i in 0..1000 {
        let rows = if i % 4 == 3 { tied_rows(&mut rng, 7, 7) } else { random_rows(&mut rng, 7, 7) };
        let m = Matrix::from_rows(&rows).unwrap();
        for tc in [false, true] {
            let w = kendall_w(&m, tc).unwrap();
            assert!((w - brute_kendall_w(&rows, tc)).abs() <= 1e-12, "matrix {i} tie_correction {tc}");
        }
    }
}

#[test]
fn kendall_w_extremes() {
    let row = vec![0.1, 0.9, 0.4, 0.7, 0.2, 0.5, 0.3];
    let same = Matrix::from_rows(&vec![row.clone(); 7]).unwrap();
    assert_eq!(kendall_w(&same, false).unwrap(), 1.0);
    let reversed: Vec<f64> = row.iter().map(|v| 1.0 - v).collect();
    let pair = Matrix::from_rows(&[row, reversed]).unwrap();
    assert_eq!(kendall_w(&pair, false).unwrap(), 0.0);
}

#[test]
fn kendall_w_other_shapes() {
    let mut rng = seeded(12);
    for _ in 0..300 {
        let n = rng.gen_range(2..10);
        let k = rng.gen_range(2..10);
        let rows = random_rows(&mut rng, n, k);
        let w = kendall_w(&Matrix::from_rows(&rows).unwrap(), false).unwrap();
        assert!((w - brute_kendall_w(&rows, false)).abs() <= 1e-12);
    }
}

#[test]
fn discordance_matches_reference() {
    let mut rng = seeded(13);
    for i in 0..1000 {
        let n = rng.gen_range(2..9);
        let k = rng.gen_range(2..8);
        let rows = if i % 5 == 4 { tied_rows(&mut rng, n, k) } else { random_rows(&mut rng, n, k) };
        let (_, flagged) = discordance(&Matrix::from_rows(&rows).unwrap());
        assert_eq!(flagged, brute_flagged(&rows), "matrix {i}");
    }
}

#[test]
fn discordance_uniform_deviation_flags_nobody() {
    // identical rows, and two mirrored rows with equal deviation
    let same = Matrix::from_rows(&vec![vec![0.2, 0.5, 0.9]; 4]).unwrap();
    assert!(discordance(&same).1.is_empty());
    let mirrored = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
    assert!(discordance(&mirrored).1.is_empty());
}

#[test]
fn weighting_spot_values() {
    assert_eq!(weight_entry(1.0, 0.9, 0), 0.9);
    let expected = 0.8 * 0.9 / (1.0 + 3.0f64.ln());
    assert!((weight_entry(0.8, 0.9, 2) - expected).abs() <= 1e-15);
    assert!((expected - 0.343_09).abs() < 1e-5);
    assert_eq!(weight_entry(0.0, 0.7, 4), 0.0);
    assert_eq!(normalize_preferences(&[0.4, 0.4], 1e-6).unwrap(), vec![0.5, 0.5]);
}

#[test]
fn gradient_checks_all_network_kinds() {
    let (worst, count) = grad_check_suite(21, 6);
    assert!(count >= 20);
    assert!(worst < 1e-4, "worst relative error {worst:e}");
}

fn random_corpus<R: Rng>(rng: &mut R, size: usize) -> Vec<EvidenceItem> {
    const VOCAB: [&str; 16] = [
        "chemotherapy", "toxicity", "survival", "staging", "imaging", "nutrition", "frailty", "renal",
        "cardiac", "quality", "life", "surgery", "radiation", "palliative", "elderly", "comorbidity",
    ];
    (0..size)
        .map(|i| {
            let len = rng.gen_range(0..12);
            let text: Vec<&str> = (0..len).map(|_| *VOCAB.choose(rng).unwrap()).collect();
            EvidenceItem {
                id: format!("doc-{i:04}"),
                kind: *EvidenceKind::ALL.choose(rng).unwrap(),
                year: rng.gen_range(2010..=2025),
                bias: *Bias::ALL.choose(rng).unwrap(),
                title: String::new(),
                text: text.join(" "),
                source: "src".into(),
                relevance: 0.0,
            }
        })
        .collect()
}

fn assert_same_ranking(store: &CorpusStore, query: &Query, cfg: &EvidenceConfig) {
    let (g, l) = retrieve(store, query, cfg);
    let (og, ol) = oracle_retrieve(store.items(), query, cfg, store.now_year);
    let flat = |v: &[EvidenceItem]| -> Vec<(String, u64)> { v.iter().map(|i| (i.id.clone(), i.relevance.to_bits())).collect() };
    let oflat = |v: &[(String, f64)]| -> Vec<(String, u64)> { v.iter().map(|(id, r)| (id.clone(), r.to_bits())).collect() };
    assert_eq!(flat(&g), oflat(&og), "guidelines for {query:?}");
    assert_eq!(flat(&l), oflat(&ol), "literature for {query:?}");
}

#[test]
fn retrieval_matches_exhaustive_tfidf_on_synthetic_corpus() {
    let catalog = TreatmentCatalog::standard();
    let cfg = EvidenceConfig::default();
    let store = synthetic_corpus(
        SyntheticCorpusSpec {
            seed: 5,
            docs_per_topic: 20,
            now_year: 2025,
        },
        &catalog,
    )
    .unwrap();
    assert!(store.len() <= 1000);
    for case in generate_cases(10, 3, 0.3, &SimConfig::default(), &catalog) {
        for role in Role::ALL {
            for t in &catalog.options {
                assert_same_ranking(&store, &construct_query(&case, role, t, cfg.activation_threshold), &cfg);
            }
        }
    }
}

#[test]
fn retrieval_matches_exhaustive_tfidf_on_random_corpora() {
    let mut rng = seeded(31);
    let mut cfg = EvidenceConfig::default();
    for round in 0..40 {
        let size = rng.gen_range(1..=1000);
        let store = CorpusStore::new(random_corpus(&mut rng, size), 2025).unwrap();
        cfg.min_relevance = if round % 2 == 0 { 0.7 } else { 0.0 };
        for _ in 0..10 {
            let mut q = Query::new();
            for _ in 0..rng.gen_range(0..6) {
                q.insert(["survival", "toxicity", "renal", "unseen", "quality", "frailty"].choose(&mut rng).unwrap().to_string());
            }
            assert_same_ranking(&store, &q, &cfg);
        }
    }
}

#[test]
fn grade_table() {
    use Bias::*;
    use EvidenceKind::*;
    let table = [
        (Rct, Low, Grade::High),
        (Rct, High, Grade::Moderate),
        (Rct, Unknown, Grade::Moderate),
        (Observational, Low, Grade::Moderate),
        (Observational, High, Grade::Low),
        (Observational, Unknown, Grade::Low),
        (Guideline, Low, Grade::Moderate),
        (Guideline, High, Grade::Low),
        (Guideline, Unknown, Grade::Low),
        (ExpertOpinion, Low, Grade::VeryLow),
        (ExpertOpinion, High, Grade::VeryLow),
        (ExpertOpinion, Unknown, Grade::VeryLow),
    ];
    assert_eq!(table.len(), EvidenceKind::ALL.len() * Bias::ALL.len());
    for (kind, bias, grade) in table {
        assert_eq!(item_grade(kind, bias), grade, "{kind:?}/{bias:?}");
    }
    let scores = [Grade::VeryLow, Grade::Low, Grade::Moderate, Grade::High].map(Grade::score);
    assert_eq!(scores, [0.1, 0.33, 0.66, 1.0]);
    assert_eq!(assess_grade(std::iter::empty()), (Grade::VeryLow, 0.0));
}
