use mdt_core::agents::{ClinicalAgent, ScriptedAgent};
use mdt_core::domain::{EvidenceKind, Role};
use mdt_core::rl::{
    dqn_loss_and_grads, load_model, save_model, Adam, AdamConfig, Algo, Head, MaintainPolicy, Mlp, Policy, Transition,
};
use mdt_core::rng::seeded;
use mdt_core::sim::{generate_cases, Engine};
use mdt_core::{AppConfig, Error};
use rand::Rng;

fn engine_with(f: impl FnOnce(&mut AppConfig)) -> Engine {
    let mut cfg = AppConfig::default();
    f(&mut cfg);
    Engine::new(cfg).unwrap()
}

#[test]
fn identical_scripted_team_agrees_in_one_round() {
    let engine = engine_with(|_| {});
    let k = engine.config.catalog.len();
    let out = engine.run_cohort_with(50, 3, |case| {
        let mut rng = seeded(case.id.len() as u64 + case.features[0].to_bits());
        let prefs: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        (0..7)
            .map(|i| Box::new(ScriptedAgent::new(&format!("u{i}"), Role::ALL[i], prefs.clone(), 0.9, 0.3)) as Box<dyn ClinicalAgent>)
            .collect()
    });
    assert_eq!(out.metrics.n_failed, 0);
    assert_eq!(out.metrics.consensus_rate, 1.0);
    assert_eq!(out.metrics.mean_rounds, 1.0);
}

#[test]
fn single_role_team_reaches_immediate_consensus() {
    let engine = engine_with(|c| c.agents.roles = vec![Role::Oncologist; 7]);
    let m = engine.run_cohort(100, 8).metrics;
    assert_eq!(m.consensus_rate, 1.0);
    assert_eq!(m.mean_rounds, 1.0);
}

#[test]
fn frozen_opposed_team_rarely_agrees() {
    let engine = engine_with(|c| c.agents.revision_rate = 0.0);
    let k = engine.config.catalog.len();
    let out = engine.run_cohort_with(40, 4, |_| {
        let up: Vec<f64> = (0..k).map(|t| t as f64 / k as f64).collect();
        let down: Vec<f64> = up.iter().rev().copied().collect();
        (0..6)
            .map(|i| {
                let prefs = if i % 2 == 0 { up.clone() } else { down.clone() };
                Box::new(ScriptedAgent::new(&format!("o{i}"), Role::ALL[i], prefs, 0.9, 0.0)) as Box<dyn ClinicalAgent>
            })
            .collect()
    });
    assert_eq!(out.metrics.consensus_rate, 0.0);
    assert!(out.cases.iter().all(|c| c.result.as_ref().unwrap().w_history.len() == 2));
}

#[test]
fn default_cohort_is_sane() {
    let engine = engine_with(|_| {});
    let m = engine.run_cohort(60, 2).metrics;
    assert_eq!(m.n_failed, 0);
    assert!(m.mean_rounds >= 1.0 && m.mean_rounds <= 3.0);
    assert!((0.0..=1.0).contains(&m.consensus_rate));
    assert_eq!(m.failure_breakdown.values().sum::<usize>(), m.n_cases);
}

#[test]
fn emitted_chains_respect_filters() {
    let engine = engine_with(|_| {});
    let out = engine.run_cohort(40, 12);
    let min_rel = engine.config.evidence.min_relevance;
    let min_year = engine.config.evidence.min_year;
    let mut chains = 0;
    for c in &out.cases {
        for round in &c.result.as_ref().unwrap().per_round_opinions {
            for o in round {
                chains += 1;
                for item in o.evidence.guidelines.iter().chain(&o.evidence.literature) {
                    assert!(item.relevance >= min_rel, "{} relevance {}", item.id, item.relevance);
                }
                for item in &o.evidence.literature {
                    assert_ne!(item.kind, EvidenceKind::Guideline);
                    assert!(item.year >= min_year, "{} year {}", item.id, item.year);
                }
            }
        }
    }
    assert!(chains >= 280);
}

#[test]
fn maintain_policy_matches_baseline_exactly() {
    let engine = engine_with(|_| {});
    let cases = generate_cases(1, 0, 0.3, &engine.config.sim, &engine.config.catalog);
    let layout = engine.env(cases, 0).unwrap().layout();
    let cmp = engine.evaluate_policy(&MaintainPolicy { layout }, 41, 30).unwrap();
    assert!(cmp.paired_round_diff.iter().all(|&d| d == 0));
    assert_eq!(cmp.mean_paired_diff, 0.0);
    assert_eq!(cmp.baseline.mean_rounds, cmp.policy.mean_rounds);
    assert_eq!(cmp.baseline.mean_w, cmp.policy.mean_w);
}

#[test]
fn wrong_layout_is_rejected() {
    let engine = engine_with(|_| {});
    let net = Mlp::<f64>::new(&[10, 4, 28], Head::Linear, None, &mut seeded(1)).unwrap();
    let model = mdt_core::rl::TrainedModel::Network { net, value: None };
    assert!(matches!(engine.evaluate_policy(&model, 1, 5), Err(Error::LayoutMismatch { .. })));
}

#[test]
fn trained_model_round_trips() {
    let engine = engine_with(|c| {
        c.rl.train_cases = 20;
        c.rl.ppo.hidden = vec![8];
        c.rl.ppo.value_hidden = vec![8];
    });
    let out = engine.train(Algo::Ppo, 20, 3).unwrap();
    assert_eq!(out.curve.len(), 20);
    let mut buf = Vec::new();
    save_model(&mut buf, &out.model).unwrap();
    let back = load_model(buf.as_slice()).unwrap();
    assert_eq!(back, out.model);
    let cmp = engine.evaluate_policy(&back.model, 9, 10).unwrap();
    assert_eq!(cmp.policy.n, 10);
    assert_eq!(back.model.input_dim(), Some(out.manifest["state_dim"].as_u64().unwrap() as usize));
}

#[test]
fn corrupt_model_header_rejected() {
    assert!(load_model(r#"{"format":"other","version":1}"#.as_bytes()).is_err());
    assert!(load_model("not json".as_bytes()).is_err());
}

#[test]
fn dqn_loss_falls_on_fixed_batch() {
    let mut rng = seeded(4);
    let mut online = Mlp::<f64>::new(&[6, 32, 32, 4], Head::Dueling, Some((1, 3)), &mut rng).unwrap();
    let target = online.clone();
    let batch: Vec<Transition> = (0..32)
        .map(|_| Transition {
            state: (0..6).map(|_| rng.gen()).collect(),
            action: rng.gen_range(0..4),
            reward: rng.gen_range(-1.0..1.0),
            next_state: (0..6).map(|_| rng.gen()).collect(),
            done: rng.gen_bool(0.3),
        })
        .collect();
    let refs: Vec<&Transition> = batch.iter().collect();
    let mut opt = Adam::new(AdamConfig::with_lr(1e-3), &online);
    let (first, _) = dqn_loss_and_grads(&online, &target, &refs, 0.95, true).unwrap();
    let mut last = first;
    for _ in 0..500 {
        let (loss, mut g) = dqn_loss_and_grads(&online, &target, &refs, 0.95, true).unwrap();
        mdt_core::rl::clip_grad_norm(&mut g, 0.5);
        opt.step(&mut online, &g);
        last = loss;
    }
    assert!(last < 0.5 * first, "loss {first} -> {last}");
}

#[test]
fn consult_is_reproducible() {
    use mdt_core::domain::{AuditLog, FixedClock, MemorySink};
    let engine = engine_with(|_| {});
    let case = generate_cases(1, 77, 0.3, &engine.config.sim, &engine.config.catalog).remove(0);
    let run = || {
        let (mut clock, mut sink) = (FixedClock::default(), MemorySink::default());
        let r = engine.consult(&case, &mut AuditLog::new(&case.id, &mut clock, &mut sink)).unwrap();
        (serde_json::to_string(&r).unwrap(), sink.to_jsonl())
    };
    assert_eq!(run(), run());
}
