//! Independent reference implementations used as test oracles. Shared by the
//! integration tests of this crate and the workspace acceptance suite.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use mdt_core::domain::{EvidenceItem, EvidenceKind};
use mdt_core::evidence::EvidenceConfig;
use mdt_core::rl::{
    argmax_t, ApproxQConfig, ApproxQLearner, DqnConfig, DqnTrainer, Env, EpsilonConfig, EpsilonMode, Head, Mlp,
    PpoConfig, PpoTrainer, TabularQ, ToyMdp,
};
use mdt_core::rng::seeded;
use rand::Rng;

// ---------------------------------------------------------------- ranks ---

/// Mid-rank of `row[k]` by direct counting: one plus the number of strictly
/// smaller entries plus half the number of other equal entries.
fn count_rank(row: &[f64], k: usize) -> f64 {
    let less = row.iter().filter(|&&v| v < row[k]).count() as f64;
    let equal = row.iter().filter(|&&v| v == row[k]).count() as f64;
    1.0 + less + (equal - 1.0) / 2.0
}

/// Kendall's W from explicit rank sums.
pub fn brute_kendall_w(rows: &[Vec<f64>], tie_correction: bool) -> f64 {
    let n = rows.len();
    let k = rows[0].len();
    let mut sums = vec![0.0; k];
    let mut ties = 0.0;
    for row in rows {
        for (j, s) in sums.iter_mut().enumerate() {
            *s += count_rank(row, j);
        }
        let mut groups: BTreeMap<u64, f64> = BTreeMap::new();
        for v in row {
            *groups.entry(v.to_bits()).or_default() += 1.0;
        }
        ties += groups.values().map(|t| t * t * t - t).sum::<f64>();
    }
    let (nf, kf) = (n as f64, k as f64);
    let grand = sums.iter().sum::<f64>() / kf;
    let s: f64 = sums.iter().map(|r| (r - grand).powi(2)).sum();
    let mut denom = nf * nf * (kf.powi(3) - kf);
    if tie_correction {
        denom -= nf * ties;
    }
    if denom <= 0.0 {
        return 0.0;
    }
    (12.0 * s / denom).clamp(0.0, 1.0)
}

/// Agents whose absolute deviation from the column means exceeds the mean
/// deviation by more than one population standard deviation.
pub fn brute_flagged(rows: &[Vec<f64>]) -> Vec<usize> {
    let n = rows.len();
    let k = rows[0].len();
    let means: Vec<f64> = (0..k).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let d: Vec<f64> = rows
        .iter()
        .map(|r| (0..k).map(|j| (r[j] - means[j]).abs()).sum())
        .collect();
    let mu = d.iter().sum::<f64>() / n as f64;
    let sigma = (d.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n as f64).sqrt();
    if sigma == 0.0 {
        return Vec::new();
    }
    (0..n).filter(|&i| d[i] > mu + sigma).collect()
}

pub fn random_rows<R: Rng>(rng: &mut R, n: usize, k: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..k).map(|_| rng.gen::<f64>()).collect()).collect()
}

/// Rows drawn from a few discrete levels so ties are common.
pub fn tied_rows<R: Rng>(rng: &mut R, n: usize, k: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..k).map(|_| f64::from(rng.gen_range(0..3u8)) * 0.25).collect())
        .collect()
}

// ------------------------------------------------------------- gradients ---

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NetKind {
    Plain,
    Softmax,
    Dueling,
    Skip,
}

pub const NET_KINDS: [NetKind; 4] = [NetKind::Plain, NetKind::Softmax, NetKind::Dueling, NetKind::Skip];

/// Random small network (at most 50 parameters) of the requested kind.
pub fn random_net<R: Rng>(rng: &mut R, kind: NetKind) -> Mlp<f64> {
    loop {
        let depth = if kind == NetKind::Skip { rng.gen_range(2..=3) } else { rng.gen_range(1..=3) };
        let mut sizes = vec![rng.gen_range(2..=4)];
        for _ in 1..depth {
            sizes.push(rng.gen_range(2..=4));
        }
        sizes.push(rng.gen_range(2..=3));
        let head = match kind {
            NetKind::Softmax => Head::Softmax,
            NetKind::Dueling => Head::Dueling,
            _ => Head::Linear,
        };
        let skip = (kind == NetKind::Skip).then(|| {
            let layers = sizes.len() - 1;
            let from = rng.gen_range(0..layers - 1);
            (from, rng.gen_range(from + 2..=layers))
        });
        let mut net = Mlp::new(&sizes, head, skip, rng).unwrap();
        if net.param_count() > 50 {
            continue;
        }
        // widen the output layer so gradients are not uniformly tiny, and
        // draw biases so no pre-activation sits exactly on a ReLU kink
        let blocks = net.params_mut().len() - usize::from(skip.is_some());
        for (b, block) in net.params_mut().into_iter().take(blocks).enumerate() {
            if b % 2 == 1 {
                block.iter_mut().for_each(|v| *v = rng.gen_range(-0.5..0.5));
            } else if b == blocks - 2 {
                block.iter_mut().for_each(|v| *v *= 10.0);
            }
        }
        return net;
    }
}

/// Input at least `margin` away from every ReLU kink of `net`.
pub fn smooth_input<R: Rng>(rng: &mut R, net: &Mlp<f64>, margin: f64) -> Vec<f64> {
    let hidden = net.sizes().len() - 2;
    loop {
        let x: Vec<f64> = (0..net.input_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let probe = net.forward_cached(&x).unwrap();
        if probe.pre_activations()[..hidden].iter().flatten().all(|z| z.abs() > margin) {
            return x;
        }
    }
}

/// Largest relative error between backpropagated and central-difference
/// gradients of `L = ⟨c, f(x)⟩`.
pub fn grad_check(net: &Mlp<f64>, x: &[f64], c: &[f64], h: f64) -> f64 {
    let loss = |n: &Mlp<f64>| -> f64 { n.forward(x).unwrap().iter().zip(c).map(|(a, b)| a * b).sum() };
    let cache = net.forward_cached(x).unwrap();
    let grads = net.backward(&cache, c).unwrap();
    let analytic: Vec<f64> = grads.slices().iter().flat_map(|s| s.iter().copied()).collect();
    let shape: Vec<usize> = net.params().iter().map(|s| s.len()).collect();
    let mut worst = 0.0f64;
    let mut flat = 0;
    let mut probe = net.clone();
    for (block, &len) in shape.iter().enumerate() {
        for j in 0..len {
            let orig = probe.params()[block][j];
            probe.params_mut()[block][j] = orig + h;
            let up = loss(&probe);
            probe.params_mut()[block][j] = orig - h;
            let down = loss(&probe);
            probe.params_mut()[block][j] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[flat];
            let scale = a.abs().max(numeric.abs()).max(1e-7);
            worst = worst.max((a - numeric).abs() / scale);
            flat += 1;
        }
    }
    worst
}

/// Run `configs` random gradient checks per network kind; returns the
/// worst relative error seen and the number of configurations.
pub fn grad_check_suite(seed: u64, configs_per_kind: usize) -> (f64, usize) {
    let mut rng = seeded(seed);
    let mut worst = 0.0f64;
    let mut count = 0;
    for kind in NET_KINDS {
        for _ in 0..configs_per_kind {
            let net = random_net(&mut rng, kind);
            let x = smooth_input(&mut rng, &net, 1e-3);
            let c: Vec<f64> = (0..net.output_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            worst = worst.max(grad_check(&net, &x, &c, 1e-5));
            count += 1;
        }
    }
    (worst, count)
}

// ------------------------------------------------------------- retrieval ---

fn oracle_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            cur.extend(ch.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Exhaustive tf-idf scoring of every item against `query`, with
/// `idf = ln(N/df) + 1` and the guideline recency bonus.
pub fn oracle_scores(items: &[EvidenceItem], query: &BTreeSet<String>, cfg: &EvidenceConfig, now_year: i32) -> Vec<f64> {
    let n = items.len() as f64;
    let tf: Vec<BTreeMap<String, f64>> = items
        .iter()
        .map(|it| {
            let mut m = BTreeMap::new();
            for t in oracle_tokens(&it.text) {
                *m.entry(t).or_insert(0.0) += 1.0;
            }
            m
        })
        .collect();
    let mut df: BTreeMap<&str, f64> = BTreeMap::new();
    for m in &tf {
        for t in m.keys() {
            *df.entry(t.as_str()).or_insert(0.0) += 1.0;
        }
    }
    let idf = |t: &str| df.get(t).map_or((n + 1.0).ln() + 1.0, |d| (n / d).ln() + 1.0);
    tf.iter()
        .zip(items)
        .map(|(m, it)| {
            let doc_norm = m.iter().map(|(t, c)| (c * idf(t)).powi(2)).sum::<f64>().sqrt();
            let mut cos = 0.0;
            if doc_norm > 0.0 && !query.is_empty() {
                let q_norm = query.iter().map(|t| idf(t).powi(2)).sum::<f64>().sqrt();
                let dot: f64 = query
                    .iter()
                    .map(|t| m.get(t).map_or(0.0, |c| idf(t) * c * idf(t)))
                    .fold(0.0, |acc, v| acc + v);
                cos = dot / (q_norm * doc_norm);
            }
            if it.kind == EvidenceKind::Guideline && it.year >= now_year - cfg.recency_window {
                cos += cfg.recency_bonus;
            }
            cos.clamp(0.0, 1.0)
        })
        .collect()
}

pub type Ranked = Vec<(String, f64)>;

/// `(guidelines, literature)` as `(id, relevance)` lists, ranked by sorting
/// every eligible item.
pub fn oracle_retrieve(
    items: &[EvidenceItem],
    query: &BTreeSet<String>,
    cfg: &EvidenceConfig,
    now_year: i32,
) -> (Ranked, Ranked) {
    let scores = oracle_scores(items, query, cfg, now_year);
    let pick = |guideline: bool, k: usize| -> Ranked {
        let mut v: Vec<(String, f64)> = items
            .iter()
            .zip(&scores)
            .filter(|(it, _)| {
                if guideline {
                    it.kind == EvidenceKind::Guideline
                } else {
                    it.kind != EvidenceKind::Guideline && it.year >= cfg.min_year
                }
            })
            .map(|(it, &s)| (it.id.clone(), s))
            .collect();
        v.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        v.truncate(k);
        v.retain(|(_, s)| *s >= cfg.min_relevance);
        v
    };
    (pick(true, cfg.top_k_guidelines), pick(false, cfg.top_k_literature))
}

// --------------------------------------------------------------- toy MDP ---

pub const TOY_GAMMA: f64 = 0.95;
pub const TOY_EPISODES: u64 = 2000;
const TOY_STEP_LIMIT: usize = 20;

/// Greedy policy of the toy problem from value iteration to a fixed point.
pub fn value_iteration() -> Vec<usize> {
    let q = |v: &[f64; 4], s: usize, a: usize| {
        let (next, r) = ToyMdp::transition(s, a);
        r + next.map_or(0.0, |n| TOY_GAMMA * v[n])
    };
    let mut v = [0.0f64; ToyMdp::STATES];
    loop {
        let mut next = v;
        for (s, slot) in next.iter_mut().enumerate() {
            *slot = (0..ToyMdp::ACTIONS).map(|a| q(&v, s, a)).fold(f64::MIN, f64::max);
        }
        let delta = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if delta < 1e-14 {
            break;
        }
    }
    (0..ToyMdp::STATES).map(|s| usize::from(q(&v, s, 1) > q(&v, s, 0))).collect()
}

fn greedy_policy(act: impl Fn(&[f64]) -> usize) -> Vec<usize> {
    (0..ToyMdp::STATES).map(|s| act(&ToyMdp::one_hot(s))).collect()
}

fn decay() -> EpsilonConfig {
    EpsilonConfig {
        mode: EpsilonMode::Decay,
        start: 1.0,
        end: 0.05,
        decay_episodes: TOY_EPISODES / 2,
        fixed: 0.1,
    }
}

pub fn toy_tabular(seed: u64) -> Vec<usize> {
    let mut env = ToyMdp::new(seed, TOY_STEP_LIMIT);
    let mut q = TabularQ::new(env.discretizer(), ToyMdp::ACTIONS, 0.1, TOY_GAMMA);
    q.train(&mut env, TOY_EPISODES, &decay(), &mut seeded(seed)).unwrap();
    greedy_policy(|s| q.greedy(s))
}

pub fn toy_approx_q(seed: u64) -> Vec<usize> {
    let mut env = ToyMdp::new(seed, TOY_STEP_LIMIT);
    let cfg = ApproxQConfig {
        hidden: vec![16],
        lr: 1e-2,
        grad_clip: 0.5,
    };
    let mut rng = seeded(seed);
    let mut q = ApproxQLearner::new(ToyMdp::STATES, ToyMdp::ACTIONS, &cfg, TOY_GAMMA, &mut rng).unwrap();
    q.train(&mut env, TOY_EPISODES, &decay(), &mut rng).unwrap();
    greedy_policy(|s| argmax_t(&q.net.forward(s).unwrap()))
}

pub fn toy_dqn(seed: u64) -> Vec<usize> {
    let mut env = ToyMdp::new(seed, TOY_STEP_LIMIT);
    let cfg = DqnConfig {
        hidden: vec![16, 16],
        skip: None,
        buffer_capacity: 2000,
        target_update: 50,
        ..DqnConfig::default()
    };
    let mut dqn = DqnTrainer::new(ToyMdp::STATES, ToyMdp::ACTIONS, &cfg, TOY_GAMMA, seed).unwrap();
    dqn.train(&mut env, TOY_EPISODES, &decay(), &mut seeded(seed)).unwrap();
    greedy_policy(|s| argmax_t(&dqn.online.forward(s).unwrap()))
}

pub fn toy_ppo(seed: u64) -> Vec<usize> {
    let mut env = ToyMdp::new(seed, TOY_STEP_LIMIT);
    let cfg = PpoConfig {
        hidden: vec![16],
        value_hidden: vec![16],
        lr: 3e-3,
        ..PpoConfig::default()
    };
    let mut ppo = PpoTrainer::new(ToyMdp::STATES, ToyMdp::ACTIONS, &cfg, TOY_GAMMA, seed).unwrap();
    ppo.train(&mut env, TOY_EPISODES, &mut seeded(seed)).unwrap();
    greedy_policy(|s| argmax_t(&ppo.policy.forward(s).unwrap()))
}
