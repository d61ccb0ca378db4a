use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::env::{Env, EpisodeStats};
use super::gae;
use super::nn::{Head, Mlp};
use super::optim::{clip_grad_norm, Adam, AdamConfig};
use crate::error::Result;
use crate::rng::{stream, SimRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub hidden: Vec<usize>,
    pub value_hidden: Vec<usize>,
    pub lr: f64,
    pub clip: f64,
    pub gae_lambda: f64,
    pub kl_coef: f64,
    pub entropy_coef: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub episodes_per_update: usize,
    pub grad_clip: f64,
    pub normalize_advantages: bool,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            hidden: vec![512, 256],
            value_hidden: vec![512, 256],
            lr: 3e-4,
            clip: 0.2,
            gae_lambda: 0.95,
            kl_coef: 0.01,
            entropy_coef: 0.0,
            epochs: 4,
            minibatch: 64,
            episodes_per_update: 16,
            grad_clip: 0.5,
            normalize_advantages: true,
        }
    }
}

/// One rollout step with the behaviour policy's distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct PpoSample {
    pub state: Vec<f64>,
    pub action: usize,
    pub old_probs: Vec<f64>,
    pub advantage: f64,
    pub ret: f64,
}

/// Minibatch statistics, measured before the parameter step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PpoLosses {
    pub surrogate: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub kl: f64,
}

/// `min(r·A, clip(r, 1 − ε, 1 + ε)·A)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - clip, 1.0 + clip) * advantage)
}

const PROB_FLOOR: f64 = 1e-12;

/// One clipped-surrogate step on `policy` and one regression step on
/// `value` over `batch`.
#[allow(clippy::too_many_arguments)]
pub fn ppo_update(
    policy: &mut Mlp<f64>,
    value: &mut Mlp<f64>,
    policy_opt: &mut Adam<f64>,
    value_opt: &mut Adam<f64>,
    batch: &[&PpoSample],
    cfg: &PpoConfig,
) -> Result<PpoLosses> {
    let mut out = PpoLosses::default();
    if batch.is_empty() {
        return Ok(out);
    }
    let n = batch.len() as f64;
    let mut pg = policy.zero_grads();
    let mut vg = value.zero_grads();
    for s in batch {
        let cache = policy.forward_cached(&s.state)?;
        let p = &cache.output;
        let old = &s.old_probs;
        let ratio = p[s.action] / old[s.action].max(PROB_FLOOR);
        let surr = clipped_surrogate(ratio, s.advantage, cfg.clip);
        let kl: f64 = old
            .iter()
            .zip(p)
            .filter(|(o, _)| **o > 0.0)
            .map(|(o, q)| o * (o.ln() - q.max(PROB_FLOOR).ln()))
            .sum();
        let entropy: f64 = -p.iter().filter(|q| **q > 0.0).map(|q| q * q.ln()).sum::<f64>();
        out.surrogate += surr / n;
        out.kl += kl / n;
        out.policy_loss += (-surr + cfg.kl_coef * kl - cfg.entropy_coef * entropy) / n;

        let mut g = vec![0.0; p.len()];
        if ratio * s.advantage <= ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip) * s.advantage {
            g[s.action] -= s.advantage / old[s.action].max(PROB_FLOOR);
        }
        for ((gj, &oj), &pj) in g.iter_mut().zip(old).zip(p) {
            *gj -= cfg.kl_coef * oj / pj.max(PROB_FLOOR);
            if cfg.entropy_coef != 0.0 && pj > 0.0 {
                *gj += cfg.entropy_coef * (pj.ln() + 1.0);
            }
            *gj /= n;
        }
        policy.backward_into(&cache, &g, &mut pg)?;

        let vc = value.forward_cached(&s.state)?;
        let err = vc.output[0] - s.ret;
        out.value_loss += err * err / n;
        value.backward_into(&vc, &[2.0 * err / n], &mut vg)?;
    }
    clip_grad_norm(&mut pg, cfg.grad_clip);
    clip_grad_norm(&mut vg, cfg.grad_clip);
    policy_opt.step(policy, &pg);
    value_opt.step(value, &vg);
    Ok(out)
}

/// Draw an index from a categorical distribution.
fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

#[derive(Debug, Clone)]
pub struct PpoTrainer {
    pub policy: Mlp<f64>,
    pub value: Mlp<f64>,
    policy_opt: Adam<f64>,
    value_opt: Adam<f64>,
    cfg: PpoConfig,
    gamma: f64,
    pub last_losses: PpoLosses,
}

impl PpoTrainer {
    pub fn new(state_dim: usize, actions: usize, cfg: &PpoConfig, gamma: f64, seed: u64) -> Result<Self> {
        let mut init = stream(seed, &["ppo-init".into()]);
        let mut sizes = vec![state_dim];
        sizes.extend(&cfg.hidden);
        sizes.push(actions);
        let policy = Mlp::new(&sizes, Head::Softmax, None, &mut init)?;
        let mut vsizes = vec![state_dim];
        vsizes.extend(&cfg.value_hidden);
        vsizes.push(1);
        let value = Mlp::new(&vsizes, Head::Linear, None, &mut init)?;
        Ok(Self {
            policy_opt: Adam::new(AdamConfig::with_lr(cfg.lr), &policy),
            value_opt: Adam::new(AdamConfig::with_lr(cfg.lr), &value),
            policy,
            value,
            cfg: cfg.clone(),
            gamma,
            last_losses: PpoLosses::default(),
        })
    }

    /// Roll out one episode with the current stochastic policy.
    fn rollout<E: Env + ?Sized>(&self, env: &mut E, ep: u64, rng: &mut SimRng, out: &mut Vec<PpoSample>) -> Result<(f64, usize)> {
        let mut state = env.reset(ep)?;
        let mut rewards = Vec::new();
        let mut values = Vec::new();
        let mut dones = Vec::new();
        let mut steps = Vec::new();
        while !env.is_done() {
            let probs = self.policy.forward(&state)?;
            let a = sample_categorical(&probs, rng);
            values.push(self.value.forward(&state)?[0]);
            let step = env.step(a)?;
            rewards.push(step.reward);
            dones.push(step.done);
            let next = step.state;
            steps.push(PpoSample {
                state: std::mem::replace(&mut state, next),
                action: a,
                old_probs: probs,
                advantage: 0.0,
                ret: 0.0,
            });
        }
        let bootstrap = match dones.last() {
            Some(false) => self.value.forward(&state)?[0],
            _ => 0.0,
        };
        values.push(bootstrap);
        let (adv, ret) = gae(&rewards, &values, &dones, self.gamma, self.cfg.gae_lambda)?;
        for ((s, a), r) in steps.iter_mut().zip(adv).zip(ret) {
            s.advantage = a;
            s.ret = r;
        }
        out.extend(steps);
        Ok((rewards.iter().sum(), rewards.len()))
    }

    pub fn train<E: Env + ?Sized>(&mut self, env: &mut E, episodes: u64, rng: &mut SimRng) -> Result<Vec<EpisodeStats>> {
        let mut log = Vec::with_capacity(episodes as usize);
        let per_update = self.cfg.episodes_per_update.max(1) as u64;
        let mut ep = 0;
        while ep < episodes {
            let mut samples = Vec::new();
            let end = (ep + per_update).min(episodes);
            while ep < end {
                let (reward, steps) = self.rollout(env, ep, rng, &mut samples)?;
                log.push(EpisodeStats::collect(env, ep, reward, steps));
                ep += 1;
            }
            if samples.is_empty() {
                continue;
            }
            if self.cfg.normalize_advantages && samples.len() > 1 {
                let m = samples.len() as f64;
                let mean = samples.iter().map(|s| s.advantage).sum::<f64>() / m;
                let var = samples.iter().map(|s| (s.advantage - mean).powi(2)).sum::<f64>() / m;
                let sd = var.sqrt().max(1e-8);
                for s in &mut samples {
                    s.advantage = (s.advantage - mean) / sd;
                }
            }
            let mut order: Vec<usize> = (0..samples.len()).collect();
            for _ in 0..self.cfg.epochs {
                order.shuffle(rng);
                for chunk in order.chunks(self.cfg.minibatch.max(1)) {
                    let batch: Vec<&PpoSample> = chunk.iter().map(|&i| &samples[i]).collect();
                    self.last_losses = ppo_update(
                        &mut self.policy,
                        &mut self.value,
                        &mut self.policy_opt,
                        &mut self.value_opt,
                        &batch,
                        &self.cfg,
                    )?;
                }
            }
        }
        Ok(log)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_spot_value() {
        assert!((clipped_surrogate(1.5, 1.0, 0.2) - 1.2).abs() < 1e-15);
        assert_eq!(clipped_surrogate(0.5, -1.0, 0.2), -0.8);
    }

    #[test]
    fn identical_policies_have_zero_kl() {
        let mut rng = crate::rng::seeded(8);
        let mut policy = Mlp::<f64>::new(&[3, 5, 4], Head::Softmax, None, &mut rng).unwrap();
        let mut value = Mlp::<f64>::new(&[3, 5, 1], Head::Linear, None, &mut rng).unwrap();
        let mut po = Adam::new(AdamConfig::with_lr(3e-4), &policy);
        let mut vo = Adam::new(AdamConfig::with_lr(3e-4), &value);
        let advs = [0.5, -1.0, 2.0];
        let samples: Vec<PpoSample> = advs
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                let state = vec![i as f64 * 0.3, 0.2, -0.1];
                PpoSample {
                    old_probs: policy.forward(&state).unwrap(),
                    state,
                    action: i,
                    advantage: a,
                    ret: 0.0,
                }
            })
            .collect();
        let refs: Vec<&PpoSample> = samples.iter().collect();
        let l = ppo_update(&mut policy, &mut value, &mut po, &mut vo, &refs, &PpoConfig::default()).unwrap();
        assert!(l.kl.abs() < 1e-15);
        assert!((l.surrogate - advs.iter().sum::<f64>() / 3.0).abs() < 1e-12);
    }
}
