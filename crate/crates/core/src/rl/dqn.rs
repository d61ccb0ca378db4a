use rand::Rng;
use serde::{Deserialize, Serialize};

use super::env::{epsilon_greedy, Env, EpisodeStats};
use super::nn::{argmax_t, Grads, Head, Mlp};
use super::optim::{clip_grad_norm, Adam, AdamConfig};
use super::replay::{ReplayBuffer, Transition};
use super::EpsilonConfig;
use crate::error::{Error, Result};
use crate::rng::{stream, SimRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DqnConfig {
    pub hidden: Vec<usize>,
    /// `(from activation, to layer)`; activation 0 is the input.
    pub skip: Option<(usize, usize)>,
    pub dueling: bool,
    pub double: bool,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub target_update: u64,
    pub lr: f64,
    pub grad_clip: f64,
    /// Transitions collected before the first update.
    pub warmup: usize,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            hidden: vec![512, 256, 128],
            skip: Some((1, 3)),
            dueling: true,
            double: true,
            buffer_capacity: 10_000,
            batch_size: 32,
            target_update: 100,
            lr: 1e-3,
            grad_clip: 0.5,
            warmup: 32,
        }
    }
}

/// Mean squared TD error of `batch` and its gradient with respect to the
/// online network. Non-terminal targets are
/// `r + γ·Q_target(s′, argmax_a Q_online(s′, a))` (or the plain max over
/// `Q_target` when `double` is off).
pub fn dqn_loss_and_grads(
    online: &Mlp<f64>,
    target: &Mlp<f64>,
    batch: &[&Transition],
    gamma: f64,
    double: bool,
) -> Result<(f64, Grads<f64>)> {
    if batch.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    let n = batch.len() as f64;
    let mut grads = online.zero_grads();
    let mut loss = 0.0;
    for t in batch {
        let y = if t.done {
            t.reward
        } else {
            let qt = target.forward(&t.next_state)?;
            let best = if double {
                qt[argmax_t(&online.forward(&t.next_state)?)]
            } else {
                qt.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            };
            t.reward + gamma * best
        };
        let cache = online.forward_cached(&t.state)?;
        let err = cache.output[t.action] - y;
        loss += err * err / n;
        let mut g = vec![0.0; cache.output.len()];
        g[t.action] = 2.0 * err / n;
        online.backward_into(&cache, &g, &mut grads)?;
    }
    Ok((loss, grads))
}

#[derive(Debug, Clone)]
pub struct DqnTrainer {
    pub online: Mlp<f64>,
    pub target: Mlp<f64>,
    opt: Adam<f64>,
    buffer: ReplayBuffer,
    cfg: DqnConfig,
    gamma: f64,
    updates: u64,
}

impl DqnTrainer {
    pub fn new(state_dim: usize, actions: usize, cfg: &DqnConfig, gamma: f64, seed: u64) -> Result<Self> {
        let mut init = stream(seed, &["dqn-init".into()]);
        let mut sizes = vec![state_dim];
        sizes.extend(&cfg.hidden);
        sizes.push(actions);
        let head = if cfg.dueling { Head::Dueling } else { Head::Linear };
        let online = Mlp::new(&sizes, head, cfg.skip, &mut init)?;
        let opt = Adam::new(AdamConfig::with_lr(cfg.lr), &online);
        Ok(Self {
            target: online.clone(),
            online,
            opt,
            buffer: ReplayBuffer::new(cfg.buffer_capacity, stream(seed, &["dqn-replay".into()])),
            cfg: cfg.clone(),
            gamma,
            updates: 0,
        })
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// One gradient step on a sampled batch; syncs the target network every
    /// `target_update` steps.
    pub fn train_step(&mut self) -> Result<f64> {
        let batch = self.buffer.sample(self.cfg.batch_size)?;
        let (loss, mut grads) = dqn_loss_and_grads(&self.online, &self.target, &batch, self.gamma, self.cfg.double)?;
        clip_grad_norm(&mut grads, self.cfg.grad_clip);
        self.opt.step(&mut self.online, &grads);
        self.updates += 1;
        if self.updates.is_multiple_of(self.cfg.target_update.max(1)) {
            self.target = self.online.clone();
        }
        Ok(loss)
    }

    pub fn train<E: Env + ?Sized>(
        &mut self,
        env: &mut E,
        episodes: u64,
        epsilon: &EpsilonConfig,
        rng: &mut SimRng,
    ) -> Result<Vec<EpisodeStats>> {
        let mut log = Vec::with_capacity(episodes as usize);
        let ready = self.cfg.warmup.max(self.cfg.batch_size);
        for ep in 0..episodes {
            let eps = epsilon.at(ep);
            let mut state = env.reset(ep)?;
            let (mut total, mut steps) = (0.0, 0);
            while !env.is_done() {
                let a = if rng.gen::<f64>() < eps {
                    rng.gen_range(0..env.n_actions())
                } else {
                    epsilon_greedy(&self.online.forward(&state)?, 0.0, rng)
                };
                let step = env.step(a)?;
                self.buffer.push(Transition {
                    state: std::mem::take(&mut state),
                    action: a,
                    reward: step.reward,
                    next_state: step.state.clone(),
                    done: step.done,
                });
                if self.buffer.len() >= ready {
                    self.train_step()?;
                }
                total += step.reward;
                steps += 1;
                state = step.state;
            }
            log.push(EpisodeStats::collect(env, ep, total, steps));
        }
        Ok(log)
    }
}
