use serde::{Deserialize, Serialize};

use super::env::{epsilon_greedy, Discretizer, Env, EpisodeStats};
use super::nn::{argmax_t, Head, Mlp};
use super::optim::{clip_grad_norm, Adam, AdamConfig};
use super::{q_update, EpsilonConfig};
use crate::error::Result;
use crate::rng::SimRng;

/// Table of action values over a discretised state space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularQ {
    pub discretizer: Discretizer,
    pub table: Vec<Vec<f64>>,
    pub alpha: f64,
    pub gamma: f64,
}

impl TabularQ {
    pub fn new(discretizer: Discretizer, actions: usize, alpha: f64, gamma: f64) -> Self {
        let rows = discretizer.states();
        Self {
            discretizer,
            table: vec![vec![0.0; actions]; rows],
            alpha,
            gamma,
        }
    }

    pub fn values(&self, state: &[f64]) -> &[f64] {
        &self.table[self.discretizer.index(state)]
    }

    pub fn greedy(&self, state: &[f64]) -> usize {
        argmax_t(self.values(state))
    }

    pub fn train<E: Env + ?Sized>(
        &mut self,
        env: &mut E,
        episodes: u64,
        epsilon: &EpsilonConfig,
        rng: &mut SimRng,
    ) -> Result<Vec<EpisodeStats>> {
        let mut log = Vec::with_capacity(episodes as usize);
        for ep in 0..episodes {
            let eps = epsilon.at(ep);
            let mut state = env.reset(ep)?;
            let (mut total, mut steps) = (0.0, 0);
            while !env.is_done() {
                let s = self.discretizer.index(&state);
                let a = epsilon_greedy(&self.table[s], eps, rng);
                let step = env.step(a)?;
                let next_max = if step.done {
                    0.0
                } else {
                    let row = &self.table[self.discretizer.index(&step.state)];
                    row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                };
                self.table[s][a] = q_update(self.table[s][a], step.reward, next_max, self.alpha, self.gamma);
                total += step.reward;
                steps += 1;
                state = step.state;
            }
            log.push(EpisodeStats::collect(env, ep, total, steps));
        }
        Ok(log)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ApproxQConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub grad_clip: f64,
}

impl Default for ApproxQConfig {
    fn default() -> Self {
        Self {
            hidden: vec![512, 256],
            lr: 1e-3,
            grad_clip: 0.5,
        }
    }
}

/// Online semi-gradient Q-learning with an MLP value function.
#[derive(Debug, Clone)]
pub struct ApproxQLearner {
    pub net: Mlp<f64>,
    opt: Adam<f64>,
    gamma: f64,
    grad_clip: f64,
}

impl ApproxQLearner {
    pub fn new(state_dim: usize, actions: usize, cfg: &ApproxQConfig, gamma: f64, rng: &mut SimRng) -> Result<Self> {
        let mut sizes = vec![state_dim];
        sizes.extend(&cfg.hidden);
        sizes.push(actions);
        let net = Mlp::new(&sizes, Head::Linear, None, rng)?;
        let opt = Adam::new(AdamConfig::with_lr(cfg.lr), &net);
        Ok(Self {
            net,
            opt,
            gamma,
            grad_clip: cfg.grad_clip,
        })
    }

    /// One TD step toward `reward + γ·max Q(next)`; returns the squared error.
    pub fn update(&mut self, state: &[f64], action: usize, reward: f64, next: Option<&[f64]>) -> Result<f64> {
        let target = match next {
            Some(s) => {
                let q = self.net.forward(s)?;
                reward + self.gamma * q.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            }
            None => reward,
        };
        let cache = self.net.forward_cached(state)?;
        let err = cache.output[action] - target;
        let mut g = vec![0.0; cache.output.len()];
        g[action] = 2.0 * err;
        let mut grads = self.net.backward(&cache, &g)?;
        clip_grad_norm(&mut grads, self.grad_clip);
        self.opt.step(&mut self.net, &grads);
        Ok(err * err)
    }

    pub fn train<E: Env + ?Sized>(
        &mut self,
        env: &mut E,
        episodes: u64,
        epsilon: &EpsilonConfig,
        rng: &mut SimRng,
    ) -> Result<Vec<EpisodeStats>> {
        let mut log = Vec::with_capacity(episodes as usize);
        for ep in 0..episodes {
            let eps = epsilon.at(ep);
            let mut state = env.reset(ep)?;
            let (mut total, mut steps) = (0.0, 0);
            while !env.is_done() {
                let q = self.net.forward(&state)?;
                let a = epsilon_greedy(&q, eps, rng);
                let step = env.step(a)?;
                let next = (!step.done).then_some(step.state.as_slice());
                self.update(&state, a, step.reward, next)?;
                total += step.reward;
                steps += 1;
                state = step.state;
            }
            log.push(EpisodeStats::collect(env, ep, total, steps));
        }
        Ok(log)
    }
}
