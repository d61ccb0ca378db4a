//! Reinforcement learning over the deliberation process: the MDP
//! environment, a toy verification MDP, a small manual-gradient network
//! library and three trainers (Q-learning, DQN, PPO).

mod consensus_env;
mod dqn;
mod env;
mod model;
mod nn;
mod optim;
mod ppo;
mod qlearn;
mod replay;

use serde::{Deserialize, Serialize};

pub use consensus_env::{classify_action, ActionEffect, ConsensusEnv, EnvConfig, EpisodeSummary};
pub use dqn::{dqn_loss_and_grads, DqnConfig, DqnTrainer};
pub use env::{epsilon_greedy, run_greedy_episode, Discretizer, Env, EpisodeStats, Step, ToyMdp};
pub use model::{load_model, save_model, GreedyPolicy, MaintainPolicy, ModelFile, Policy, TrainedModel};
pub use nn::{argmax_t, softmax, Cache, Dense, Grads, Head, Mlp, Skip};
pub use optim::{clip_grad_norm, Adam, AdamConfig};
pub use ppo::{ppo_update, PpoConfig, PpoLosses, PpoSample, PpoTrainer};
pub use qlearn::{ApproxQConfig, ApproxQLearner, TabularQ};
pub use replay::{ReplayBuffer, Transition};

use crate::agents::InteractionMode;
use crate::error::{Error, Result};

pub const MODES: usize = 4;

/// Meta-controller action: a treatment to steer toward and how feedback is
/// delivered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RlAction {
    pub treatment: usize,
    pub mode: InteractionMode,
}

impl RlAction {
    pub fn encode(self) -> usize {
        self.treatment * MODES + self.mode.index()
    }

    pub fn decode(id: usize, treatments: usize) -> Option<Self> {
        if id >= treatments * MODES {
            return None;
        }
        Some(Self {
            treatment: id / MODES,
            mode: InteractionMode::from_index(id % MODES)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardWeights {
    pub w_delta: f64,
    pub w_stability: f64,
    pub w_disagreement: f64,
    pub w_quality: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            w_delta: 1.0,
            w_stability: 0.5,
            w_disagreement: 0.5,
            w_quality: 1.0,
        }
    }
}

/// `w1·ΔW + w2·S − w3·D + w4·Q`. An unlabelled case passes `quality = None`
/// and the last term drops out.
pub fn reward(delta_w: f64, stability: f64, disagreement: f64, quality: Option<f64>, w: &RewardWeights) -> f64 {
    w.w_delta * delta_w + w.w_stability * stability - w.w_disagreement * disagreement
        + quality.map_or(0.0, |q| w.w_quality * q)
}

/// Tabular temporal-difference update.
pub fn q_update(q: f64, reward: f64, max_next_q: f64, alpha: f64, gamma: f64) -> f64 {
    q + alpha * (reward + gamma * max_next_q - q)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonMode {
    Decay,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpsilonConfig {
    pub mode: EpsilonMode,
    pub start: f64,
    pub end: f64,
    pub decay_episodes: u64,
    pub fixed: f64,
}

impl Default for EpsilonConfig {
    fn default() -> Self {
        Self {
            mode: EpsilonMode::Decay,
            start: 1.0,
            end: 0.05,
            decay_episodes: 10_000,
            fixed: 0.1,
        }
    }
}

impl EpsilonConfig {
    pub fn at(&self, episode: u64) -> f64 {
        match self.mode {
            EpsilonMode::Decay => epsilon_schedule(episode, self.decay_episodes, self.start, self.end),
            EpsilonMode::Fixed => self.fixed,
        }
    }
}

/// Linear decay from `start` to `end` over `total` episodes, then flat.
pub fn epsilon_schedule(episode: u64, total: u64, start: f64, end: f64) -> f64 {
    if total == 0 || episode >= total {
        return end;
    }
    start + (end - start) * (episode as f64 / total as f64)
}

/// Generalised advantage estimation. `values` carries one bootstrap entry
/// beyond `rewards`; `dones[t]` cuts the bootstrap after step `t`.
pub fn gae(rewards: &[f64], values: &[f64], dones: &[bool], gamma: f64, lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if values.len() != rewards.len() + 1 || dones.len() != rewards.len() {
        return Err(Error::LengthMismatch(format!(
            "{} rewards, {} values, {} done flags",
            rewards.len(),
            values.len(),
            dones.len()
        )));
    }
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut acc = 0.0;
    for t in (0..n).rev() {
        let mask = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * values[t + 1] * mask - values[t];
        acc = delta + gamma * lambda * mask * acc;
        adv[t] = acc;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    /// Q-learning with an MLP approximator.
    Q,
    /// Tabular Q-learning over the discretised state.
    QTabular,
    Dqn,
    Ppo,
}

impl Algo {
    pub fn as_str(self) -> &'static str {
        match self {
            Algo::Q => "q",
            Algo::QTabular => "q_tabular",
            Algo::Dqn => "dqn",
            Algo::Ppo => "ppo",
        }
    }
}

impl std::str::FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "q" => Ok(Algo::Q),
            "q_tabular" | "q-tabular" => Ok(Algo::QTabular),
            "dqn" => Ok(Algo::Dqn),
            "ppo" => Ok(Algo::Ppo),
            other => Err(Error::Config(format!("unknown algorithm `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RlConfig {
    pub gamma: f64,
    pub epsilon: EpsilonConfig,
    pub env: EnvConfig,
    pub q: ApproxQConfig,
    pub tabular_alpha: f64,
    pub dqn: DqnConfig,
    pub ppo: PpoConfig,
    /// Synthetic cases in the training pool.
    pub train_cases: usize,
    pub train_difficulty: f64,
}

impl Default for RlConfig {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            epsilon: EpsilonConfig::default(),
            env: EnvConfig::default(),
            q: ApproxQConfig::default(),
            tabular_alpha: 0.1,
            dqn: DqnConfig::default(),
            ppo: PpoConfig::default(),
            train_cases: 1000,
            train_difficulty: 0.3,
        }
    }
}

impl RlConfig {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(format!("gamma {} not in [0,1]", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.tabular_alpha) {
            return Err(format!("tabular_alpha {} not in [0,1]", self.tabular_alpha));
        }
        if self.env.acceptance.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err("acceptance probabilities must lie in [0,1]".into());
        }
        if self.dqn.batch_size == 0 || self.dqn.buffer_capacity < self.dqn.batch_size {
            return Err("dqn buffer must hold at least one batch".into());
        }
        if self.train_cases == 0 {
            return Err("train_cases must be >= 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_encoding_is_bijective() {
        for id in 0..28 {
            let a = RlAction::decode(id, 7).unwrap();
            assert_eq!(a.encode(), id);
        }
        assert!(RlAction::decode(28, 7).is_none());
    }

    #[test]
    fn reward_spot_values() {
        let w = RewardWeights::default();
        assert!((reward(0.0, 1.0, 0.0, Some(1.0), &w) - 1.5).abs() < 1e-15);
        assert!((reward(0.2, 0.9, 0.15, Some(1.0), &w) - 1.575).abs() < 1e-12);
        assert_eq!(reward(0.0, 0.0, 0.0, Some(0.0), &w), 0.0);
        assert_eq!(reward(0.0, 0.0, 0.0, None, &w), 0.0);
    }

    #[test]
    fn q_update_spot_values() {
        assert!((q_update(0.0, 1.0, 0.0, 0.1, 0.95) - 0.1).abs() < 1e-15);
        assert!((q_update(1.0, 1.0, 1.0, 0.1, 0.95) - 1.095).abs() < 1e-12);
        let q = 1.0 + 0.95 * 2.0;
        assert_eq!(q_update(q, 1.0, 2.0, 0.1, 0.95), q);
    }

    #[test]
    fn epsilon_schedule_endpoints() {
        assert_eq!(epsilon_schedule(0, 10_000, 1.0, 0.05), 1.0);
        assert_eq!(epsilon_schedule(10_000, 10_000, 1.0, 0.05), 0.05);
        assert!((epsilon_schedule(5_000, 10_000, 1.0, 0.05) - 0.525).abs() < 1e-12);
        assert_eq!(epsilon_schedule(50_000, 10_000, 1.0, 0.05), 0.05);
    }

    #[test]
    fn gae_spot_values() {
        let (a, _) = gae(&[2.5], &[0.0, 0.0], &[false], 0.95, 0.95).unwrap();
        assert_eq!(a, vec![2.5]);
        let (a, r) = gae(&[1.0, 1.0], &[0.0, 0.0, 0.0], &[false, false], 0.95, 0.95).unwrap();
        assert!((a[0] - 1.9025).abs() < 1e-12);
        assert_eq!(a[1], 1.0);
        assert_eq!(r, a);
        let v = [0.3, -0.2, 0.7, 0.1];
        let rw = [1.0, 0.5, -0.25];
        let (a, _) = gae(&rw, &v, &[false; 3], 0.9, 0.0).unwrap();
        for t in 0..3 {
            assert!((a[t] - (rw[t] + 0.9 * v[t + 1] - v[t])).abs() < 1e-15);
        }
        assert!(gae(&[1.0], &[0.0], &[false], 0.95, 0.95).is_err());
    }
}
