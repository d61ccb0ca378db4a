use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::consensus::discordance;
use crate::domain::{Matrix, StateLayout};
use crate::error::{Error, Result};
use crate::rng::stream;

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: Vec<f64>,
    pub reward: f64,
    /// Terminal: no bootstrap from `state`.
    pub done: bool,
    /// Episode cut by the step limit; `state` is still bootstrappable.
    pub truncated: bool,
}

impl Step {
    pub fn ends_episode(&self) -> bool {
        self.done || self.truncated
    }
}

/// Episodic environment with a discrete action set. Episodes are keyed by
/// index so every rollout is reproducible on its own.
pub trait Env {
    fn state_dim(&self) -> usize;

    fn n_actions(&self) -> usize;

    fn reset(&mut self, episode: u64) -> Result<Vec<f64>>;

    fn step(&mut self, action: usize) -> Result<Step>;

    /// True when the current episode has terminated (possibly at reset).
    fn is_done(&self) -> bool;

    fn discretizer(&self) -> Discretizer;

    /// Final `(W, rounds)` of the last episode, when meaningful.
    fn episode_metrics(&self) -> Option<(f64, u32)> {
        None
    }
}

/// Learning-curve row for one training episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub episode: u64,
    pub reward: f64,
    pub steps: usize,
    pub final_w: Option<f64>,
    pub rounds: Option<u32>,
}

impl EpisodeStats {
    pub fn collect<E: Env + ?Sized>(env: &E, episode: u64, reward: f64, steps: usize) -> Self {
        let m = env.episode_metrics();
        Self {
            episode,
            reward,
            steps,
            final_w: m.map(|x| x.0),
            rounds: m.map(|x| x.1),
        }
    }
}

/// Uniform random action with probability `epsilon`, else the first
/// maximiser of `values`.
pub fn epsilon_greedy<R: Rng + ?Sized>(values: &[f64], epsilon: f64, rng: &mut R) -> usize {
    if rng.gen::<f64>() < epsilon {
        rng.gen_range(0..values.len())
    } else {
        super::nn::argmax_t(values)
    }
}

/// Maps a flattened state to a table row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Discretizer {
    /// One-hot states; the row is the hot index.
    OneHot { n: usize },
    /// W bucket × round × number of flagged agents.
    Consensus {
        layout: StateLayout,
        w_buckets: usize,
        max_rounds: u32,
    },
}

impl Discretizer {
    pub fn states(&self) -> usize {
        match self {
            Discretizer::OneHot { n } => *n,
            Discretizer::Consensus {
                layout,
                w_buckets,
                max_rounds,
            } => w_buckets * (*max_rounds as usize) * (layout.agents + 1),
        }
    }

    pub fn index(&self, state: &[f64]) -> usize {
        match self {
            Discretizer::OneHot { .. } => super::nn::argmax_t(state),
            Discretizer::Consensus {
                layout,
                w_buckets,
                max_rounds,
            } => {
                let w = state[layout.w_offset()].clamp(0.0, 1.0);
                let wb = ((w * *w_buckets as f64) as usize).min(w_buckets - 1);
                let round = (state[layout.round_offset()].round() as usize).clamp(1, *max_rounds as usize) - 1;
                let start = layout.matrix_offset();
                let data = state[start..start + layout.agents * layout.treatments].to_vec();
                let flagged = Matrix::from_row_major(layout.agents, layout.treatments, data)
                    .map(|m| discordance(&m).1.len())
                    .unwrap_or(0);
                (wb * *max_rounds as usize + round) * (layout.agents + 1) + flagged
            }
        }
    }
}

/// Deterministic four-state, two-action MDP with a known optimum.
///
/// ```text
/// s0: a0 -> s1          a1 -> s2
/// s1: a0 -> end (+1)    a1 -> s0
/// s2: a0 -> end (+0.2)  a1 -> s3
/// s3: a0 -> s0          a1 -> end (+0.5)
/// ```
/// Episodes start in a uniformly drawn state and are cut after
/// `step_limit` steps.
#[derive(Debug, Clone)]
pub struct ToyMdp {
    seed: u64,
    step_limit: usize,
    state: usize,
    steps: usize,
    done: bool,
}

impl ToyMdp {
    pub const STATES: usize = 4;
    pub const ACTIONS: usize = 2;

    pub fn new(seed: u64, step_limit: usize) -> Self {
        Self {
            seed,
            step_limit: step_limit.max(1),
            state: 0,
            steps: 0,
            done: true,
        }
    }

    /// `(next state, reward)`; `None` as next state means terminal.
    pub fn transition(state: usize, action: usize) -> (Option<usize>, f64) {
        match (state, action) {
            (0, 0) => (Some(1), 0.0),
            (0, _) => (Some(2), 0.0),
            (1, 0) => (None, 1.0),
            (1, _) => (Some(0), 0.0),
            (2, 0) => (None, 0.2),
            (2, _) => (Some(3), 0.0),
            (3, 0) => (Some(0), 0.0),
            (_, _) => (None, 0.5),
        }
    }

    pub fn one_hot(s: usize) -> Vec<f64> {
        let mut v = vec![0.0; Self::STATES];
        v[s] = 1.0;
        v
    }

    /// Start the episode in a chosen state.
    pub fn reset_to(&mut self, s: usize) -> Vec<f64> {
        self.state = s;
        self.steps = 0;
        self.done = false;
        Self::one_hot(s)
    }
}

impl Env for ToyMdp {
    fn state_dim(&self) -> usize {
        Self::STATES
    }

    fn n_actions(&self) -> usize {
        Self::ACTIONS
    }

    fn reset(&mut self, episode: u64) -> Result<Vec<f64>> {
        let mut rng = stream(self.seed, &["toy".into(), episode.into()]);
        Ok(self.reset_to(rng.gen_range(0..Self::STATES)))
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        if self.done {
            return Err(Error::EpisodeDone);
        }
        if action >= Self::ACTIONS {
            return Err(Error::ShapeMismatch {
                what: "action",
                expected: Self::ACTIONS,
                got: action,
            });
        }
        self.steps += 1;
        let (next, reward) = Self::transition(self.state, action);
        let (state, done) = match next {
            Some(s) => {
                self.state = s;
                (Self::one_hot(s), false)
            }
            None => (vec![0.0; Self::STATES], true),
        };
        let truncated = !done && self.steps >= self.step_limit;
        self.done = done || truncated;
        Ok(Step {
            state,
            reward,
            done,
            truncated,
        })
    }

    fn is_done(&self) -> bool {
        self.done
    }

    fn discretizer(&self) -> Discretizer {
        Discretizer::OneHot { n: Self::STATES }
    }
}

/// Roll out one episode choosing actions with `act`. Returns the total
/// reward and the number of steps taken.
pub fn run_greedy_episode<E: Env + ?Sized>(
    env: &mut E,
    episode: u64,
    mut act: impl FnMut(&[f64]) -> Result<usize>,
) -> Result<(f64, usize)> {
    let mut state = env.reset(episode)?;
    let mut total = 0.0;
    let mut steps = 0;
    while !env.is_done() {
        let a = act(&state)?;
        let step = env.step(a)?;
        total += step.reward;
        steps += 1;
        state = step.state;
    }
    Ok((total, steps))
}
