use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::consensus_env::maintain_action;
use super::env::Discretizer;
use super::nn::{argmax_t, Mlp};
use super::qlearn::TabularQ;
use super::Algo;
use crate::domain::{ConsensusMatrix, Matrix, StateLayout};
use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "mdt-policy";
pub const MODEL_VERSION: u32 = 1;

/// Chooses an action id from a flattened state.
pub trait Policy {
    /// Expected state length, if the policy is tied to one.
    fn input_dim(&self) -> Option<usize>;

    fn act(&self, state: &[f64]) -> Result<usize>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TrainedModel {
    /// Action values or probabilities; the greedy action is the argmax.
    Network {
        net: Mlp<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        value: Option<Mlp<f64>>,
    },
    Tabular { q: TabularQ },
}

impl Policy for TrainedModel {
    fn input_dim(&self) -> Option<usize> {
        match self {
            TrainedModel::Network { net, .. } => Some(net.input_dim()),
            TrainedModel::Tabular { q } => match &q.discretizer {
                Discretizer::Consensus { layout, .. } => Some(layout.len()),
                Discretizer::OneHot { n } => Some(*n),
            },
        }
    }

    fn act(&self, state: &[f64]) -> Result<usize> {
        match self {
            TrainedModel::Network { net, .. } => Ok(argmax_t(&net.forward(state)?)),
            TrainedModel::Tabular { q } => Ok(q.greedy(state)),
        }
    }
}

/// Serialized policy with a self-describing header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub algo: Algo,
    pub layer_sizes: Vec<usize>,
    pub state_dim: usize,
    pub n_actions: usize,
    pub seed: u64,
    pub episodes: u64,
    pub model: TrainedModel,
}

impl ModelFile {
    pub fn new(algo: Algo, seed: u64, episodes: u64, n_actions: usize, model: TrainedModel) -> Self {
        let (layer_sizes, state_dim) = match &model {
            TrainedModel::Network { net, .. } => (net.sizes().to_vec(), net.input_dim()),
            TrainedModel::Tabular { q } => (
                vec![q.table.len(), n_actions],
                model.input_dim().unwrap_or_default(),
            ),
        };
        Self {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            algo,
            layer_sizes,
            state_dim,
            n_actions,
            seed,
            episodes,
            model,
        }
    }
}

impl Policy for ModelFile {
    fn input_dim(&self) -> Option<usize> {
        Some(self.state_dim)
    }

    fn act(&self, state: &[f64]) -> Result<usize> {
        self.model.act(state)
    }
}

pub fn save_model<W: Write>(w: W, model: &ModelFile) -> Result<()> {
    serde_json::to_writer(w, model)?;
    Ok(())
}

pub fn load_model<R: Read>(r: R) -> Result<ModelFile> {
    let m: ModelFile = serde_json::from_reader(r)?;
    if m.format != MODEL_FORMAT || m.version != MODEL_VERSION {
        return Err(Error::Model(format!(
            "unsupported model {} v{}",
            m.format, m.version
        )));
    }
    if let TrainedModel::Network { net, value } = &m.model {
        net.validate()?;
        if let Some(v) = value {
            v.validate()?;
        }
        if net.sizes() != m.layer_sizes.as_slice() {
            return Err(Error::Model("layer-size header disagrees with weights".into()));
        }
    }
    Ok(m)
}

/// Any model wrapped as a greedy policy.
pub struct GreedyPolicy<'a>(pub &'a dyn Policy);

impl Policy for GreedyPolicy<'_> {
    fn input_dim(&self) -> Option<usize> {
        self.0.input_dim()
    }

    fn act(&self, state: &[f64]) -> Result<usize> {
        self.0.act(state)
    }
}

/// Baseline controller: every agent keeps its position.
#[derive(Debug, Clone, Copy)]
pub struct MaintainPolicy {
    pub layout: StateLayout,
}

impl Policy for MaintainPolicy {
    fn input_dim(&self) -> Option<usize> {
        Some(self.layout.len())
    }

    fn act(&self, state: &[f64]) -> Result<usize> {
        let l = self.layout;
        let start = l.matrix_offset();
        let entries = Matrix::from_row_major(l.agents, l.treatments, state[start..start + l.agents * l.treatments].to_vec())?;
        Ok(maintain_action(&ConsensusMatrix {
            entries,
            round: 0,
            kendall_w: 0.0,
            per_agent_confidence: Vec::new(),
        }))
    }
}
