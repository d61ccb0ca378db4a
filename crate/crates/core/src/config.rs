//! Top-level configuration with every default embedded.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agents::AgentsConfig;
use crate::consensus::ConsensusConfig;
use crate::domain::TreatmentCatalog;
use crate::error::{Error, Result};
use crate::evidence::EvidenceConfig;
use crate::rl::RlConfig;
use crate::sim::SimConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AppConfig {
    pub seed: u64,
    pub output_dir: String,
    /// Keep per-round matrix snapshots in results.
    pub trace: bool,
    /// Deterministic audit timestamps.
    pub fixed_clock: bool,
    pub consensus: ConsensusConfig,
    pub agents: AgentsConfig,
    pub evidence: EvidenceConfig,
    pub rl: RlConfig,
    pub sim: SimConfig,
    pub catalog: TreatmentCatalog,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            seed: 2025,
            output_dir: "out".into(),
            trace: false,
            fixed_clock: false,
            consensus: ConsensusConfig::default(),
            agents: AgentsConfig::default(),
            evidence: EvidenceConfig::default(),
            rl: RlConfig::default(),
            sim: SimConfig::default(),
            catalog: TreatmentCatalog::standard(),
        }
    }
}

impl AppConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("consensus", self.consensus.validate()),
            ("agents", self.agents.validate()),
            ("evidence", self.evidence.validate()),
            ("rl", self.rl.validate()),
            ("sim", self.sim.validate()),
            ("catalog", self.catalog.validate()),
        ];
        for (section, check) in checks {
            check.map_err(|e| Error::Config(format!("{section}: {e}")))?;
        }
        Ok(())
    }
}
