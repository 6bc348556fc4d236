//! Run configuration: a JSON file merged with command-line overrides.

use std::path::Path;

use anyhow::Context;
use asnets_core::eval::{EvalConfig, ReceptiveFieldConfig};
use asnets_core::training::{SparseTrainConfig, TrainConfig};
use serde::{Deserialize, Serialize};

/// Every tunable of every subcommand. Missing keys take the documented defaults:
/// seed 0, one job, and the defaults of each nested config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads for rollouts, teachers and batches.
    pub jobs: usize,
    pub train: TrainConfig,
    pub sparse: SparseTrainConfig,
    pub eval: EvalConfig,
    pub receptive_field: ReceptiveFieldConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            jobs: 1,
            train: TrainConfig::default(),
            sparse: SparseTrainConfig::default(),
            eval: EvalConfig::default(),
            receptive_field: ReceptiveFieldConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<RunConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        RunConfig::from_json(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn from_json(text: &str) -> anyhow::Result<RunConfig> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// Sets the master seed and every nested seed.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.train.seed = seed;
        self.sparse.train.seed = seed;
        self.eval.seed = seed;
        self.receptive_field.seed = seed;
        self.receptive_field.train.seed = seed;
    }

    /// Caps the wall-clock budget of every training run.
    pub fn set_time_budget(&mut self, seconds: f64) {
        self.train.max_wall_time = seconds;
        self.sparse.train.max_wall_time = seconds;
        self.receptive_field.train.max_wall_time = seconds;
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        anyhow::ensure!(self.jobs >= 1, "jobs must be at least 1");
        self.train.validate()?;
        self.sparse.train.validate()?;
        self.receptive_field.train.validate()?;
        self.eval.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut cfg = RunConfig::default();
        cfg.set_seed(17);
        cfg.train.layers = 3;
        cfg.eval.rollouts = Some(5);
        assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg = RunConfig::from_json(r#"{"train": {"d_h": 4}}"#).unwrap();
        assert_eq!(cfg.train.d_h, 4);
        assert_eq!(cfg.train.layers, TrainConfig::default().layers);
        assert_eq!(cfg.jobs, 1);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_json(r#"{"trian": {}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"train": {"hidden": 3}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"train": {"teacher": {"serach": "gbfs"}}}"#).is_err());
    }
}
