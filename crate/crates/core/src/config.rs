//! Versioned run configuration for batch experiments.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::{Architecture, TrainConfig};
use crate::ph::DEFAULT_SIMPLEX_BUDGET;
use crate::sweep::SweepOptions;
use crate::synth::{make_homology_suite_with, DatasetSpec, SuiteLayout};

pub const SCHEMA_VERSION: u32 = 1;

/// Grid of architectures and synthetic datasets for one sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPlan {
    pub depths: Vec<usize>,
    pub widths: Vec<usize>,
    pub beta0_max: usize,
    pub beta1_max: usize,
    pub trials: usize,
    #[serde(default = "default_points")]
    pub n_points: usize,
    #[serde(default)]
    pub data_seed: u64,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub options: SweepOptions,
}

fn default_points() -> usize {
    5000
}

impl SweepPlan {
    pub fn architectures(&self) -> Result<Vec<Architecture>> {
        let mut out = Vec::new();
        for &ell in &self.depths {
            for &h0 in &self.widths {
                out.push(Architecture::new(ell, h0, 1)?);
            }
        }
        Ok(out)
    }

    pub fn specs(&self) -> Result<Vec<DatasetSpec>> {
        let layout = SuiteLayout {
            n_points: self.n_points,
            ..SuiteLayout::default()
        };
        make_homology_suite_with(self.beta0_max, self.beta1_max, self.data_seed, &layout)
    }

    pub fn validate(&self) -> Result<()> {
        if self.depths.is_empty() || self.widths.is_empty() {
            return Err(Error::InvalidConfig("depths and widths must be non-empty".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be >= 1".into()));
        }
        if self.n_points < 2 {
            return Err(Error::InvalidConfig("n_points must be >= 2".into()));
        }
        self.architectures()?;
        self.train.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub output_dir: PathBuf,
    /// Worker threads; `None` uses every core.
    #[serde(default)]
    pub parallelism: Option<usize>,
    #[serde(default = "default_budget")]
    pub simplex_budget: u64,
    #[serde(default)]
    pub sweep: Option<SweepPlan>,
}

fn default_budget() -> u64 {
    DEFAULT_SIMPLEX_BUDGET
}

impl RunConfig {
    pub fn new(output_dir: impl Into<PathBuf>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            output_dir: output_dir.into(),
            parallelism: None,
            simplex_budget: DEFAULT_SIMPLEX_BUDGET,
            sweep: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidConfig(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.parallelism == Some(0) {
            return Err(Error::InvalidConfig("parallelism must be >= 1".into()));
        }
        if self.simplex_budget == 0 {
            return Err(Error::InvalidConfig("simplex_budget must be >= 1".into()));
        }
        if let Some(plan) = &self.sweep {
            plan.validate()?;
        }
        Ok(())
    }

    /// Parses and validates a TOML document.
    pub fn from_toml(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = r#"
schema_version = 1
output_dir = "runs/a"
parallelism = 2

[sweep]
depths = [1]
widths = [2, 4]
beta0_max = 2
beta1_max = 1
trials = 3

[sweep.train]
max_steps = 500
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = RunConfig::from_toml(DOC).unwrap();
        let plan = cfg.sweep.as_ref().unwrap();
        assert_eq!(plan.train.max_steps, 500);
        assert_eq!(plan.architectures().unwrap().len(), 2);
        assert_eq!(plan.specs().unwrap().len(), 4);
        assert_eq!(RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
    }

    #[test]
    fn rejects_unknown_keys_and_versions() {
        assert!(RunConfig::from_toml(&format!("{DOC}\nextra = 1")).is_err());
        assert!(RunConfig::from_toml(&DOC.replace("trials = 3", "trials = 3\ntypo = 1")).is_err());
        assert!(matches!(
            RunConfig::from_toml(&DOC.replace("schema_version = 1", "schema_version = 2")),
            Err(Error::InvalidConfig(_))
        ));
        assert!(RunConfig::from_toml(&DOC.replace("parallelism = 2", "parallelism = 0")).is_err());
    }
}
