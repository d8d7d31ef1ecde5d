//! Run configuration: built-in defaults, an optional JSON file merged on top,
//! then `--set key=value` overrides. Unknown keys are rejected at every stage.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use roughmf::montecarlo::SimulationConfig;
use roughmf::timing::BenchConfig;
use roughmf::{FactorChoice, IntegrationConfig, ModelParams};

pub const DEFAULT_CONFIG: &str = include_str!("../config/default.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelChoice {
    UniformOptimal,
    F1Opt,
    F2Opt,
    /// Partition read from `kernel.partition_file`.
    Explicit,
}

impl KernelChoice {
    pub fn factor_choice(self) -> Option<FactorChoice> {
        match self {
            KernelChoice::UniformOptimal => Some(FactorChoice::UniformOptimal),
            KernelChoice::F1Opt => Some(FactorChoice::F1Opt),
            KernelChoice::F2Opt => Some(FactorChoice::F2Opt),
            KernelChoice::Explicit => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub choice: KernelChoice,
    pub n: usize,
    /// Factor counts for `kernel`; empty means `[n]`.
    pub sweep: Vec<usize>,
    pub partition_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiccatiSection {
    pub steps: usize,
    pub factor_counts: Vec<usize>,
    pub b_grid: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PricingSection {
    pub n: usize,
    pub steps: usize,
    pub maturity: f64,
    pub k_grid: Vec<f64>,
    pub integration: IntegrationConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub n: usize,
    /// Log-moneyness values priced by Monte Carlo and by Fourier inversion.
    pub strikes: Vec<f64>,
    pub write_paths: bool,
    pub config: SimulationConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    pub kernel: KernelSection,
    pub riccati: RiccatiSection,
    pub pricing: PricingSection,
    pub simulation: SimulationSection,
    pub bench: BenchConfig,
    pub output_dir: PathBuf,
}

impl RunConfig {
    /// Defaults, then `file`, then each `key=value` override.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut value: Value = serde_json::from_str(DEFAULT_CONFIG).context("built-in default config")?;
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let user: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            merge(&mut value, user, "")?;
        }
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let cfg: RunConfig = serde_json::from_value(value).context("invalid configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.kernel.choice == KernelChoice::Explicit {
            let path = self
                .kernel
                .partition_file
                .as_ref()
                .ok_or_else(|| anyhow!("kernel.choice = explicit requires kernel.partition_file"))?;
            if !path.is_file() {
                bail!("kernel.partition_file {} does not exist", path.display());
            }
        }
        if self.riccati.factor_counts.is_empty() || self.riccati.b_grid.is_empty() {
            bail!("riccati.factor_counts and riccati.b_grid must not be empty");
        }
        if self.pricing.k_grid.is_empty() {
            bail!("pricing.k_grid must not be empty");
        }
        if !(self.pricing.maturity > 0.0 && self.pricing.maturity.is_finite()) {
            bail!("pricing.maturity must be > 0");
        }
        self.pricing.integration.validate()?;
        self.simulation.config.validate()?;
        Ok(())
    }
}

fn merge(base: &mut Value, update: Value, prefix: &str) -> Result<()> {
    match (base, update) {
        (Value::Object(b), Value::Object(u)) => {
            for (k, v) in u {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                let slot = b.get_mut(&k).ok_or_else(|| anyhow!("unknown config key {key}"))?;
                merge(slot, v, &key)?;
            }
            Ok(())
        }
        (b, u) => {
            *b = u;
            Ok(())
        }
    }
}

/// `a.b.c=value`; the value is parsed as JSON and taken as a string otherwise.
fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| anyhow!("override {assignment:?} is not of the form key=value"))?;
    let mut slot = &mut *root;
    for part in key.split('.') {
        slot = slot
            .as_object_mut()
            .and_then(|m| m.get_mut(part))
            .ok_or_else(|| anyhow!("unknown config key {key}"))?;
    }
    *slot = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok(())
}
