//! Experiment configuration documents.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use foresight::distmodel::example45_dominating_law;
use foresight::estimators::ConditionKind;
use foresight::{DiscreteLaw, DistributionFamily, FamilySpec};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub family: FamilySpec,
    #[serde(default)]
    pub goal: Option<String>,
    #[serde(default)]
    pub strategies: Vec<String>,
    #[serde(default)]
    pub horizons: Vec<usize>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Latest window start for eventual goals.
    #[serde(default)]
    pub window: Option<usize>,
    #[serde(default)]
    pub tree: TreeSection,
    #[serde(default)]
    pub mdp: MdpSection,
    #[serde(default)]
    pub mbp: MbpSection,
    #[serde(default)]
    pub bpve: BpveSection,
    #[serde(default)]
    pub check: CheckSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn default_samples() -> usize {
    10_000
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TreeSection {
    pub depth: usize,
    /// Trees written out in text form.
    pub keep: usize,
    pub node_budget: u64,
}

impl Default for TreeSection {
    fn default() -> Self {
        TreeSection { depth: 4, keep: 3, node_budget: 1 << 22 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MdpSection {
    pub m: usize,
    pub stage: usize,
    /// Episode length for the dominance check.
    pub horizon: usize,
    /// The state set `Q` holds states of size at most this.
    pub max_size: u64,
}

impl Default for MdpSection {
    fn default() -> Self {
        MdpSection { m: 1, stage: 0, horizon: 6, max_size: 2 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LawSpec {
    /// `#p_t` of the configured family.
    Cardinality { stage: usize },
    /// `q(1) = 1/2`, `q(1 + 2^t) = 2^-t / 4`.
    Example45Dominating,
    Atoms { atoms: Vec<(u64, f64)> },
}

impl LawSpec {
    pub fn build(&self, family: &DistributionFamily) -> Result<DiscreteLaw, CliError> {
        Ok(match self {
            LawSpec::Cardinality { stage } => family.cardinality_law(*stage)?.into_inner(),
            LawSpec::Example45Dominating => example45_dominating_law().into_inner(),
            LawSpec::Atoms { atoms } => DiscreteLaw::new(atoms.iter().map(|&(n, p)| (n as u128, p)), 0.0)?,
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MbpSection {
    pub law: LawSpec,
    pub starts: Vec<u64>,
    pub horizon: usize,
}

impl Default for MbpSection {
    fn default() -> Self {
        MbpSection { law: LawSpec::Cardinality { stage: 0 }, starts: vec![1, 2, 5, 20], horizon: 50 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Offspring {
    Cardinality,
    NonZeroChildren,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BpveSection {
    pub offspring: Offspring,
    pub horizon: usize,
    pub series_stages: usize,
}

impl Default for BpveSection {
    fn default() -> Self {
        BpveSection { offspring: Offspring::NonZeroChildren, horizon: 12, series_stages: 40 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckSection {
    pub which: Vec<ConditionKind>,
    pub m: usize,
    pub t_max: usize,
    pub n_probe: u64,
    /// Law tried against the Lamperti condition instead of the envelope.
    pub candidate: Option<LawSpec>,
}

impl Default for CheckSection {
    fn default() -> Self {
        CheckSection {
            which: vec![
                ConditionKind::Lamperti,
                ConditionKind::Fearn,
                ConditionKind::Dominance,
                ConditionKind::ShiftInvariance,
                ConditionKind::TimeInvariance,
            ],
            m: 1,
            t_max: 52,
            n_probe: 1_000_000_000,
            candidate: None,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
    pub format: Option<Format>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Standard errors allowed by statistical comparisons.
    pub z: f64,
    pub min_occupancy: u64,
    pub alpha: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { z: 3.0, min_occupancy: 100, alpha: 0.01 }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        if cfg.samples == 0 {
            return Err(CliError::Config("samples must be positive".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// SHA-256 of the canonical JSON form, seed overrides included.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }

    pub fn family(&self) -> Result<DistributionFamily, CliError> {
        Ok(DistributionFamily::from_spec(self.family.clone())?)
    }
}
