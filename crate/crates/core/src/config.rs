//! Task configuration files in TOML. Every key is optional: a file is
//! overlaid on the per-task defaults, and unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ddf::{RefGenConfig, RefSources};
use crate::deform::{DeformRegConfig, TemplateFitConfig};
use crate::error::{DdmError, Result};
use crate::flow::FlowConfig;
use crate::metric::MetricConfig;
use crate::rigid::RigidRegConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    Eval,
    Rigid,
    Nonrigid,
    Template,
    Flow,
}

/// Settings for a plain discrepancy evaluation between two surfaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub metric: MetricConfig,
    /// Drawn from both surfaces by default, which makes the value symmetric
    /// in distribution.
    pub refgen: RefGenConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            metric: MetricConfig::default(),
            refgen: RefGenConfig {
                sources: RefSources::BothSurfaces,
                ..Default::default()
            },
        }
    }
}

/// All model units; lengths are in the units of the input files.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfigFile {
    /// Informational; each command reads its own section.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskKind>,
    pub eval: EvalConfig,
    pub rigid: RigidRegConfig,
    pub nonrigid: DeformRegConfig,
    pub template: TemplateFitConfig,
    pub flow: FlowConfig,
}

/// Recursively overlays `patch` onto `base`; tables merge, anything else is
/// replaced.
fn overlay(base: &mut toml::Table, patch: toml::Table) {
    for (key, value) in patch {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(p)) => overlay(b, p),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

fn config_error(e: impl std::fmt::Display) -> DdmError {
    DdmError::Config(e.to_string().trim_end().to_string())
}

impl TaskConfigFile {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let patch: toml::Table = text.parse().map_err(config_error)?;
        let mut merged = toml::Table::try_from(TaskConfigFile::default()).map_err(config_error)?;
        overlay(&mut merged, patch);
        let cfg: TaskConfigFile = merged.try_into().map_err(config_error)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            DdmError::Config(m) => DdmError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(config_error)
    }

    pub fn validate(&self) -> Result<()> {
        self.eval.metric.validate()?;
        self.eval.refgen.validate()?;
        self.rigid.metric.validate()?;
        self.rigid.optim.validate()?;
        self.rigid.init.validate()?;
        self.nonrigid.metric.validate()?;
        self.nonrigid.optim.validate()?;
        self.template.metric.validate()?;
        self.template.optim.validate()?;
        self.flow.validate()
    }

    /// Sets every random seed (reference points, graph sampling).
    pub fn set_seed(&mut self, seed: u64) {
        self.eval.refgen.seed = seed;
        self.rigid.refgen.seed = seed;
        self.nonrigid.refgen.seed = seed;
        self.nonrigid.graph_seed = seed;
        self.template.refgen.seed = seed;
        self.flow.refgen.seed = seed;
    }

    /// SHA-256 of the canonical serialization, as lowercase hex.
    pub fn hash(&self) -> Result<String> {
        Ok(sha256_hex(self.to_toml_string()?.as_bytes()))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
