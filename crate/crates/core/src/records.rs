//! JSON result documents written by the command-line tools.

use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::Result;
use crate::flow::FlowField;
use crate::geom::{Mat3, Vec3};
use crate::rigid::RigidTransform;

/// What produced a result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub seed: u64,
    /// SHA-256 of the resolved configuration.
    pub config_hash: String,
    pub iterations: usize,
    pub final_value: f64,
    pub inputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformRecord {
    /// Row-major.
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl TransformRecord {
    pub fn new(t: &RigidTransform, provenance: Option<Provenance>) -> Self {
        let r = &t.rotation;
        TransformRecord {
            rotation: std::array::from_fn(|k| r[(k / 3, k % 3)]),
            translation: [t.translation.x, t.translation.y, t.translation.z],
            provenance,
        }
    }

    /// Fails unless the rotation block is a proper rotation.
    pub fn transform(&self) -> Result<RigidTransform> {
        RigidTransform::new(Mat3::from_row_slice(&self.rotation), Vec3::from(self.translation))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let rec: TransformRecord = read_json(path)?;
        rec.transform()?;
        Ok(rec)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(self, path)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowRecord {
    /// The source cloud the offsets apply to.
    pub source: String,
    pub flow: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl FlowRecord {
    pub fn new(source: impl Into<String>, flow: &FlowField, provenance: Option<Provenance>) -> Self {
        FlowRecord {
            source: source.into(),
            flow: flow.delta.iter().map(|d| [d.x, d.y, d.z]).collect(),
            provenance,
        }
    }

    pub fn field(&self) -> FlowField {
        FlowField {
            delta: self.flow.iter().map(|&d| Vec3::from(d)).collect(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(self, path)
    }
}

fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
