//! JSON checkpoint layout.
//!
//! ```text
//! {
//!   "format_version": 1,
//!   "dtype": "f32" | "f64",
//!   "actor":  [{"inputs": I, "outputs": O, "weights": [O*I row-major], "bias": [O]}, ...],
//!   "critic": [ ... same ... ],
//!   "meta": { free-form string pairs }
//! }
//! ```
//!
//! Weights are written as 64-bit decimals with round-trip precision, so both
//! dtypes reload bit-exactly.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dense, Mlp, PolicyError, PolicyParams};
use crate::Scalar;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct LayerRecord {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct CheckpointFile {
    format_version: u32,
    dtype: String,
    actor: Vec<LayerRecord>,
    critic: Vec<LayerRecord>,
    #[serde(default)]
    meta: BTreeMap<String, String>,
}

fn err(msg: impl Into<String>) -> PolicyError {
    PolicyError::Checkpoint(msg.into())
}

fn records<S: Scalar>(m: &Mlp<S>) -> Vec<LayerRecord> {
    m.layers
        .iter()
        .map(|l| LayerRecord {
            inputs: l.inputs,
            outputs: l.outputs,
            weights: l.weights.iter().map(|w| w.as_f64()).collect(),
            bias: l.bias.iter().map(|w| w.as_f64()).collect(),
        })
        .collect()
}

fn mlp<S: Scalar>(recs: Vec<LayerRecord>, what: &str) -> Result<Mlp<S>, PolicyError> {
    if recs.is_empty() {
        return Err(err(format!("{what} has no layers")));
    }
    let mut layers = Vec::with_capacity(recs.len());
    for (i, r) in recs.into_iter().enumerate() {
        if r.weights.len() != r.inputs * r.outputs || r.bias.len() != r.outputs {
            return Err(err(format!("{what} layer {i}: payload does not match shape {}x{}", r.outputs, r.inputs)));
        }
        if let Some(prev) = layers.last().map(|l: &Dense<S>| l.outputs) {
            if prev != r.inputs {
                return Err(err(format!("{what} layer {i}: expects {} inputs, previous layer gives {prev}", r.inputs)));
            }
        }
        layers.push(Dense {
            inputs: r.inputs,
            outputs: r.outputs,
            weights: r.weights.into_iter().map(S::of).collect(),
            bias: r.bias.into_iter().map(S::of).collect(),
        });
    }
    Ok(Mlp { layers })
}

pub fn to_json<S: Scalar>(p: &PolicyParams<S>, meta: &BTreeMap<String, String>) -> String {
    let file = CheckpointFile {
        format_version: FORMAT_VERSION,
        dtype: S::DTYPE.to_string(),
        actor: records(&p.actor),
        critic: records(&p.critic),
        meta: meta.clone(),
    };
    serde_json::to_string(&file).expect("checkpoint serializes")
}

/// Parse a checkpoint; metadata is returned alongside.
pub fn from_json<S: Scalar>(text: &str) -> Result<(PolicyParams<S>, BTreeMap<String, String>), PolicyError> {
    let file: CheckpointFile = serde_json::from_str(text).map_err(|e| err(e.to_string()))?;
    if file.format_version != FORMAT_VERSION {
        return Err(err(format!("unsupported format_version {}", file.format_version)));
    }
    if file.dtype != "f32" && file.dtype != "f64" {
        return Err(err(format!("unknown dtype '{}'", file.dtype)));
    }
    let params = PolicyParams {
        actor: mlp(file.actor, "actor")?,
        critic: mlp(file.critic, "critic")?,
    };
    if params.actor.input_len() != params.critic.input_len() || params.critic.output_len() != 1 {
        return Err(err("actor/critic shapes are inconsistent"));
    }
    Ok((params, file.meta))
}

pub fn save<S: Scalar>(p: &PolicyParams<S>, meta: &BTreeMap<String, String>, path: &Path) -> Result<(), PolicyError> {
    std::fs::write(path, to_json(p, meta)).map_err(|e| err(format!("{}: {e}", path.display())))
}

pub fn load<S: Scalar>(path: &Path) -> Result<(PolicyParams<S>, BTreeMap<String, String>), PolicyError> {
    let text = std::fs::read_to_string(path).map_err(|e| err(format!("{}: {e}", path.display())))?;
    from_json(&text)
}
