//! Text checkpoint format.
//!
//! ```text
//! metabalance-checkpoint 1
//! spec {"input_dim":12,"hidden_widths":[25],"output_dim":1}
//! param layer0.weight 12 25
//! <300 whitespace-separated values>
//! param layer0.bias 25
//! <25 values>
//! ...
//! optimizer {"step":10,"first":[[...]],"second":[]}
//! ```
//!
//! Values are written with Rust's shortest round-trip float formatting, so a
//! save/load cycle is bit-exact. The `optimizer` line is optional.

use std::fmt::Write as _;
use std::path::Path;

use super::{Mlp, MlpSpec};
use crate::autodiff::Tensor;
use crate::optim::OptimizerState;
use crate::{Error, Result};

pub const CHECKPOINT_HEADER: &str = "metabalance-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn encode_checkpoint(model: &Mlp, optimizer: Option<&OptimizerState>) -> Result<String> {
    let mut out = String::new();
    writeln!(out, "{CHECKPOINT_HEADER} {CHECKPOINT_VERSION}").unwrap();
    writeln!(out, "spec {}", serde_json::to_string(model.spec())?).unwrap();
    for (name, p) in model.param_names().iter().zip(model.params()) {
        let dims: Vec<String> = p.shape().iter().map(ToString::to_string).collect();
        writeln!(out, "param {name} {}", dims.join(" ")).unwrap();
        let values: Vec<String> = p.data().iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{}", values.join(" ")).unwrap();
    }
    if let Some(state) = optimizer {
        writeln!(out, "optimizer {}", serde_json::to_string(state)?).unwrap();
    }
    Ok(out)
}

pub fn decode_checkpoint(text: &str) -> Result<(Mlp, Option<OptimizerState>)> {
    let bad = |msg: String| Error::Checkpoint(msg);
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| bad("empty file".into()))?;
    let version = header
        .strip_prefix(CHECKPOINT_HEADER)
        .map(str::trim)
        .ok_or_else(|| bad(format!("missing header, found {header:?}")))?;
    if version != CHECKPOINT_VERSION.to_string() {
        return Err(bad(format!("unsupported version {version}")));
    }
    let mut spec: Option<MlpSpec> = None;
    let mut params = Vec::new();
    let mut optimizer = None;
    while let Some((lineno, line)) = lines.next() {
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        if let Some(json) = line.strip_prefix("spec ") {
            spec = Some(serde_json::from_str(json)?);
        } else if let Some(json) = line.strip_prefix("optimizer ") {
            optimizer = Some(serde_json::from_str(json)?);
        } else if let Some(rest) = line.strip_prefix("param ") {
            let mut fields = rest.split_whitespace();
            let _name = fields.next().ok_or_else(|| bad(format!("line {lineno}: missing name")))?;
            let shape = fields
                .map(|d| d.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| bad(format!("line {lineno}: bad shape: {e}")))?;
            let (_, values) = lines
                .next()
                .ok_or_else(|| bad(format!("line {lineno}: missing values")))?;
            let data = values
                .split_whitespace()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| bad(format!("line {}: bad value: {e}", lineno + 1)))?;
            params.push(Tensor::new(shape, data)?);
        } else {
            return Err(bad(format!("line {lineno}: unrecognized record")));
        }
    }
    let spec = spec.ok_or_else(|| bad("missing spec record".into()))?;
    Ok((Mlp::from_params(spec, params)?, optimizer))
}

pub fn save_checkpoint(path: &Path, model: &Mlp, optimizer: Option<&OptimizerState>) -> Result<()> {
    let text = encode_checkpoint(model, optimizer)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(Mlp, Option<OptimizerState>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&text)
}
