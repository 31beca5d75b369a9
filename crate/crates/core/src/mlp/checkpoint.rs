//! Model files: one JSON header line, then every parameter as a little-endian f64.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::model::{Head, MlpModel, Standardizer};
use super::train::TrainConfig;
use crate::error::{CcError, Result};

const FORMAT: &str = "classcontrast-mlp/1";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    format: String,
    widths: Vec<usize>,
    head: Head,
    standardized: bool,
    /// Count of f64 values following the header.
    values: usize,
    config: Option<TrainConfig>,
}

/// Write `model` (and optionally the config that produced it) to `path`.
pub fn save_checkpoint(path: &Path, model: &MlpModel, config: Option<&TrainConfig>) -> Result<()> {
    let mut values = model.flat_params();
    if let Some(s) = &model.standardizer {
        values.extend(&s.mean);
        values.extend(&s.scale);
    }
    let header = Header {
        format: FORMAT.to_string(),
        widths: model.widths.clone(),
        head: model.head,
        standardized: model.standardizer.is_some(),
        values: values.len(),
        config: config.cloned(),
    };
    let mut bytes = serde_json::to_vec(&header).map_err(|e| CcError::Data(format!("checkpoint header: {e}")))?;
    bytes.push(b'\n');
    bytes.reserve(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = fs::File::create(path).map_err(|e| CcError::io(path, e))?;
    f.write_all(&bytes).map_err(|e| CcError::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(MlpModel, Option<TrainConfig>)> {
    let f = fs::File::open(path).map_err(|e| CcError::io(path, e))?;
    let mut reader = BufReader::new(f);
    let mut line = String::new();
    reader.read_line(&mut line).map_err(|e| CcError::io(path, e))?;
    let header: Header = serde_json::from_str(line.trim_end())
        .map_err(|e| CcError::parse(path, 1, e.column(), e.to_string()))?;
    if header.format != FORMAT {
        return Err(CcError::Data(format!("unsupported checkpoint format `{}`", header.format)));
    }
    let mut raw = Vec::new();
    reader.read_to_end(&mut raw).map_err(|e| CcError::io(path, e))?;
    if raw.len() != header.values * 8 {
        return Err(CcError::Data(format!(
            "checkpoint body has {} bytes, header promises {} values",
            raw.len(),
            header.values
        )));
    }
    let values: Vec<f64> = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();

    let widths = &header.widths;
    if widths.len() < 2 {
        return Err(CcError::Data("checkpoint has fewer than two layer widths".into()));
    }
    let mut model = MlpModel {
        widths: widths.clone(),
        head: header.head,
        weights: widths.windows(2).map(|p| Array2::zeros((p[0], p[1]))).collect(),
        biases: widths[1..].iter().map(|&w| Array1::zeros(w)).collect(),
        standardizer: None,
    };
    let params = model.param_count();
    let expected = params + if header.standardized { 2 * widths[0] } else { 0 };
    if values.len() != expected {
        return Err(CcError::Data(format!(
            "checkpoint has {} values, layout needs {expected}",
            values.len()
        )));
    }
    model.set_flat_params(&values[..params])?;
    if header.standardized {
        let d = widths[0];
        model.standardizer = Some(Standardizer {
            mean: values[params..params + d].to_vec(),
            scale: values[params + d..].to_vec(),
        });
    }
    Ok((model, header.config))
}
