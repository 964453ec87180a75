//! Weight files: a JSON manifest plus one bit-packed blob per layer.
//!
//! Blobs are row-major over the lowered weight matrix, little-endian within
//! each byte (element `i` is bit `i % 8` of byte `i / 8`), 1 = +1.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::layer::{
    BatchNorm, BnnLayer, BnnModel, ChannelThreshold, InputBinarization, LayerKind, SigmaMode,
};
use crate::bits::BitMatrix;
use crate::error::{Error, Result};

pub const FORMAT_TAG: &str = "fecim-bnn/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerEntry {
    #[serde(flatten)]
    pub kind: LayerKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alpha: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flipped: Vec<bool>,
    /// Channels with a constant output; `null` entries use `alpha`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<Vec<Option<bool>>>,
    /// Unfolded batch-norm; replaces `alpha`/`flipped` when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batchnorm: Option<BatchNorm>,
    pub weights_ref: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightManifest {
    #[serde(default)]
    pub format: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_threshold: Option<f64>,
    #[serde(default)]
    pub sigma_mode: SigmaMode,
    pub layers: Vec<LayerEntry>,
}

impl LayerEntry {
    fn thresholds(&self, index: usize, mode: SigmaMode) -> Result<Vec<ChannelThreshold>> {
        let (_, cols) = self.kind.matrix_dims();
        let bad = |m: String| Error::config(format!("layer {index}: {m}"));
        if let Some(bn) = &self.batchnorm {
            if !self.alpha.is_empty() {
                return Err(bad("give either alpha or batchnorm, not both".into()));
            }
            let t = bn.fold(mode).map_err(|e| bad(e.to_string()))?;
            if t.len() != cols {
                return Err(bad(format!(
                    "batchnorm has {} channels, expected {cols}",
                    t.len()
                )));
            }
            return Ok(t);
        }
        if self.alpha.len() != cols {
            return Err(bad(format!(
                "alpha has {} entries, expected {cols}",
                self.alpha.len()
            )));
        }
        if !self.flipped.is_empty() && self.flipped.len() != cols {
            return Err(bad(format!(
                "flipped has {} entries, expected {cols}",
                self.flipped.len()
            )));
        }
        if let Some(c) = &self.constant {
            if c.len() != cols {
                return Err(bad(format!(
                    "constant has {} entries, expected {cols}",
                    c.len()
                )));
            }
        }
        Ok((0..cols)
            .map(|j| {
                if let Some(b) = self.constant.as_ref().and_then(|c| c[j]) {
                    return ChannelThreshold::Constant(b);
                }
                let a = self.alpha[j];
                if self.flipped.get(j).copied().unwrap_or(false) {
                    ChannelThreshold::AtMost(a)
                } else {
                    ChannelThreshold::AtLeast(a)
                }
            })
            .collect())
    }
}

/// Parses a manifest, reporting syntax errors with their byte offset.
pub fn parse_manifest(text: &str) -> Result<WeightManifest> {
    serde_json::from_str(text).map_err(|e| Error::Format {
        offset: line_col_offset(text, e.line(), e.column()),
        message: format!("manifest: {e}"),
    })
}

fn line_col_offset(text: &str, line: usize, column: usize) -> u64 {
    let start: usize = text
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum();
    (start + column.saturating_sub(1)) as u64
}

/// Builds a model from a manifest and a blob loader.
pub fn build_model(
    manifest: &WeightManifest,
    mut blob: impl FnMut(&str) -> Result<Vec<u8>>,
) -> Result<BnnModel> {
    if let Some(f) = &manifest.format {
        if f != FORMAT_TAG {
            return Err(Error::config(format!("unsupported weight format {f:?}")));
        }
    }
    let mut layers = Vec::with_capacity(manifest.layers.len());
    for (i, entry) in manifest.layers.iter().enumerate() {
        let (rows, cols) = entry.kind.matrix_dims();
        let bytes = blob(&entry.weights_ref)?;
        let weights = BitMatrix::unpack_le(rows, cols, &bytes).map_err(|e| match e {
            Error::Format { offset, message } => Error::Format {
                offset,
                message: format!("{}: {message}", entry.weights_ref),
            },
            e => e,
        })?;
        let thresholds = entry.thresholds(i, manifest.sigma_mode)?;
        layers.push(BnnLayer::new(entry.kind, weights, thresholds)?);
    }
    BnnModel::new(
        layers,
        manifest
            .input_threshold
            .map(|threshold| InputBinarization { threshold }),
    )
}

/// Loads a manifest; blob paths are relative to its directory.
pub fn load_model(path: &Path) -> Result<(BnnModel, WeightManifest)> {
    let text = fs::read_to_string(path)?;
    let manifest = parse_manifest(&text)?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let model = build_model(&manifest, |r| Ok(fs::read(dir.join(r))?))?;
    Ok((model, manifest))
}

/// Manifest describing `model` with blobs named `<stem>.layer<i>.bin`.
pub fn manifest_for(model: &BnnModel, stem: &str) -> WeightManifest {
    let layers = model
        .layers
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let mut alpha = Vec::with_capacity(l.cols());
            let mut flipped = Vec::with_capacity(l.cols());
            let mut constant = Vec::with_capacity(l.cols());
            for t in &l.thresholds {
                alpha.push(t.alpha().unwrap_or(0.0));
                flipped.push(t.flipped());
                constant.push(match t {
                    ChannelThreshold::Constant(b) => Some(*b),
                    _ => None,
                });
            }
            LayerEntry {
                kind: l.kind,
                alpha,
                flipped,
                constant: constant.iter().any(Option::is_some).then_some(constant),
                batchnorm: None,
                weights_ref: format!("{stem}.layer{i}.bin"),
            }
        })
        .collect();
    WeightManifest {
        format: Some(FORMAT_TAG.into()),
        input_threshold: model.input.map(|b| b.threshold),
        sigma_mode: SigmaMode::default(),
        layers,
    }
}

/// Writes `<dir>/<stem>.json` and its blobs; returns the manifest path.
pub fn save_model(model: &BnnModel, dir: &Path, stem: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let manifest = manifest_for(model, stem);
    for (entry, layer) in manifest.layers.iter().zip(&model.layers) {
        fs::write(dir.join(&entry.weights_ref), layer.weights.pack_le())?;
    }
    let path = dir.join(format!("{stem}.json"));
    fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(path)
}
