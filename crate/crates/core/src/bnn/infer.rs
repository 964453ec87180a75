use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::layer::{BnnLayer, BnnModel, ChannelThreshold};
use super::tiling::{map_layer, PartialSum, TilePlan};
use crate::bits::BitMatrix;
use crate::cell::{InputBitPair, XnorModel};
use crate::device::{FeFetParams, VariationSpec};
use crate::error::{Error, Result};
use crate::macroarray::{
    quantize, threshold_to_vref, CompiledArray, MacStimulus, MacroArray, WriteAudit, DEFAULT_COLS,
    DEFAULT_ROWS,
};
use crate::FEMTO;

/// Per-layer record of one inference.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerTrace {
    /// Bipolar pre-activations, `[position][channel]` flattened. On the
    /// macro path these are reconstructed from rounded match counts.
    pub pre_activation: Vec<i64>,
    /// Activation bits before pooling, same order as `pre_activation`.
    pub signs: Vec<bool>,
    /// Layer output (after pooling), CHW order.
    pub outputs: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InferenceTrace {
    pub label: usize,
    pub layers: Vec<LayerTrace>,
}

impl InferenceTrace {
    pub fn scores(&self) -> &[i64] {
        &self.layers.last().expect("model has layers").pre_activation
    }
}

fn argmax(scores: &[i64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Runs `model` with `mac` supplying `(pre_activations, signs)` for each
/// MAC input vector of layer `index`.
fn forward(
    model: &BnnModel,
    input: &[bool],
    mut mac: impl FnMut(usize, &BnnLayer, &[bool]) -> (Vec<i64>, Vec<bool>),
) -> Result<InferenceTrace> {
    if input.len() != model.input_len() {
        return Err(Error::DimensionMismatch {
            what: "model input",
            expected: model.input_len(),
            found: input.len(),
        });
    }
    let mut x = input.to_vec();
    let mut layers = Vec::with_capacity(model.layers.len());
    for (li, layer) in model.layers.iter().enumerate() {
        let mut pre = Vec::new();
        let mut signs = Vec::new();
        let mut per_pos = Vec::new();
        for patch in layer.mac_inputs(&x) {
            let (s, b) = mac(li, layer, &patch);
            pre.extend_from_slice(&s);
            signs.extend_from_slice(&b);
            per_pos.push(b);
        }
        x = layer.assemble(&per_pos);
        layers.push(LayerTrace {
            pre_activation: pre,
            signs,
            outputs: x.clone(),
        });
    }
    let label = argmax(&layers.last().expect("validated").pre_activation);
    Ok(InferenceTrace { label, layers })
}

/// Exact integer evaluation: `s = sum(xnor)` in bipolar form, then the
/// folded threshold.
pub fn reference_infer(model: &BnnModel, input: &[bool]) -> Result<InferenceTrace> {
    forward(model, input, |_, layer, x| {
        let w = &layer.weights;
        let mut pre = vec![0i64; w.cols()];
        for (r, &xi) in x.iter().enumerate() {
            for (c, s) in pre.iter_mut().enumerate() {
                *s += if w.get(r, c) == xi { 1 } else { -1 };
            }
        }
        let signs = pre
            .iter()
            .zip(&layer.thresholds)
            .map(|(&s, t)| t.fires(s))
            .collect();
        (pre, signs)
    })
}

/// Physical macro configuration shared by every tile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroConfig {
    pub rows: usize,
    pub cols: usize,
    pub params: FeFetParams,
    pub c_nominal: f64,
    #[serde(default)]
    pub c_parasitic: f64,
    #[serde(default)]
    pub model: XnorModel,
}

impl Default for MacroConfig {
    fn default() -> Self {
        Self {
            rows: DEFAULT_ROWS,
            cols: DEFAULT_COLS,
            params: FeFetParams::default(),
            c_nominal: 1.2 * FEMTO,
            c_parasitic: 0.0,
            model: XnorModel::Ideal,
        }
    }
}

#[derive(Debug, Clone)]
struct DeployedTile {
    array: MacroArray,
    compiled: CompiledArray,
    row_active: Vec<bool>,
    col_active: Vec<bool>,
    row_start: usize,
    row_len: usize,
    col_start: usize,
}

#[derive(Debug, Clone)]
pub struct DeployedLayer {
    pub plan: TilePlan,
    tiles: Vec<DeployedTile>,
}

/// A model programmed into macros. Tiles use the full macro geometry;
/// rows and columns outside the tile hold '0' and are deactivated.
#[derive(Debug, Clone)]
pub struct Deployment {
    config: MacroConfig,
    layers: Vec<DeployedLayer>,
}

impl Deployment {
    /// Programs every tile through the half-select write protocol on
    /// nominal devices.
    pub fn program(model: &BnnModel, config: MacroConfig) -> Result<(Self, WriteAudit)> {
        model.validate()?;
        config.params.validate()?;
        if !(config.c_nominal > 0.0) || !(config.c_parasitic >= 0.0) {
            return Err(Error::domain("capacitances must be positive"));
        }
        let blank = MacroArray::new(config.rows, config.cols, config.params, config.c_nominal)
            .with_parasitic(config.c_parasitic);
        let mut audit = WriteAudit::default();
        let mut layers = Vec::with_capacity(model.layers.len());
        for layer in &model.layers {
            let plan = map_layer(layer, config.rows, config.cols)?;
            let mut tiles = Vec::with_capacity(plan.tiles.len());
            for t in &plan.tiles {
                let weights = BitMatrix::from_fn(config.rows, config.cols, |r, c| {
                    r < t.rows.len()
                        && c < t.cols.len()
                        && layer.weights.get(t.rows.start + r, t.cols.start + c)
                });
                let (array, a) = blank.program(&weights)?;
                audit.merge(&a);
                tiles.push(DeployedTile {
                    compiled: array.compile(config.model),
                    array,
                    row_active: (0..config.rows).map(|r| r < t.rows.len()).collect(),
                    col_active: (0..config.cols).map(|c| c < t.cols.len()).collect(),
                    row_start: t.rows.start,
                    row_len: t.rows.len(),
                    col_start: t.cols.start,
                });
            }
            layers.push(DeployedLayer { plan, tiles });
        }
        Ok((Self { config, layers }, audit))
    }

    pub fn config(&self) -> &MacroConfig {
        &self.config
    }

    pub fn layers(&self) -> &[DeployedLayer] {
        &self.layers
    }

    /// One manufactured chip: the same stored weights on devices and
    /// capacitors drawn for `trial`. Tile `t` of layer `l` uses stream group
    /// `(l << 32) | t`.
    pub fn instance(&self, spec: &VariationSpec, trial: u64) -> Result<Self> {
        spec.validate()?;
        let mut out = self.clone();
        for (li, layer) in out.layers.iter_mut().enumerate() {
            for (ti, tile) in layer.tiles.iter_mut().enumerate() {
                tile.array = tile
                    .array
                    .resample(spec, ((li as u64) << 32) | ti as u64, trial)?;
                tile.compiled = tile.array.compile(self.config.model);
            }
        }
        Ok(out)
    }

    /// Runs `model` through the macros. `model` must be the one this
    /// deployment was programmed from.
    pub fn infer(&self, model: &BnnModel, input: &[bool]) -> Result<InferenceTrace> {
        if model.layers.len() != self.layers.len() {
            return Err(Error::DimensionMismatch {
                what: "deployed layers",
                expected: self.layers.len(),
                found: model.layers.len(),
            });
        }
        let last = model.layers.len() - 1;
        forward(model, input, |li, layer, x| {
            self.layer_mac(&self.layers[li], layer, x, li == last)
        })
    }

    fn layer_mac(
        &self,
        dl: &DeployedLayer,
        layer: &BnnLayer,
        x: &[bool],
        classifier: bool,
    ) -> (Vec<i64>, Vec<bool>) {
        let cfg = &self.config;
        let v_dd = cfg.params.v_dd;
        let r_macro = cfg.rows as f64;
        let n = layer.rows();
        let cols = layer.cols();
        let mut counts = vec![0i64; cols];
        let analog = dl.plan.combine == PartialSum::Analog && !classifier;
        let mut decisions = vec![false; cols];
        let mut inputs = vec![InputBitPair::grounded(); cfg.rows];
        for tile in &dl.tiles {
            for (r, slot) in inputs.iter_mut().enumerate() {
                *slot = if r < tile.row_len {
                    InputBitPair::new(x[tile.row_start + r], v_dd)
                } else {
                    InputBitPair::grounded()
                };
            }
            let stim = MacStimulus {
                inputs: std::mem::take(&mut inputs),
            };
            let res = tile
                .compiled
                .evaluate(&stim, Some(&tile.row_active), Some(&tile.col_active))
                .expect("stimulus and masks match the tile");
            inputs = stim.inputs;
            for (k, &v) in res.v_scl.iter().enumerate() {
                let j = tile.col_start + k;
                let m_hat = (v * r_macro / v_dd).round().clamp(0.0, tile.row_len as f64);
                counts[j] += m_hat as i64;
                if analog {
                    decisions[j] = analog_fires(&layer.thresholds[j], n, cfg.rows, v, v_dd);
                }
            }
        }
        let pre: Vec<i64> = counts.iter().map(|&m| 2 * m - n as i64).collect();
        let signs = if analog {
            decisions
        } else {
            pre.iter()
                .zip(&layer.thresholds)
                .map(|(&s, t)| t.fires(s))
                .collect()
        };
        (pre, signs)
    }
}

/// Decision taken by comparing the ScL voltage against a reference.
///
/// The integer rule `s >= alpha` is equivalent to `M >= ceil((N + alpha)/2)`;
/// the reference sits half a cell below that count so the comparator sees
/// the widest possible margin on both sides.
pub fn analog_fires(
    threshold: &ChannelThreshold,
    n: usize,
    macro_rows: usize,
    v_scl: f64,
    v_dd: f64,
) -> bool {
    let half_cell_ref =
        |alpha_macro: f64| threshold_to_vref(alpha_macro, macro_rows, v_dd).expect("in range");
    let nf = n as f64;
    let r = macro_rows as f64;
    match *threshold {
        ChannelThreshold::Constant(b) => b,
        ChannelThreshold::AtLeast(alpha) => {
            let m_star = ((nf + alpha) / 2.0).ceil();
            if m_star <= 0.0 {
                true
            } else if m_star > nf {
                false
            } else {
                quantize(v_scl, half_cell_ref(2.0 * m_star - 1.0 - r)) > 0
            }
        }
        ChannelThreshold::AtMost(alpha) => {
            let m_max = ((nf + alpha) / 2.0).floor();
            if m_max < 0.0 {
                false
            } else if m_max >= nf {
                true
            } else {
                quantize(v_scl, half_cell_ref(2.0 * m_max + 1.0 - r)) < 0
            }
        }
    }
}

/// Programs `model` and runs one input on a chip drawn from `spec`.
pub fn macro_infer(
    model: &BnnModel,
    input: &[bool],
    config: MacroConfig,
    spec: &VariationSpec,
) -> Result<InferenceTrace> {
    let (deployment, _) = Deployment::program(model, config)?;
    deployment.instance(spec, 0)?.infer(model, input)
}

/// Binary inputs with class labels.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dataset {
    pub inputs: Vec<Vec<bool>>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn truncate(&mut self, n: usize) {
        self.inputs.truncate(n);
        self.labels.truncate(n);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub sigma_c: f64,
    pub seed: u64,
    pub trial: u64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracySummary {
    pub sigma_c: f64,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub trials: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyTable {
    pub reference_accuracy: f64,
    pub rows: Vec<AccuracyRow>,
    pub summary: Vec<AccuracySummary>,
}

fn accuracy_of(labels: &[usize], predict: impl Fn(usize) -> Result<usize>) -> Result<f64> {
    let mut hits = 0usize;
    for (i, &l) in labels.iter().enumerate() {
        if predict(i)? == l {
            hits += 1;
        }
    }
    Ok(hits as f64 / labels.len() as f64)
}

/// Accuracy over `dataset` for each `sigma_c` in `grid`, `trials` chips
/// per point. Trial `t` uses the same random draws at every grid point.
pub fn evaluate_accuracy(
    model: &BnnModel,
    deployment: &Deployment,
    dataset: &Dataset,
    base: &VariationSpec,
    grid: &[f64],
    trials: u64,
) -> Result<AccuracyTable> {
    if dataset.is_empty() || dataset.inputs.len() != dataset.labels.len() {
        return Err(Error::domain(
            "dataset must be non-empty with one label per input",
        ));
    }
    if trials == 0 {
        return Err(Error::domain("need at least one trial"));
    }
    let specs: Vec<VariationSpec> = grid
        .iter()
        .map(|&s| {
            let spec = VariationSpec {
                sigma_c: s,
                ..*base
            };
            spec.validate().map(|_| spec)
        })
        .collect::<Result<_>>()?;
    let reference_accuracy = accuracy_of(&dataset.labels, |i| {
        Ok(reference_infer(model, &dataset.inputs[i])?.label)
    })?;

    let jobs: Vec<(usize, u64)> = (0..specs.len())
        .flat_map(|g| (0..trials).map(move |t| (g, t)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(g, t)| {
            let chip = deployment.instance(&specs[g], t)?;
            let accuracy = accuracy_of(&dataset.labels, |i| {
                Ok(chip.infer(model, &dataset.inputs[i])?.label)
            })?;
            Ok(AccuracyRow {
                sigma_c: specs[g].sigma_c,
                seed: base.seed,
                trial: t,
                accuracy,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let summary = rows
        .chunks(trials as usize)
        .map(|chunk| {
            let k = chunk.len() as f64;
            let mean = chunk.iter().map(|r| r.accuracy).sum::<f64>() / k;
            let var = if chunk.len() > 1 {
                chunk
                    .iter()
                    .map(|r| (r.accuracy - mean).powi(2))
                    .sum::<f64>()
                    / (k - 1.0)
            } else {
                0.0
            };
            AccuracySummary {
                sigma_c: chunk[0].sigma_c,
                mean,
                std: var.sqrt(),
                min: chunk
                    .iter()
                    .map(|r| r.accuracy)
                    .fold(f64::INFINITY, f64::min),
                max: chunk
                    .iter()
                    .map(|r| r.accuracy)
                    .fold(f64::NEG_INFINITY, f64::max),
                trials,
            }
        })
        .collect();
    Ok(AccuracyTable {
        reference_accuracy,
        rows,
        summary,
    })
}
