//! Seeded models and datasets for tests and desk-scale studies.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::infer::{reference_infer, Dataset};
use super::layer::{BnnLayer, BnnModel, ChannelThreshold, ConvShape, LayerKind};
use crate::bits::BitMatrix;
use crate::error::{Error, Result};
use crate::rng::{Domain, ElementKey, SeedTree};

fn random_threshold(rng: &mut impl Rng, n: usize) -> ChannelThreshold {
    let n = n as i64;
    // Integer alphas of the same parity as N land exactly on reachable
    // pre-activations and exercise the tie rule.
    let alpha = match rng.random_range(0..4) {
        0 => rng.random_range(-n..=n) as f64,
        1 => rng.random_range(-n..=n) as f64 + 0.5,
        2 => rng.random_range(-n - 3..=n + 3) as f64,
        _ => rng.random_range(-(n as f64)..=n as f64),
    };
    match rng.random_range(0..10) {
        0 => ChannelThreshold::Constant(rng.random()),
        1..=3 => ChannelThreshold::AtMost(alpha),
        _ => ChannelThreshold::AtLeast(alpha),
    }
}

fn random_layer(rng: &mut impl Rng, kind: LayerKind) -> BnnLayer {
    let (rows, cols) = kind.matrix_dims();
    let density = rng.random_range(0.1..0.9);
    let weights = BitMatrix::from_fn(rows, cols, |_, _| rng.random_bool(density));
    let thresholds = (0..cols).map(|_| random_threshold(rng, rows)).collect();
    BnnLayer::new(kind, weights, thresholds).expect("generated shapes are consistent")
}

/// A small random network: an optional conv layer, then one or two fully
/// connected layers. Shapes, weights and thresholds all come from `seed`.
pub fn random_model(seed: u64) -> BnnModel {
    let mut rng = SeedTree::new(seed).stream(Domain::Model, ElementKey::default());
    let mut layers = Vec::new();
    let mut width;
    if rng.random_bool(0.5) {
        let kernel: usize = rng.random_range(1..=3);
        let padding: usize = rng.random_range(0..=1);
        let side_min = kernel.saturating_sub(2 * padding).max(2);
        let conv = ConvShape {
            in_channels: rng.random_range(1..=3),
            in_height: rng.random_range(side_min..=7),
            in_width: rng.random_range(side_min..=7),
            out_channels: rng.random_range(1..=4),
            kernel,
            stride: rng.random_range(1..=2),
            padding,
            pool: 1,
        };
        let pooled = ConvShape {
            pool: if conv.out_height() >= 2 && conv.out_width() >= 2 && rng.random_bool(0.5) {
                2
            } else {
                1
            },
            ..conv
        };
        let kind = LayerKind::Conv(pooled);
        width = kind.output_len();
        layers.push(random_layer(&mut rng, kind));
    } else {
        width = rng.random_range(3..=40);
    }
    let fc_layers = rng.random_range(1..=2);
    for k in 0..fc_layers {
        let outputs = if k + 1 == fc_layers {
            rng.random_range(2..=6)
        } else {
            rng.random_range(2..=24)
        };
        layers.push(random_layer(
            &mut rng,
            LayerKind::FullyConnected {
                inputs: width,
                outputs,
            },
        ));
        width = outputs;
    }
    BnnModel::new(layers, None).expect("generated model is consistent")
}

/// Uniform random input bits for `model`.
pub fn random_input(model: &BnnModel, seed: u64, index: u64) -> Vec<bool> {
    let mut rng =
        SeedTree::new(seed).stream(Domain::Stimulus, ElementKey::default().with_trial(index));
    (0..model.input_len()).map(|_| rng.random()).collect()
}

/// A prototype-matching classifier and matching data.
///
/// Each class owns a random binary prototype. Hidden unit `h` detects class
/// `h % classes` with a noisy copy of its prototype; the classifier counts
/// agreeing detectors. Samples are prototypes with random bit flips, labeled
/// by the model's own noiseless prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrototypeTask {
    pub input_bits: usize,
    pub classes: usize,
    pub hidden: usize,
    /// Hidden-layer threshold on the bipolar pre-activation.
    pub hidden_alpha: f64,
    /// Probability that a detector weight disagrees with its prototype.
    pub detector_flip: f64,
    /// Probability that a sample bit disagrees with its prototype.
    pub input_flip: f64,
    pub samples: usize,
}

impl Default for PrototypeTask {
    fn default() -> Self {
        Self {
            input_bits: 128,
            classes: 10,
            hidden: 100,
            hidden_alpha: 30.0,
            detector_flip: 0.1,
            input_flip: 0.25,
            samples: 500,
        }
    }
}

pub fn prototype_task(seed: u64, task: &PrototypeTask) -> Result<(BnnModel, Dataset)> {
    if task.classes < 2 || task.hidden < task.classes || task.input_bits == 0 {
        return Err(Error::domain(
            "need >= 2 classes, hidden >= classes and input bits > 0",
        ));
    }
    if !(0.0..=1.0).contains(&task.detector_flip) || !(0.0..=1.0).contains(&task.input_flip) {
        return Err(Error::domain("flip probabilities must lie in [0, 1]"));
    }
    let tree = SeedTree::new(seed);
    let mut wrng = tree.stream(Domain::Weights, ElementKey::default());
    let prototypes: Vec<Vec<bool>> = (0..task.classes)
        .map(|_| (0..task.input_bits).map(|_| wrng.random()).collect())
        .collect();
    let w1 = BitMatrix::from_fn(task.input_bits, task.hidden, |r, h| {
        prototypes[h % task.classes][r] ^ wrng.random_bool(task.detector_flip)
    });
    let hidden = BnnLayer::new(
        LayerKind::FullyConnected {
            inputs: task.input_bits,
            outputs: task.hidden,
        },
        w1,
        vec![ChannelThreshold::AtLeast(task.hidden_alpha); task.hidden],
    )?;
    let w2 = BitMatrix::from_fn(task.hidden, task.classes, |h, k| h % task.classes == k);
    let out = BnnLayer::new(
        LayerKind::FullyConnected {
            inputs: task.hidden,
            outputs: task.classes,
        },
        w2,
        vec![ChannelThreshold::AtLeast(0.0); task.classes],
    )?;
    let model = BnnModel::new(vec![hidden, out], None)?;

    let mut inputs = Vec::with_capacity(task.samples);
    let mut labels = Vec::with_capacity(task.samples);
    for i in 0..task.samples {
        let mut rng = tree.stream(Domain::Dataset, ElementKey::default().with_trial(i as u64));
        let class = rng.random_range(0..task.classes);
        let x: Vec<bool> = prototypes[class]
            .iter()
            .map(|&b| b ^ rng.random_bool(task.input_flip))
            .collect();
        labels.push(reference_infer(&model, &x)?.label);
        inputs.push(x);
    }
    Ok((model, Dataset { inputs, labels }))
}
