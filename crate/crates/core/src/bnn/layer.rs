use serde::{Deserialize, Serialize};

use crate::bits::BitMatrix;
use crate::error::{Error, Result};

/// Which denominator the batch-norm fold divides by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaMode {
    /// `gamma * (PA - mu) / sigma^2 + beta`, as printed in the source
    /// formulation.
    #[default]
    Variance,
    /// `gamma * (PA - mu) / sigma + beta`, the conventional form.
    StdDev,
}

/// Folded activation rule for one output channel, in terms of the bipolar
/// pre-activation `s = 2M - N`. Every rule fires (+1) on equality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ChannelThreshold {
    /// +1 iff `s >= alpha`.
    AtLeast(f64),
    /// +1 iff `s <= alpha` (negative batch-norm scale).
    AtMost(f64),
    /// Output does not depend on `s`.
    Constant(bool),
}

impl ChannelThreshold {
    #[inline]
    pub fn fires(&self, s: i64) -> bool {
        match *self {
            ChannelThreshold::AtLeast(a) => s as f64 >= a,
            ChannelThreshold::AtMost(a) => s as f64 <= a,
            ChannelThreshold::Constant(b) => b,
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match *self {
            ChannelThreshold::AtLeast(a) | ChannelThreshold::AtMost(a) => Some(a),
            ChannelThreshold::Constant(_) => None,
        }
    }

    pub fn flipped(&self) -> bool {
        matches!(self, ChannelThreshold::AtMost(_))
    }
}

/// Folds `sign(gamma * (PA - mu) / d + beta)` into a single comparison.
///
/// With `d = sigma^2` (or `sigma`, per `mode`) the sign flips at
/// `alpha = mu - beta * d / gamma`. A negative `gamma` reverses the
/// comparison; a zero `gamma` leaves the constant `sign(beta)`.
pub fn fold_batchnorm(
    gamma: f64,
    beta: f64,
    mu: f64,
    sigma: f64,
    mode: SigmaMode,
) -> Result<ChannelThreshold> {
    if !(sigma > 0.0) {
        return Err(Error::domain(format!(
            "batch-norm sigma must be positive, got {sigma}"
        )));
    }
    let d = match mode {
        SigmaMode::Variance => sigma * sigma,
        SigmaMode::StdDev => sigma,
    };
    if gamma == 0.0 {
        return Ok(ChannelThreshold::Constant(beta >= 0.0));
    }
    let alpha = mu - beta * d / gamma;
    Ok(if gamma > 0.0 {
        ChannelThreshold::AtLeast(alpha)
    } else {
        ChannelThreshold::AtMost(alpha)
    })
}

/// Per-channel batch-norm parameters, as stored before folding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl BatchNorm {
    pub fn fold(&self, mode: SigmaMode) -> Result<Vec<ChannelThreshold>> {
        let n = self.gamma.len();
        if self.beta.len() != n || self.mu.len() != n || self.sigma.len() != n {
            return Err(Error::domain("batch-norm vectors differ in length"));
        }
        (0..n)
            .map(|i| fold_batchnorm(self.gamma[i], self.beta[i], self.mu[i], self.sigma[i], mode))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvShape {
    pub in_channels: usize,
    pub in_height: usize,
    pub in_width: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    /// Max-pool window (and stride) applied after activation; 1 = none.
    #[serde(default = "one")]
    pub pool: usize,
}

fn one() -> usize {
    1
}

impl ConvShape {
    pub fn out_height(&self) -> usize {
        (self.in_height + 2 * self.padding - self.kernel) / self.stride + 1
    }

    pub fn out_width(&self) -> usize {
        (self.in_width + 2 * self.padding - self.kernel) / self.stride + 1
    }

    pub fn pooled_height(&self) -> usize {
        self.out_height() / self.pool
    }

    pub fn pooled_width(&self) -> usize {
        self.out_width() / self.pool
    }

    /// Rows of the lowered weight matrix: one per (channel, ky, kx).
    pub fn patch_len(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    fn validate(&self) -> Result<()> {
        if self.in_channels == 0
            || self.out_channels == 0
            || self.kernel == 0
            || self.stride == 0
            || self.pool == 0
        {
            return Err(Error::domain("conv dimensions must be positive"));
        }
        if self.in_height + 2 * self.padding < self.kernel
            || self.in_width + 2 * self.padding < self.kernel
        {
            return Err(Error::domain("kernel larger than padded input"));
        }
        if self.pooled_height() == 0 || self.pooled_width() == 0 {
            return Err(Error::domain("pool window larger than conv output"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "shape", rename_all = "snake_case")]
pub enum LayerKind {
    FullyConnected { inputs: usize, outputs: usize },
    Conv(ConvShape),
}

impl LayerKind {
    pub fn input_len(&self) -> usize {
        match self {
            LayerKind::FullyConnected { inputs, .. } => *inputs,
            LayerKind::Conv(c) => c.in_channels * c.in_height * c.in_width,
        }
    }

    pub fn output_len(&self) -> usize {
        match self {
            LayerKind::FullyConnected { outputs, .. } => *outputs,
            LayerKind::Conv(c) => c.out_channels * c.pooled_height() * c.pooled_width(),
        }
    }

    /// `(rows, cols)` of the lowered weight matrix.
    pub fn matrix_dims(&self) -> (usize, usize) {
        match self {
            LayerKind::FullyConnected { inputs, outputs } => (*inputs, *outputs),
            LayerKind::Conv(c) => (c.patch_len(), c.out_channels),
        }
    }
}

/// One binary layer in lowered matrix form.
///
/// `weights` has one row per flattened input position (per patch element
/// for conv) and one column per output neuron or filter; `true` is +1.
#[derive(Debug, Clone, PartialEq)]
pub struct BnnLayer {
    pub kind: LayerKind,
    pub weights: BitMatrix,
    pub thresholds: Vec<ChannelThreshold>,
}

impl BnnLayer {
    pub fn new(
        kind: LayerKind,
        weights: BitMatrix,
        thresholds: Vec<ChannelThreshold>,
    ) -> Result<Self> {
        let layer = Self {
            kind,
            weights,
            thresholds,
        };
        layer.validate()?;
        Ok(layer)
    }

    pub fn validate(&self) -> Result<()> {
        if let LayerKind::Conv(c) = &self.kind {
            c.validate()?;
        }
        let (rows, cols) = self.kind.matrix_dims();
        if rows == 0 || cols == 0 {
            return Err(Error::domain("layer has an empty weight matrix"));
        }
        if self.weights.rows() != rows || self.weights.cols() != cols {
            return Err(Error::DimensionMismatch {
                what: "layer weights",
                expected: rows * cols,
                found: self.weights.rows() * self.weights.cols(),
            });
        }
        if self.thresholds.len() != cols {
            return Err(Error::DimensionMismatch {
                what: "layer thresholds",
                expected: cols,
                found: self.thresholds.len(),
            });
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.weights.rows()
    }

    pub fn cols(&self) -> usize {
        self.weights.cols()
    }

    /// Input vectors of every MAC this layer performs, one per output
    /// position. Conv padding reads as '0' (-1).
    pub fn mac_inputs(&self, input: &[bool]) -> Vec<Vec<bool>> {
        match &self.kind {
            LayerKind::FullyConnected { .. } => vec![input.to_vec()],
            LayerKind::Conv(c) => {
                let (oh, ow) = (c.out_height(), c.out_width());
                let mut patches = Vec::with_capacity(oh * ow);
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut patch = Vec::with_capacity(c.patch_len());
                        for ch in 0..c.in_channels {
                            for ky in 0..c.kernel {
                                for kx in 0..c.kernel {
                                    let y = (oy * c.stride + ky) as isize - c.padding as isize;
                                    let x = (ox * c.stride + kx) as isize - c.padding as isize;
                                    let inside = y >= 0
                                        && x >= 0
                                        && (y as usize) < c.in_height
                                        && (x as usize) < c.in_width;
                                    patch.push(
                                        inside
                                            && input[ch * c.in_height * c.in_width
                                                + y as usize * c.in_width
                                                + x as usize],
                                    );
                                }
                            }
                        }
                        patches.push(patch);
                    }
                }
                patches
            }
        }
    }

    /// Arranges per-position channel signs (`[position][channel]`) into the
    /// layer's CHW output and applies max-pooling.
    #[allow(clippy::needless_range_loop)]
    pub fn assemble(&self, signs: &[Vec<bool>]) -> Vec<bool> {
        match &self.kind {
            LayerKind::FullyConnected { .. } => signs[0].clone(),
            LayerKind::Conv(c) => {
                let (oh, ow) = (c.out_height(), c.out_width());
                let (ph, pw) = (c.pooled_height(), c.pooled_width());
                let mut out = Vec::with_capacity(c.out_channels * ph * pw);
                for ch in 0..c.out_channels {
                    for py in 0..ph {
                        for px in 0..pw {
                            let mut any = false;
                            for dy in 0..c.pool {
                                for dx in 0..c.pool {
                                    let pos = (py * c.pool + dy) * ow + px * c.pool + dx;
                                    debug_assert!(pos < oh * ow);
                                    any |= signs[pos][ch];
                                }
                            }
                            out.push(any);
                        }
                    }
                }
                out
            }
        }
    }
}

/// Rule for turning real-valued first-layer inputs into bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputBinarization {
    /// Values at or above the threshold become '1'.
    pub threshold: f64,
}

impl InputBinarization {
    pub fn apply(&self, values: &[f32]) -> Vec<bool> {
        values.iter().map(|&v| v as f64 >= self.threshold).collect()
    }

    /// Threshold at the mean of every value in the dataset.
    pub fn from_mean<'a>(samples: impl IntoIterator<Item = &'a [f32]>) -> Self {
        let (mut sum, mut n) = (0.0f64, 0u64);
        for s in samples {
            for &v in s {
                sum += v as f64;
                n += 1;
            }
        }
        Self {
            threshold: if n == 0 { 0.0 } else { sum / n as f64 },
        }
    }
}

/// A stack of binary layers. The last layer is the classifier: its label is
/// the index of the largest pre-activation (lowest index on ties).
#[derive(Debug, Clone, PartialEq)]
pub struct BnnModel {
    pub layers: Vec<BnnLayer>,
    pub input: Option<InputBinarization>,
}

impl BnnModel {
    pub fn new(layers: Vec<BnnLayer>, input: Option<InputBinarization>) -> Result<Self> {
        let m = Self { layers, input };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let last = self
            .layers
            .last()
            .ok_or_else(|| Error::domain("model has no layers"))?;
        if !matches!(last.kind, LayerKind::FullyConnected { .. }) {
            return Err(Error::domain(
                "the classifier layer must be fully connected",
            ));
        }
        for l in &self.layers {
            l.validate()?;
        }
        for (a, b) in self.layers.iter().zip(self.layers.iter().skip(1)) {
            if a.kind.output_len() != b.kind.input_len() {
                return Err(Error::DimensionMismatch {
                    what: "consecutive layer shapes",
                    expected: a.kind.output_len(),
                    found: b.kind.input_len(),
                });
            }
        }
        Ok(())
    }

    pub fn input_len(&self) -> usize {
        self.layers[0].kind.input_len()
    }

    pub fn classes(&self) -> usize {
        self.layers.last().map_or(0, |l| l.cols())
    }
}
