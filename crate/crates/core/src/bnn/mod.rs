//! Binary neural network inference through simulated macros.
//!
//! A layer is stored in lowered matrix form (conv layers through im2col
//! patches) with batch-norm folded into a per-channel threshold. The
//! software path [`reference_infer`] computes exact integer MACs; the
//! hardware path [`Deployment`] programs tiles into macros, evaluates them
//! by charge sharing and thresholds in the analog or digital domain.

pub mod idx;
mod infer;
mod layer;
pub mod synthetic;
mod tiling;
pub mod weights;

pub use infer::{
    analog_fires, evaluate_accuracy, macro_infer, reference_infer, AccuracyRow, AccuracySummary,
    AccuracyTable, Dataset, DeployedLayer, Deployment, InferenceTrace, LayerTrace, MacroConfig,
};
pub use layer::{
    fold_batchnorm, BatchNorm, BnnLayer, BnnModel, ChannelThreshold, ConvShape, InputBinarization,
    LayerKind, SigmaMode,
};
pub use tiling::{map_layer, PartialSum, Tile, TilePlan};
