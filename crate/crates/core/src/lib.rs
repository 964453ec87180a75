//! Behavioral simulator of a FeFET-based 2T1C charge-domain
//! compute-in-memory macro.
//!
//! The crate is organized bottom-up:
//!
//! * [`device`]: two-state FeFET and cell-capacitor models with variation
//!   sampling.
//! * [`cell`]: the 2T1C XNOR cell and its two-phase write protocol.
//! * [`macroarray`]: array programming with half-select, charge-sharing MAC
//!   evaluation, thresholding.
//! * [`analysis`]: charging-load, energy, area and Monte Carlo accuracy
//!   studies.
//! * [`bnn`]: binary network inference through simulated macros.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod bits;
pub mod bnn;
pub mod cell;
pub mod device;
pub mod error;
pub mod macroarray;
pub mod rng;

pub use bits::BitMatrix;
pub use cell::{
    cell_xnor, execute_write, plan_write, Cell2T1C, InputBitPair, WritePhaseVoltages, XnorModel,
};
pub use device::{
    apply_gate_pulse, sample_capacitor, sample_fefet, CapacitorInstance, FeFetInstance,
    FeFetParams, OnOffRatio, ResistanceSpread, VariationSpec,
};
pub use error::{Error, Result};
pub use macroarray::{
    deactivate, equivalent_capacitance, quantize, threshold_to_vref, ArrayDump, CompiledArray,
    MacResult, MacStimulus, MacroArray, WriteAudit,
};
pub use rng::{Domain, ElementKey, SeedTree};

/// Femtofarad, in farads.
pub const FEMTO: f64 = 1e-15;
