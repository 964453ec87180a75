//! The 2T1C XNOR cell.
//!
//! M1 and M2 are n-type FeFETs holding complementary bits. Each gate sits on
//! a bitline (BL for M1, BLB for M2); each channel runs from a wordline
//! (WL for M1, WLB for M2) to the shared internal node X, which drives the
//! bottom plate of the cell capacitor.
//!
//! During writes the effective gate bias of a device is its bitline minus
//! its wordline. During compute the bitlines sit at GND, so an on-state
//! device conducts and an off-state one does not.

use serde::{Deserialize, Serialize};

use crate::device::{apply_gate_pulse, CapacitorInstance, FeFetInstance, FeFetParams};
use crate::error::{Device, Error, Result};

/// How node X is resolved during compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum XnorModel {
    /// X follows the rail behind the on-state device exactly.
    #[default]
    Ideal,
    /// X settles at the resistive divider between both rails.
    Divider,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell2T1C {
    pub m1: FeFetInstance,
    pub m2: FeFetInstance,
    pub cap: CapacitorInstance,
}

impl Cell2T1C {
    pub fn new(m1: FeFetInstance, m2: FeFetInstance, cap: CapacitorInstance) -> Self {
        Self { m1, m2, cap }
    }

    /// A cell already holding `weight` (M1 = weight, M2 = !weight).
    pub fn programmed(
        weight: bool,
        m1: FeFetInstance,
        m2: FeFetInstance,
        cap: CapacitorInstance,
    ) -> Self {
        Self {
            m1: FeFetInstance {
                stored_bit: weight,
                ..m1
            },
            m2: FeFetInstance {
                stored_bit: !weight,
                ..m2
            },
            cap,
        }
    }

    pub fn nominal(params: &FeFetParams, c_nominal: f64, weight: bool) -> Self {
        Self::programmed(
            weight,
            FeFetInstance::nominal(params, weight),
            FeFetInstance::nominal(params, !weight),
            CapacitorInstance::nominal(c_nominal),
        )
    }

    pub fn is_complementary(&self) -> bool {
        self.m1.stored_bit != self.m2.stored_bit
    }

    /// The stored weight bit, carried by M1.
    pub fn weight(&self) -> bool {
        self.m1.stored_bit
    }
}

/// Rail voltages seen by one cell during one write phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WritePhaseVoltages {
    pub v_scl: f64,
    pub v_bl: f64,
    pub v_blb: f64,
    pub v_wl: f64,
    pub v_wlb: f64,
}

impl WritePhaseVoltages {
    pub fn v_gs(&self, device: Device) -> f64 {
        match device {
            Device::M1 => self.v_bl - self.v_wl,
            Device::M2 => self.v_blb - self.v_wlb,
        }
    }
}

pub type WriteSchedule = [WritePhaseVoltages; 2];

/// Bitline pair for writing `weight` into the selected cell of a column.
pub fn bitline_rails(weight: bool, params: &FeFetParams) -> (f64, f64) {
    if weight {
        (params.v_write, 0.0)
    } else {
        (0.0, params.v_write)
    }
}

/// Two-phase rail schedule for a selected cell.
///
/// Phase 1 grounds both wordlines so the device whose bitline is at
/// `v_write` sees `+v_write` and turns to '1'. Phase 2 lifts both wordlines
/// to `v_write` so the device whose bitline is grounded sees `-v_write` and
/// turns to '0'. Bitlines hold across both phases.
pub fn plan_write(target_weight: bool, params: &FeFetParams) -> WriteSchedule {
    let (v_bl, v_blb) = bitline_rails(target_weight, params);
    [
        WritePhaseVoltages {
            v_scl: 0.0,
            v_bl,
            v_blb,
            v_wl: 0.0,
            v_wlb: 0.0,
        },
        WritePhaseVoltages {
            v_scl: 0.0,
            v_bl,
            v_blb,
            v_wl: params.v_write,
            v_wlb: params.v_write,
        },
    ]
}

/// Schedule seen by a cell on an unselected row: both wordlines at
/// `v_write / 2`, bitlines whatever the selected row's column demands.
pub fn half_select_schedule(column_weight: bool, params: &FeFetParams) -> WriteSchedule {
    let (v_bl, v_blb) = bitline_rails(column_weight, params);
    let half = params.v_write / 2.0;
    let phase = WritePhaseVoltages {
        v_scl: 0.0,
        v_bl,
        v_blb,
        v_wl: half,
        v_wlb: half,
    };
    [phase, phase]
}

/// Applies one phase to both devices. Errors carry the phase index.
pub fn apply_write_phase(
    cell: Cell2T1C,
    phase: &WritePhaseVoltages,
    phase_index: usize,
    params: &FeFetParams,
) -> std::result::Result<Cell2T1C, (Device, usize, f64)> {
    let v1 = phase.v_gs(Device::M1);
    let v2 = phase.v_gs(Device::M2);
    let m1 = apply_gate_pulse(cell.m1, v1, params).map_err(|_| (Device::M1, phase_index, v1))?;
    let m2 = apply_gate_pulse(cell.m2, v2, params).map_err(|_| (Device::M2, phase_index, v2))?;
    Ok(Cell2T1C { m1, m2, ..cell })
}

/// Runs a full schedule and checks the complementary-storage invariant.
pub fn execute_write(
    cell: Cell2T1C,
    schedule: &WriteSchedule,
    params: &FeFetParams,
) -> Result<Cell2T1C> {
    let mut c = cell;
    for (i, phase) in schedule.iter().enumerate() {
        c = apply_write_phase(c, phase, i, params)
            .map_err(|(_, _, v_gs)| Error::DisturbRisk { v_gs })?;
    }
    if !c.is_complementary() {
        return Err(Error::ComplementarityViolation(c.m1.stored_bit as u8));
    }
    Ok(c)
}

/// A binary input expressed as complementary compute rails.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputBitPair {
    pub value: bool,
    /// Rail on the 'true' line (WL).
    pub v_true: f64,
    /// Rail on the complement line (WLB).
    pub v_comp: f64,
}

impl InputBitPair {
    pub fn new(value: bool, v_dd: f64) -> Self {
        if value {
            Self {
                value,
                v_true: v_dd,
                v_comp: 0.0,
            }
        } else {
            Self {
                value,
                v_true: 0.0,
                v_comp: v_dd,
            }
        }
    }

    /// A grounded (inactive) row: both lines at GND.
    pub fn grounded() -> Self {
        Self {
            value: false,
            v_true: 0.0,
            v_comp: 0.0,
        }
    }
}

/// Node-X voltage after the compute phase.
pub fn cell_xnor(
    cell: &Cell2T1C,
    input: &InputBitPair,
    params: &FeFetParams,
    model: XnorModel,
) -> Result<f64> {
    if !cell.is_complementary() {
        return Err(Error::InvalidCell);
    }
    debug_assert!(
        input.v_true.abs() <= params.disturb_margin && input.v_comp.abs() <= params.disturb_margin
    );
    Ok(node_x(cell, input, model))
}

/// `cell_xnor` without the validity check, for inner loops over cells
/// already known to be complementary.
#[inline]
pub(crate) fn node_x(cell: &Cell2T1C, input: &InputBitPair, model: XnorModel) -> f64 {
    match model {
        XnorModel::Ideal => {
            if cell.m1.stored_bit {
                input.v_true
            } else {
                input.v_comp
            }
        }
        XnorModel::Divider => {
            let g1 = cell.m1.conductance();
            let g2 = cell.m2.conductance();
            (g1 * input.v_true + g2 * input.v_comp) / (g1 + g2)
        }
    }
}
