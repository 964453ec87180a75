//! Capacitance, energy, area and variation studies of the macro.

mod montecarlo;

pub use montecarlo::{
    default_p_grid, matches_for, run_onoff_error_mc, run_sigma_mac_mc, ErrorReport, McSetup,
    VariationReport,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::macroarray::equivalent_capacitance;

/// Charging load of the SRAM-based charge-domain baseline: every matching
/// cell charges its own capacitor from the supply.
pub fn sram_equivalent_capacitance(m: usize, c_m: f64) -> f64 {
    m as f64 * c_m
}

/// Mean proposed/SRAM charging-load ratio with M uniform over `0..=N`.
///
/// Both sums are taken over the same M range; the result equals
/// `(N - 1) / (3N)`.
pub fn average_ceq_ratio(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("N must be at least 1"));
    }
    let nf = n as f64;
    let (mut proposed, mut sram) = (0.0, 0.0);
    for m in 0..=n {
        proposed += (m * (n - m)) as f64 / nf;
        sram += m as f64;
    }
    Ok(proposed / sram)
}

/// Supply energy to charge `c_eq` to `v_dd` through a switch: `C * V^2`.
pub fn mac_energy(c_eq: f64, v_dd: f64) -> Result<f64> {
    if !(c_eq >= 0.0) {
        return Err(Error::domain(format!(
            "c_eq must be non-negative, got {c_eq}"
        )));
    }
    Ok(c_eq * v_dd * v_dd)
}

/// First-order (delta-method) std of `V_MAC / VDD` under capacitor
/// mismatch: `sigma_c * sqrt(p (1 - p) / N)`.
pub fn sigma_mac_theory(p: f64, sigma_c: f64, n: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) || n == 0 {
        return Err(Error::domain(format!(
            "need 0 <= p <= 1 and N > 0, got p={p}, N={n}"
        )));
    }
    Ok(sigma_c * (p * (1.0 - p) / n as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub m: usize,
    pub n: usize,
    pub c_eq_proposed: f64,
    pub c_eq_sram: f64,
    pub energy_proposed: f64,
    pub energy_sram: f64,
    /// `c_eq_proposed / c_eq_sram`; absent when the baseline load is zero.
    pub ratio: Option<f64>,
}

pub fn energy_report(m: usize, n: usize, c_m: f64, v_dd: f64) -> Result<EnergyReport> {
    let c_eq_proposed = equivalent_capacitance(m, n, c_m)?;
    let c_eq_sram = sram_equivalent_capacitance(m, c_m);
    Ok(EnergyReport {
        m,
        n,
        c_eq_proposed,
        c_eq_sram,
        energy_proposed: mac_energy(c_eq_proposed, v_dd)?,
        energy_sram: mac_energy(c_eq_sram, v_dd)?,
        ratio: (c_eq_sram > 0.0).then(|| c_eq_proposed / c_eq_sram),
    })
}

/// Reports for every `M` in `0..=N`.
pub fn energy_sweep(n: usize, c_m: f64, v_dd: f64) -> Result<Vec<EnergyReport>> {
    (0..=n).map(|m| energy_report(m, n, c_m, v_dd)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellComposition {
    pub transistors: u32,
    pub capacitors: u32,
    /// Capacitor can sit above the transistors.
    pub capacitor_stacked: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaReport {
    pub proposed: CellComposition,
    pub sram_cd: CellComposition,
    /// Proposed transistors per cell over SRAM transistors per cell.
    pub transistor_ratio: f64,
}

pub fn area_report() -> AreaReport {
    let proposed = CellComposition {
        transistors: 2,
        capacitors: 1,
        capacitor_stacked: true,
    };
    // 8 for the XNOR cell plus one to reach ScL.
    let sram_cd = CellComposition {
        transistors: 9,
        capacitors: 1,
        capacitor_stacked: false,
    };
    AreaReport {
        proposed,
        sram_cd,
        transistor_ratio: proposed.transistors as f64 / sram_cd.transistors as f64,
    }
}
