//! Monte Carlo studies of MAC accuracy under device variation.
//!
//! Trial `t` samples one column of `N` cells from the streams keyed by
//! `(seed, row, 0, t)`; the same column is evaluated at every point of the
//! p grid. Trials run in fixed-size batches whose partial statistics are
//! merged in batch order, so the result does not depend on thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sigma_mac_theory;
use crate::cell::XnorModel;
use crate::device::{FeFetParams, VariationSpec};
use crate::error::{Error, Result};
use crate::macroarray::{sampled_ones_column, MacStimulus, MacroArray};

const BATCH: u64 = 512;

/// Everything a column study needs besides the grid and trial count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McSetup {
    pub params: FeFetParams,
    pub c_nominal: f64,
    pub spec: VariationSpec,
    /// Cells per column.
    pub n: usize,
}

impl McSetup {
    fn validate(&self, p_grid: &[f64], trials: u64) -> Result<()> {
        self.params.validate()?;
        self.spec.validate()?;
        if self.n == 0 {
            return Err(Error::config("column must hold at least one cell"));
        }
        if trials < 2 {
            return Err(Error::config("need at least two trials"));
        }
        if let Some(p) = p_grid.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::config(format!("p = {p} outside [0, 1]")));
        }
        Ok(())
    }
}

/// `0, 0.1, ..., 1.0`.
pub fn default_p_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

/// Matching cells realizing the fraction `p` of a column of `n`.
pub fn matches_for(p: f64, n: usize) -> usize {
    ((p * n as f64).round() as usize).min(n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationReport {
    pub p_grid: Vec<f64>,
    /// Matching cells used for each grid point.
    pub m_counts: Vec<usize>,
    /// Sample std of `V_MAC / VDD`.
    pub sigma_mac: Vec<f64>,
    /// Delta-method prediction at the realized `M / N`.
    pub theory: Vec<f64>,
    pub trials: u64,
    pub n: usize,
    pub spec: VariationSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub p_grid: Vec<f64>,
    pub m_counts: Vec<usize>,
    /// Mean of `|V_MAC / VDD - M / N|`.
    pub mean_abs_error: Vec<f64>,
    /// Fraction of trials with `|error| < 1 / N`.
    pub q_below_one_flip: Vec<f64>,
    /// The same fraction pooled over the whole grid.
    pub q_pooled: f64,
    pub trials: u64,
    pub n: usize,
    pub spec: VariationSpec,
}

/// Welford accumulator.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(&mut self, o: &Moments) {
        if o.n == 0 {
            return;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        self.mean += d * o.n as f64 / n as f64;
        self.m2 += o.m2 + d * d * (self.n as f64 * o.n as f64) / n as f64;
        self.n = n;
    }

    fn std(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).sqrt()
        }
    }
}

#[derive(Debug, Clone, Default)]
struct ErrorAcc {
    abs_sum: f64,
    below: u64,
    n: u64,
}

/// Runs `per_trial` over all trials in deterministic batches and folds the
/// per-batch accumulators in order.
fn batched<A, F>(
    trials: u64,
    init: impl Fn() -> A + Sync,
    per_trial: F,
    merge: impl Fn(&mut A, &A),
) -> Result<A>
where
    A: Send,
    F: Fn(&mut A, u64) -> Result<()> + Sync,
{
    let batches = trials.div_ceil(BATCH);
    let parts: Vec<Result<A>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut acc = init();
            for t in b * BATCH..((b + 1) * BATCH).min(trials) {
                per_trial(&mut acc, t)?;
            }
            Ok(acc)
        })
        .collect();
    let mut total = init();
    for part in parts {
        merge(&mut total, &part?);
    }
    Ok(total)
}

fn stimuli(p_grid: &[f64], n: usize, v_dd: f64) -> (Vec<usize>, Vec<MacStimulus>) {
    p_grid
        .iter()
        .map(|&p| {
            let m = matches_for(p, n);
            let bits: Vec<bool> = (0..n).map(|i| i < m).collect();
            (m, MacStimulus::from_bits(&bits, v_dd))
        })
        .unzip()
}

/// Normalized std of the MAC voltage under capacitor mismatch alone
/// (ideal switches).
pub fn run_sigma_mac_mc(setup: &McSetup, p_grid: &[f64], trials: u64) -> Result<VariationReport> {
    setup.validate(p_grid, trials)?;
    let McSetup {
        params,
        c_nominal,
        spec,
        n,
    } = *setup;
    let (m_counts, stims) = stimuli(p_grid, n, params.v_dd);
    let k = p_grid.len();
    let acc = batched(
        trials,
        || vec![Moments::default(); k],
        |acc, t| {
            let cells = sampled_ones_column(n, &params, c_nominal, &spec, t, false)?;
            let array = MacroArray::from_cells(n, 1, cells, params)?;
            for (j, s) in stims.iter().enumerate() {
                let v = array.mac_evaluate(s, XnorModel::Ideal)?.v_scl[0];
                acc[j].push(v / params.v_dd);
            }
            Ok(())
        },
        |a, b| a.iter_mut().zip(b).for_each(|(x, y)| x.merge(y)),
    )?;
    let theory = m_counts
        .iter()
        .map(|&m| sigma_mac_theory(m as f64 / n as f64, spec.sigma_c, n))
        .collect::<Result<_>>()?;
    Ok(VariationReport {
        p_grid: p_grid.to_vec(),
        m_counts,
        sigma_mac: acc.iter().map(Moments::std).collect(),
        theory,
        trials,
        n,
        spec,
    })
}

/// MAC error with sampled on/off resistances and capacitors (divider
/// model), against the ideal `M / N`.
pub fn run_onoff_error_mc(setup: &McSetup, p_grid: &[f64], trials: u64) -> Result<ErrorReport> {
    setup.validate(p_grid, trials)?;
    let McSetup {
        params,
        c_nominal,
        spec,
        n,
    } = *setup;
    let (m_counts, stims) = stimuli(p_grid, n, params.v_dd);
    let k = p_grid.len();
    let one_flip = 1.0 / n as f64;
    let acc = batched(
        trials,
        || vec![ErrorAcc::default(); k],
        |acc, t| {
            let cells = sampled_ones_column(n, &params, c_nominal, &spec, t, true)?;
            let array = MacroArray::from_cells(n, 1, cells, params)?;
            for (j, s) in stims.iter().enumerate() {
                let v = array.mac_evaluate(s, XnorModel::Divider)?.v_scl[0];
                let e = (v / params.v_dd - m_counts[j] as f64 / n as f64).abs();
                acc[j].abs_sum += e;
                acc[j].below += (e < one_flip) as u64;
                acc[j].n += 1;
            }
            Ok(())
        },
        |a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                x.abs_sum += y.abs_sum;
                x.below += y.below;
                x.n += y.n;
            }
        },
    )?;
    let below: u64 = acc.iter().map(|a| a.below).sum();
    let total: u64 = acc.iter().map(|a| a.n).sum();
    Ok(ErrorReport {
        p_grid: p_grid.to_vec(),
        m_counts,
        mean_abs_error: acc.iter().map(|a| a.abs_sum / a.n as f64).collect(),
        q_below_one_flip: acc.iter().map(|a| a.below as f64 / a.n as f64).collect(),
        q_pooled: below as f64 / total as f64,
        trials,
        n,
        spec,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{OnOffRatio, ResistanceSpread};

    fn setup(sigma_c: f64, sigma_r: f64, ratio: OnOffRatio) -> McSetup {
        McSetup {
            params: FeFetParams::default(),
            c_nominal: 1.2e-15,
            spec: VariationSpec {
                sigma_c,
                sigma_r,
                on_off_ratio: ratio,
                resistance_spread: ResistanceSpread::LogScaled,
                seed: 2021,
            },
            n: 128,
        }
    }

    #[test]
    fn moments_merge_matches_serial() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let mut serial = Moments::default();
        xs.iter().for_each(|&x| serial.push(x));
        let mut merged = Moments::default();
        for chunk in xs.chunks(77) {
            let mut m = Moments::default();
            chunk.iter().for_each(|&x| m.push(x));
            merged.merge(&m);
        }
        assert!((serial.std() - merged.std()).abs() < 1e-12);
        assert!((serial.mean - merged.mean).abs() < 1e-12);
    }

    #[test]
    fn zero_at_p_zero() {
        let r =
            run_sigma_mac_mc(&setup(0.05, 0.0, OnOffRatio::Infinite), &[0.0, 0.5], 2000).unwrap();
        assert_eq!(r.sigma_mac[0], 0.0);
        assert!(r.sigma_mac[1] > 0.0);
    }

    #[test]
    fn sigma_scales_linearly() {
        let grid = [0.5];
        let hi = run_sigma_mac_mc(&setup(0.05, 0.0, OnOffRatio::Infinite), &grid, 20_000).unwrap();
        let lo = run_sigma_mac_mc(&setup(0.01, 0.0, OnOffRatio::Infinite), &grid, 20_000).unwrap();
        assert!(
            (lo.sigma_mac[0] - 0.000_442).abs() < 0.000_03,
            "{}",
            lo.sigma_mac[0]
        );
        // Common random numbers across sigma_c: ratio is 5 to first order.
        assert!((hi.sigma_mac[0] / lo.sigma_mac[0] - 5.0).abs() < 0.05);
    }

    #[test]
    fn no_variation_no_error() {
        let r = run_onoff_error_mc(
            &setup(0.0, 0.0, OnOffRatio::Infinite),
            &default_p_grid(),
            100,
        )
        .unwrap();
        assert!(
            r.mean_abs_error.iter().all(|&e| e < 1e-15),
            "{:?}",
            r.mean_abs_error
        );
        assert_eq!(r.q_pooled, 1.0);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let s = setup(0.05, 0.15, OnOffRatio::Finite(1e3));
        let grid = default_p_grid();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    (
                        run_sigma_mac_mc(&s, &grid, 3000).unwrap(),
                        run_onoff_error_mc(&s, &grid, 3000).unwrap(),
                    )
                })
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = setup(0.05, 0.0, OnOffRatio::Infinite);
        assert!(run_sigma_mac_mc(&s, &[1.5], 100).is_err());
        assert!(run_sigma_mac_mc(&s, &[0.5], 1).is_err());
        assert!(run_sigma_mac_mc(&setup(0.6, 0.0, OnOffRatio::Infinite), &[0.5], 100).is_err());
    }

    #[test]
    fn matches_rounding() {
        assert_eq!(matches_for(0.5, 128), 64);
        assert_eq!(matches_for(0.1, 128), 13);
        assert_eq!(matches_for(1.0, 128), 128);
    }
}
