use std::path::PathBuf;

use fecim::analysis::{run_onoff_error_mc, run_sigma_mac_mc, McSetup};
use fecim::{OnOffRatio, VariationSpec};
use serde::Serialize;

use crate::output::{g17, OutputDir};
use crate::{CliError, RunConfig};

/// Fewer trials than this cannot resolve the one-flip fraction.
pub const MIN_TRIALS: u64 = 10_000;
const DEFAULT_TRIALS: u64 = 100_000;

#[derive(Serialize)]
struct RatioSummary {
    on_off_ratio: f64,
    mean_abs_error: f64,
    q_pooled: f64,
}

#[derive(Serialize)]
struct Summary {
    trials: u64,
    n: usize,
    /// Largest sigma_MAC at p = 0.5 over the sigma_c grid, when sampled.
    sigma_mac_at_half: Vec<(f64, f64)>,
    onoff: Vec<RatioSummary>,
}

pub fn variation(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let trials = cfg.trials.unwrap_or(DEFAULT_TRIALS);
    if trials < MIN_TRIALS {
        return Err(CliError::Config(format!(
            "variation needs at least {MIN_TRIALS} trials, got {trials}"
        )));
    }
    let n = cfg.array.rows;
    let base = cfg.spec();
    let setup = |spec: VariationSpec| McSetup {
        params: cfg.params(),
        c_nominal: cfg.array.c_m,
        spec,
        n,
    };
    let grid = &cfg.sweep.p_grid;

    let mut sigma_rows = Vec::new();
    let mut at_half = Vec::new();
    for &sigma_c in &cfg.sweep.sigma_c_grid {
        let spec = VariationSpec {
            sigma_c,
            on_off_ratio: OnOffRatio::Infinite,
            ..base
        };
        let r = run_sigma_mac_mc(&setup(spec), grid, trials)?;
        for i in 0..r.p_grid.len() {
            if r.p_grid[i] == 0.5 {
                at_half.push((sigma_c, r.sigma_mac[i]));
            }
            sigma_rows.push(vec![
                g17(sigma_c),
                g17(r.p_grid[i]),
                r.m_counts[i].to_string(),
                g17(r.sigma_mac[i]),
                g17(r.theory[i]),
                trials.to_string(),
            ]);
        }
    }

    let mut err_rows = Vec::new();
    let mut summary_rows = Vec::new();
    let mut onoff = Vec::new();
    for &ratio in &cfg.sweep.on_off_ratios {
        let spec = VariationSpec {
            on_off_ratio: OnOffRatio::Finite(ratio),
            ..base
        };
        let r = run_onoff_error_mc(&setup(spec), grid, trials)?;
        for i in 0..r.p_grid.len() {
            err_rows.push(vec![
                g17(ratio),
                g17(r.p_grid[i]),
                r.m_counts[i].to_string(),
                g17(r.mean_abs_error[i]),
                g17(r.q_below_one_flip[i]),
                trials.to_string(),
            ]);
        }
        let mean = r.mean_abs_error.iter().sum::<f64>() / r.mean_abs_error.len().max(1) as f64;
        summary_rows.push(vec![g17(ratio), g17(mean), g17(r.q_pooled)]);
        onoff.push(RatioSummary {
            on_off_ratio: ratio,
            mean_abs_error: mean,
            q_pooled: r.q_pooled,
        });
    }

    let mut out = OutputDir::create(&cfg.output.dir)?;
    out.csv(
        "sigma_mac.csv",
        &["sigma_c", "p", "m", "sigma_mac", "theory", "trials"],
        &sigma_rows,
    )?;
    out.csv(
        "onoff_error.csv",
        &[
            "on_off_ratio",
            "p",
            "m",
            "mean_abs_error",
            "q_below_one_flip",
            "trials",
        ],
        &err_rows,
    )?;
    out.csv(
        "onoff_summary.csv",
        &["on_off_ratio", "mean_abs_error", "q_pooled"],
        &summary_rows,
    )?;
    out.finish(
        "variation",
        cfg,
        Summary {
            trials,
            n,
            sigma_mac_at_half: at_half,
            onoff,
        },
    )
}
