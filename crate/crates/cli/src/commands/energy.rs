use std::path::PathBuf;

use fecim::analysis::{
    area_report, average_ceq_ratio, energy_report, energy_sweep, matches_for, AreaReport,
};
use serde::Serialize;

use crate::output::{g17, OutputDir};
use crate::{CliError, RunConfig};

#[derive(Serialize)]
struct Summary {
    n: usize,
    /// Proposed/SRAM load at p = 0.5 (nearest M).
    ratio_at_half: Option<f64>,
    average_ratio: f64,
    area: AreaReport,
}

pub fn energy_compare(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let n = cfg.array.rows;
    let c_m = cfg.array.c_m;
    let v_dd = cfg.device.v_dd;
    let sweep = energy_sweep(n, c_m, v_dd)?;
    let rows: Vec<Vec<String>> = sweep
        .iter()
        .map(|r| {
            vec![
                r.m.to_string(),
                g17(r.m as f64 / n as f64),
                g17(r.c_eq_proposed),
                g17(r.c_eq_sram),
                r.ratio.map(g17).unwrap_or_default(),
                g17(r.energy_proposed),
                g17(r.energy_sram),
            ]
        })
        .collect();
    let half = matches_for(0.5, n);
    let mut vdd_rows = Vec::new();
    for &v in &cfg.sweep.v_dd_grid {
        let r = energy_report(half, n, c_m, v)?;
        vdd_rows.push(vec![
            g17(v),
            half.to_string(),
            g17(r.energy_proposed),
            g17(r.energy_sram),
        ]);
    }

    let mut out = OutputDir::create(&cfg.output.dir)?;
    out.csv(
        "energy_compare.csv",
        &[
            "m",
            "p",
            "c_eq_proposed",
            "c_eq_sram",
            "ratio",
            "energy_proposed",
            "energy_sram",
        ],
        &rows,
    )?;
    out.csv(
        "energy_vdd.csv",
        &["v_dd", "m", "energy_proposed", "energy_sram"],
        &vdd_rows,
    )?;
    out.finish(
        "energy-compare",
        cfg,
        Summary {
            n,
            ratio_at_half: sweep[half].ratio,
            average_ratio: average_ceq_ratio(n)?,
            area: area_report(),
        },
    )
}
