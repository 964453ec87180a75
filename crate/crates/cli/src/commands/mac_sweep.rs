use std::path::PathBuf;

use fecim::analysis::mac_energy;
use fecim::macroarray::single_column;
use fecim::{equivalent_capacitance, BitMatrix, MacStimulus, MacroArray, XnorModel};
use serde::Serialize;

use crate::output::{g17, OutputDir};
use crate::{CliError, RunConfig};

#[derive(Serialize)]
struct Summary {
    n: usize,
    xnor_model: XnorModel,
}

pub fn mac_sweep(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let n = cfg.array.rows;
    let params = cfg.params();
    let c_m = cfg.array.c_m;
    let spec = cfg.spec();

    // One sampled column, programmed to all '1' through the write protocol.
    let blank =
        MacroArray::sampled(n, 1, params, c_m, &spec, 0, 0)?.with_parasitic(cfg.array.c_parasitic);
    let (column, _) = blank.program(&BitMatrix::from_fn(n, 1, |_, _| true))?;

    let mut rows = Vec::with_capacity(n + 1);
    for m in 0..=n {
        let (ideal_array, stim) = single_column(n, m, params, c_m);
        let ideal = ideal_array.mac_evaluate(&stim, XnorModel::Ideal)?.v_scl[0];
        let bits: Vec<bool> = (0..n).map(|r| r < m).collect();
        let real = column
            .mac_evaluate(
                &MacStimulus::from_bits(&bits, params.v_dd),
                cfg.array.xnor_model,
            )?
            .v_scl[0];
        let c_eq = equivalent_capacitance(m, n, c_m)?;
        rows.push(vec![
            m.to_string(),
            g17(ideal),
            g17(real),
            g17(c_eq),
            g17(mac_energy(c_eq, params.v_dd)?),
        ]);
    }
    let mut out = OutputDir::create(&cfg.output.dir)?;
    out.csv(
        "mac_sweep.csv",
        &["m", "v_scl_ideal", "v_scl_nonideal", "c_eq", "energy"],
        &rows,
    )?;
    out.finish(
        "mac-sweep",
        cfg,
        Summary {
            n,
            xnor_model: cfg.array.xnor_model,
        },
    )
}
