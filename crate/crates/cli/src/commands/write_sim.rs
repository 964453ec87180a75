use std::fs;
use std::path::{Path, PathBuf};

use fecim::rng::{Domain, ElementKey, SeedTree};
use fecim::{BitMatrix, MacroArray};
use rand::Rng;
use serde::Serialize;

use crate::output::{g17, OutputDir};
use crate::{CliError, RunConfig, WriteSimArgs};

#[derive(Serialize)]
struct Summary {
    source: &'static str,
    pulses: u64,
    forbidden: u64,
    magnitudes: Vec<f64>,
    readback_ok: bool,
}

/// Reads a text matrix: one row per line of '0'/'1' characters; blanks,
/// commas and `#` comments are ignored.
pub fn parse_matrix(text: &str) -> Result<BitMatrix, CliError> {
    let mut rows: Vec<Vec<bool>> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("");
        let mut row = Vec::new();
        for ch in body.chars() {
            match ch {
                '0' => row.push(false),
                '1' => row.push(true),
                c if c.is_whitespace() || c == ',' => {}
                c => {
                    return Err(CliError::Config(format!(
                        "weights line {}: unexpected {c:?}",
                        ln + 1
                    )))
                }
            }
        }
        if !row.is_empty() {
            rows.push(row);
        }
    }
    let cols = rows.first().map_or(0, Vec::len);
    if let Some(i) = rows.iter().position(|r| r.len() != cols) {
        return Err(CliError::Config(format!(
            "weights row {} has {} entries, expected {cols}",
            i + 1,
            rows[i].len()
        )));
    }
    let n = rows.len();
    Ok(BitMatrix::from_vec(n, cols, rows.concat())?)
}

fn parse_fault(spec: &str) -> Result<(usize, usize, usize, f64), CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || {
        CliError::Config(format!(
            "--inject-fault expects ROW:PHASE:WL_ROW:VOLTS, got {spec:?}"
        ))
    };
    if parts.len() != 4 {
        return Err(bad());
    }
    Ok((
        parts[0].parse().map_err(|_| bad())?,
        parts[1].parse().map_err(|_| bad())?,
        parts[2].parse().map_err(|_| bad())?,
        parts[3].parse().map_err(|_| bad())?,
    ))
}

fn load_weights(path: &Path) -> Result<BitMatrix, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_matrix(&text)
}

pub fn write_sim(cfg: &RunConfig, args: &WriteSimArgs) -> Result<PathBuf, CliError> {
    let (rows, cols) = (cfg.array.rows, cfg.array.cols);
    let (weights, source) = match &cfg.write_sim.weights {
        Some(p) => (load_weights(p)?, "file"),
        None => {
            let mut rng = SeedTree::new(cfg.seed).stream(Domain::Weights, ElementKey::default());
            (
                BitMatrix::from_fn(rows, cols, |_, _| rng.random()),
                "random",
            )
        }
    };
    if weights.rows() != rows || weights.cols() != cols {
        return Err(CliError::Config(format!(
            "weight matrix is {}x{}, array is {rows}x{cols}",
            weights.rows(),
            weights.cols()
        )));
    }
    let fault = args.inject_fault.as_deref().map(parse_fault).transpose()?;
    if let Some((_, _, wl, _)) = fault {
        if wl >= rows {
            return Err(CliError::Config(format!(
                "fault wordline {wl} outside 0..{rows}"
            )));
        }
    }
    let blank = MacroArray::new(rows, cols, cfg.params(), cfg.array.c_m);
    let (array, audit) = blank.program_with(&weights, |row, phase, p| {
        if let Some((r, ph, wl, v)) = fault {
            if r == row && ph == phase {
                p.wl[wl] = v;
                p.wlb[wl] = v;
            }
        }
    })?;
    if audit.forbidden > 0 {
        return Err(CliError::Disturb(format!(
            "{} pulses in the forbidden band",
            audit.forbidden
        )));
    }
    let readback_ok = array.read_back() == weights;
    if !readback_ok {
        return Err(CliError::Disturb(
            "read-back differs from the target matrix".into(),
        ));
    }

    let hist = audit.sorted_histogram();
    let hist_rows: Vec<Vec<String>> = hist
        .iter()
        .map(|(m, n)| vec![g17(*m), n.to_string()])
        .collect();
    let trace_rows: Vec<Vec<String>> = audit
        .trace
        .iter()
        .map(|t| {
            vec![
                t.row.to_string(),
                t.phase.to_string(),
                g17(t.v_wl_selected),
                g17(t.v_wlb_selected),
                t.bl_high.to_string(),
                g17(t.max_abs_vgs),
            ]
        })
        .collect();
    let mut out = OutputDir::create(&cfg.output.dir)?;
    out.csv("write_histogram.csv", &["abs_v_gs", "count"], &hist_rows)?;
    out.csv(
        "write_trace.csv",
        &[
            "row",
            "phase",
            "v_wl_selected",
            "v_wlb_selected",
            "bl_high",
            "max_abs_v_gs",
        ],
        &trace_rows,
    )?;
    out.finish(
        "write-sim",
        cfg,
        Summary {
            source,
            pulses: audit.pulses,
            forbidden: audit.forbidden,
            magnitudes: hist.iter().map(|h| h.0).collect(),
            readback_ok,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_text() {
        let m = parse_matrix("# 2x3\n1 0 1\n0,1,1 # trailing\n\n").unwrap();
        assert_eq!((m.rows(), m.cols()), (2, 3));
        assert!(m.get(0, 0) && !m.get(0, 1) && m.get(1, 2));
        assert!(parse_matrix("10\n1\n").is_err());
        assert!(parse_matrix("1x\n").is_err());
    }

    #[test]
    fn fault_spec() {
        assert_eq!(parse_fault("3:0:4:0.3").unwrap(), (3, 0, 4, 0.3));
        assert!(parse_fault("3:0").is_err());
    }
}
