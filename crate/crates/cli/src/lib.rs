//! Command-line driver: binds a TOML run configuration to the simulator and
//! writes plot-ready CSV tables plus a reproducibility manifest.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;

/// Failure classes, each with its own exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("write disturb: {0}")]
    Disturb(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Sim(fecim::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Disturb(_) => 3,
            CliError::Io(_) | CliError::Sim(_) => 1,
        }
    }
}

impl From<fecim::Error> for CliError {
    fn from(e: fecim::Error) -> Self {
        use fecim::Error as E;
        match e {
            E::Config(_) | E::Domain(_) | E::DimensionMismatch { .. } => {
                CliError::Config(e.to_string())
            }
            E::DisturbRisk { .. } | E::WriteDisturb { .. } | E::ComplementarityViolation(_) => {
                CliError::Disturb(e.to_string())
            }
            e => CliError::Sim(e),
        }
    }
}

const AFTER_HELP: &str = "\
Exit status: 0 success, 2 configuration error, 3 write-disturb audit failure, 1 other failure.
Numbers in CSV files carry 17 significant digits. Every run also writes manifest.json
(config echo, config hash, seed, version, output digests).";

#[derive(Debug, Parser)]
#[command(name = "fecim", version, about = "FeFET 2T1C charge-domain CiM macro simulator", after_help = AFTER_HELP)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Default)]
pub struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, global = true, env = "FECIM_CONFIG")]
    pub config: Option<PathBuf>,
    /// Root seed for every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Monte Carlo trials (variation) or chips per grid point (bnn).
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 uses every core. Output does not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Sweep the matching count on one column.
    ///
    /// mac_sweep.csv: m, v_scl_ideal, v_scl_nonideal, c_eq, energy
    /// (volts, farads, joules). The non-ideal column uses sampled devices and
    /// the configured XNOR model.
    MacSweep,
    /// Monte Carlo MAC accuracy under capacitor and resistance variation.
    ///
    /// sigma_mac.csv: sigma_c, p, m, sigma_mac, theory, trials (sigma_mac is
    /// the std of V_ScL / VDD). onoff_error.csv: on_off_ratio, p, m,
    /// mean_abs_error, q_below_one_flip, trials. onoff_summary.csv:
    /// on_off_ratio, mean_abs_error, q_pooled.
    Variation,
    /// Charging load and energy of the proposed macro against an SRAM
    /// charge-domain baseline.
    ///
    /// energy_compare.csv: m, p, c_eq_proposed, c_eq_sram, ratio,
    /// energy_proposed, energy_sram. energy_vdd.csv: v_dd, m,
    /// energy_proposed, energy_sram.
    EnergyCompare,
    /// Classification accuracy against capacitor mismatch.
    ///
    /// bnn_accuracy.csv: sigma_c, seed, trial, accuracy. bnn_summary.csv:
    /// sigma_c, mean, std, min, max, trials, drop_points.
    Bnn,
    /// Program a weight matrix and audit every gate pulse.
    ///
    /// write_histogram.csv: abs_v_gs, count. write_trace.csv: row, phase,
    /// v_wl_selected, v_wlb_selected, bl_high, max_abs_v_gs.
    WriteSim(WriteSimArgs),
}

#[derive(Debug, Clone, Args, Default)]
pub struct WriteSimArgs {
    /// Test hook: during row ROW, phase PHASE, drive wordline pair WL_ROW
    /// to VOLTS.
    #[arg(long, hide = true, value_name = "ROW:PHASE:WL_ROW:VOLTS")]
    pub inject_fault: Option<String>,
}

/// Resolves the configuration: file (or defaults), then flag overrides.
pub fn resolve_config(global: &GlobalArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &global.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = global.seed {
        cfg.seed = s;
    }
    if let Some(t) = global.trials {
        cfg.trials = Some(t);
    }
    if let Some(o) = &global.out {
        cfg.output.dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs a parsed command; returns the manifest path.
pub fn run(cli: &Cli) -> Result<PathBuf, CliError> {
    let cfg = resolve_config(&cli.global)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.global.threads)
        .build()
        .map_err(|e| CliError::Io(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::MacSweep => commands::mac_sweep(&cfg),
        Command::Variation => commands::variation(&cfg),
        Command::EnergyCompare => commands::energy_compare(&cfg),
        Command::Bnn => commands::bnn(&cfg),
        Command::WriteSim(a) => commands::write_sim(&cfg, a),
    })
}

/// Parses `args`, runs, reports on stderr and returns the exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(manifest) => {
            eprintln!("wrote {}", manifest.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
