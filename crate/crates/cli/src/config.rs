use std::path::{Path, PathBuf};

use fecim::analysis::default_p_grid;
use fecim::bnn::synthetic::PrototypeTask;
use fecim::bnn::{MacroConfig, SigmaMode};
use fecim::device::resistance_serde;
use fecim::{FeFetParams, OnOffRatio, ResistanceSpread, VariationSpec, XnorModel};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceConfig {
    pub v_write: f64,
    pub v_dd: f64,
    pub r_on: f64,
    #[serde(with = "resistance_serde")]
    pub r_off: f64,
    /// Largest safe |V_GS|; defaults to `v_write / 2`.
    pub disturb_margin: Option<f64>,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        let p = FeFetParams::default();
        Self {
            v_write: p.v_write,
            v_dd: p.v_dd,
            r_on: p.r_on_nominal,
            r_off: p.r_off_nominal,
            disturb_margin: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArrayConfig {
    pub rows: usize,
    pub cols: usize,
    /// Cell capacitance, farads.
    pub c_m: f64,
    /// Extra ScL capacitance, farads.
    pub c_parasitic: f64,
    pub xnor_model: XnorModel,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        let m = MacroConfig::default();
        Self {
            rows: m.rows,
            cols: m.cols,
            c_m: m.c_nominal,
            c_parasitic: 0.0,
            xnor_model: XnorModel::Ideal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariationConfig {
    pub sigma_c: f64,
    pub sigma_r: f64,
    pub on_off_ratio: OnOffRatio,
    pub resistance_spread: ResistanceSpread,
}

impl Default for VariationConfig {
    fn default() -> Self {
        let s = VariationSpec::default();
        Self {
            sigma_c: s.sigma_c,
            sigma_r: s.sigma_r,
            on_off_ratio: s.on_off_ratio,
            resistance_spread: s.resistance_spread,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub p_grid: Vec<f64>,
    /// Capacitor spreads for the sigma_MAC study.
    pub sigma_c_grid: Vec<f64>,
    /// On/off ratios for the error study.
    pub on_off_ratios: Vec<f64>,
    /// Supply voltages for the energy report.
    pub v_dd_grid: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            p_grid: default_p_grid(),
            sigma_c_grid: vec![0.0, 0.01, 0.03, 0.05],
            on_off_ratios: vec![1e2, 1e3, 1e4, 1e5, 1e6],
            v_dd_grid: vec![0.45, 0.9],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BnnConfig {
    /// Weight manifest; the synthetic task is used when absent.
    pub model: Option<PathBuf>,
    /// IDX image and label files; required with `model`.
    pub images: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub max_samples: Option<usize>,
    pub sigma_c_grid: Vec<f64>,
    /// Chips per grid point.
    pub trials: u64,
    /// Overrides the manifest's batch-norm fold mode.
    pub sigma_mode: Option<SigmaMode>,
    pub synthetic: PrototypeTask,
}

impl Default for BnnConfig {
    fn default() -> Self {
        Self {
            model: None,
            images: None,
            labels: None,
            max_samples: None,
            sigma_c_grid: (0..10).map(|k| k as f64 * 0.05).collect(),
            trials: 30,
            sigma_mode: None,
            synthetic: PrototypeTask::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WriteSimConfig {
    /// Text matrix of '0'/'1' rows; a seeded random matrix when absent.
    pub weights: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

/// Everything a run needs. Paths are relative to the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Monte Carlo trials (variation) or chips per point (bnn).
    pub trials: Option<u64>,
    pub device: DeviceConfig,
    pub array: ArrayConfig,
    pub variation: VariationConfig,
    pub sweep: SweepConfig,
    pub bnn: BnnConfig,
    pub write_sim: WriteSimConfig,
    /// Not part of the reproducibility echo.
    #[serde(skip_serializing)]
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            trials: None,
            device: DeviceConfig::default(),
            array: ArrayConfig::default(),
            variation: VariationConfig::default(),
            sweep: SweepConfig::default(),
            bnn: BnnConfig::default(),
            write_sim: WriteSimConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| bad(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.bnn.model,
            &mut cfg.bnn.images,
            &mut cfg.bnn.labels,
            &mut cfg.write_sim.weights,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if cfg.output.dir.is_relative() {
            cfg.output.dir = base.join(&cfg.output.dir);
        }
        Ok(cfg)
    }

    pub fn params(&self) -> FeFetParams {
        let d = &self.device;
        let mut p = FeFetParams::new(d.v_write, d.v_dd, d.r_on, d.r_off);
        if let Some(m) = d.disturb_margin {
            p.disturb_margin = m;
        }
        p
    }

    pub fn spec(&self) -> VariationSpec {
        let v = &self.variation;
        VariationSpec {
            sigma_c: v.sigma_c,
            sigma_r: v.sigma_r,
            on_off_ratio: v.on_off_ratio,
            resistance_spread: v.resistance_spread,
            seed: self.seed,
        }
    }

    pub fn macro_config(&self) -> MacroConfig {
        MacroConfig {
            rows: self.array.rows,
            cols: self.array.cols,
            params: self.params(),
            c_nominal: self.array.c_m,
            c_parasitic: self.array.c_parasitic,
            model: self.array.xnor_model,
        }
    }

    /// Checks device and array invariants and referenced files.
    pub fn validate(&self) -> Result<(), CliError> {
        self.params().validate().map_err(|e| bad(e.to_string()))?;
        self.spec().validate().map_err(|e| bad(e.to_string()))?;
        let a = &self.array;
        if a.rows == 0 || a.cols == 0 {
            return Err(bad("array.rows and array.cols must be at least 1"));
        }
        if !(a.c_m > 0.0 && a.c_m.is_finite()) {
            return Err(bad(format!(
                "array.c_m must be a positive capacitance, got {}",
                a.c_m
            )));
        }
        if !(a.c_parasitic >= 0.0 && a.c_parasitic.is_finite()) {
            return Err(bad(format!(
                "array.c_parasitic must be >= 0, got {}",
                a.c_parasitic
            )));
        }
        if let Some(p) = self.sweep.p_grid.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(bad(format!("sweep.p_grid: {p} is outside [0, 1]")));
        }
        if let Some(r) = self.sweep.on_off_ratios.iter().find(|r| !(**r > 1.0)) {
            return Err(bad(format!("sweep.on_off_ratios: {r} must exceed 1")));
        }
        if let Some(v) = self.sweep.v_dd_grid.iter().find(|v| !(**v > 0.0)) {
            return Err(bad(format!("sweep.v_dd_grid: {v} must be positive")));
        }
        for (name, grid) in [
            ("sweep.sigma_c_grid", &self.sweep.sigma_c_grid),
            ("bnn.sigma_c_grid", &self.bnn.sigma_c_grid),
        ] {
            for &s in grid.iter() {
                let spec = VariationSpec {
                    sigma_c: s,
                    ..self.spec()
                };
                spec.validate().map_err(|e| bad(format!("{name}: {e}")))?;
            }
        }
        let b = &self.bnn;
        if b.model.is_some() != (b.images.is_some() && b.labels.is_some())
            || b.images.is_some() != b.labels.is_some()
        {
            return Err(bad(
                "bnn.model, bnn.images and bnn.labels must be given together",
            ));
        }
        for p in [&b.model, &b.images, &b.labels, &self.write_sim.weights]
            .into_iter()
            .flatten()
        {
            if !p.is_file() {
                return Err(bad(format!("file not found: {}", p.display())));
            }
        }
        Ok(())
    }

    /// Canonical JSON echo (output directory excluded).
    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.echo()).expect("config serializes");
        hex(&Sha256::digest(&bytes))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_mirror_the_benchmark() {
        let c = RunConfig::default();
        assert_eq!((c.array.rows, c.array.cols), (128, 128));
        assert_eq!(c.array.c_m, 1.2e-15);
        assert_eq!(c.device.v_dd, 0.45);
        assert_eq!(c.device.v_write, 1.5);
        c.validate().unwrap();
    }

    #[test]
    fn parses_sections() {
        let c = RunConfig::from_toml(
            r#"
            seed = 9
            [device]
            v_dd = 0.4
            r_off = "infinite"
            [variation]
            on_off_ratio = 1e5
            resistance_spread = "relative-std"
            [array]
            xnor_model = "divider"
            "#,
        )
        .unwrap();
        assert_eq!(c.seed, 9);
        assert!(c.device.r_off.is_infinite());
        assert_eq!(c.variation.on_off_ratio, OnOffRatio::Finite(1e5));
        assert_eq!(c.array.xnor_model, XnorModel::Divider);
    }

    #[test]
    fn rejects_unsafe_supply() {
        let c = RunConfig::from_toml("[device]\nv_dd = 1.6\n").unwrap();
        let e = c.validate().unwrap_err();
        assert!(e.to_string().contains("v_write"), "{e}");
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(RunConfig::from_toml("[device]\nvdd = 0.4\n").is_err());
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.output.dir = "elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        b.seed = 2;
        assert_ne!(a.hash(), b.hash());
    }
}
