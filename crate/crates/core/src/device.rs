//! FeFET and cell-capacitor behavioral models.
//!
//! The FeFET is a two-state nonvolatile switch. A gate pulse at or beyond
//! `±v_write` sets the polarization; a pulse within `±disturb_margin` leaves
//! it alone; anything in between is refused as a protocol error.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rng::{Domain, ElementKey, SeedTree};

/// Largest accepted normalized capacitor spread. Beyond this the
/// resample-on-non-positive truncation biases the mean by more than 1%.
pub const MAX_SIGMA_C: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeFetParams {
    /// Polarization switching threshold (V).
    pub v_write: f64,
    /// Compute rail (V). Must stay below `v_write`.
    pub v_dd: f64,
    /// Nominal on-state resistance (ohm).
    pub r_on_nominal: f64,
    /// Nominal off-state resistance (ohm). May be infinite.
    #[serde(with = "resistance_serde")]
    pub r_off_nominal: f64,
    /// Largest |V_GS| guaranteed not to disturb a stored state (V).
    pub disturb_margin: f64,
}

impl Default for FeFetParams {
    fn default() -> Self {
        Self::new(1.5, 0.45, 10e3, 1e6)
    }
}

impl FeFetParams {
    /// Parameters with the disturb margin at `v_write / 2`.
    pub fn new(v_write: f64, v_dd: f64, r_on_nominal: f64, r_off_nominal: f64) -> Self {
        Self {
            v_write,
            v_dd,
            r_on_nominal,
            r_off_nominal,
            disturb_margin: v_write / 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_dd > 0.0 && self.v_dd.is_finite()) {
            return Err(Error::config(format!(
                "v_dd must be positive, got {}",
                self.v_dd
            )));
        }
        if self.v_dd >= self.v_write {
            return Err(Error::config(format!(
                "v_dd ({} V) must be below v_write ({} V) to avoid read disturb",
                self.v_dd, self.v_write
            )));
        }
        if !(self.r_on_nominal > 0.0 && self.r_on_nominal.is_finite()) {
            return Err(Error::config(format!(
                "r_on must be positive and finite, got {}",
                self.r_on_nominal
            )));
        }
        if self.r_off_nominal <= self.r_on_nominal {
            return Err(Error::config(format!(
                "r_off ({}) must exceed r_on ({})",
                self.r_off_nominal, self.r_on_nominal
            )));
        }
        if !(self.disturb_margin > 0.0 && self.disturb_margin < self.v_write) {
            return Err(Error::config(format!(
                "disturb margin must lie in (0, v_write), got {}",
                self.disturb_margin
            )));
        }
        Ok(())
    }
}

/// `R_off / R_on`, or an ideal open switch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OnOffRatio {
    Finite(f64),
    Infinite,
}

impl OnOffRatio {
    pub fn off_resistance(&self, r_on: f64) -> f64 {
        match self {
            OnOffRatio::Finite(ratio) => ratio * r_on,
            OnOffRatio::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, OnOffRatio::Infinite)
    }
}

impl std::fmt::Display for OnOffRatio {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OnOffRatio::Finite(r) => write!(f, "{r}"),
            OnOffRatio::Infinite => f.write_str("infinite"),
        }
    }
}

impl std::str::FromStr for OnOffRatio {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("infinite") || t.eq_ignore_ascii_case("inf") {
            return Ok(OnOffRatio::Infinite);
        }
        t.parse::<f64>()
            .map(|v| {
                if v.is_infinite() {
                    OnOffRatio::Infinite
                } else {
                    OnOffRatio::Finite(v)
                }
            })
            .map_err(|_| Error::config(format!("cannot parse on/off ratio {s:?}")))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum NumberOrWord {
    Number(f64),
    Word(String),
}

impl Serialize for OnOffRatio {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            OnOffRatio::Finite(v) => s.serialize_f64(*v),
            OnOffRatio::Infinite => s.serialize_str("infinite"),
        }
    }
}

impl<'de> Deserialize<'de> for OnOffRatio {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match NumberOrWord::deserialize(d)? {
            NumberOrWord::Number(v) => Ok(OnOffRatio::Finite(v)),
            NumberOrWord::Word(w) => w.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Serializes an infinite resistance as the string `"infinite"`.
pub mod resistance_serde {
    use super::NumberOrWord;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("infinite")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match NumberOrWord::deserialize(d)? {
            NumberOrWord::Number(v) => Ok(v),
            NumberOrWord::Word(w) if w.eq_ignore_ascii_case("infinite") => Ok(f64::INFINITY),
            NumberOrWord::Word(w) => Err(serde::de::Error::custom(format!("bad resistance {w:?}"))),
        }
    }
}

/// How `sigma_r` maps onto the log-normal resistance distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResistanceSpread {
    /// `sigma_r` is the coefficient of variation of R itself:
    /// `R = R_nom * exp(s * g)` with `s = sqrt(ln(1 + sigma_r^2))`.
    RelativeStd,
    /// `sigma_r` is the normalized spread of `ln R` (R in ohms):
    /// `ln R ~ Normal(ln R_nom, (sigma_r * ln R_nom)^2)`.
    #[default]
    LogScaled,
}

impl ResistanceSpread {
    fn log_sigma(&self, sigma_r: f64, r_nominal: f64) -> f64 {
        match self {
            ResistanceSpread::RelativeStd => (1.0 + sigma_r * sigma_r).ln().sqrt(),
            ResistanceSpread::LogScaled => sigma_r * r_nominal.ln().abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariationSpec {
    /// Normalized std of the cell capacitor.
    pub sigma_c: f64,
    /// Normalized spread of the log-normal resistances.
    pub sigma_r: f64,
    pub on_off_ratio: OnOffRatio,
    #[serde(default)]
    pub resistance_spread: ResistanceSpread,
    pub seed: u64,
}

impl Default for VariationSpec {
    fn default() -> Self {
        Self {
            sigma_c: 0.05,
            sigma_r: 0.15,
            on_off_ratio: OnOffRatio::Infinite,
            resistance_spread: ResistanceSpread::default(),
            seed: 0,
        }
    }
}

impl VariationSpec {
    /// No variation at all, infinite on/off ratio.
    pub fn ideal(seed: u64) -> Self {
        Self {
            sigma_c: 0.0,
            sigma_r: 0.0,
            on_off_ratio: OnOffRatio::Infinite,
            resistance_spread: ResistanceSpread::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_c >= 0.0) {
            return Err(Error::config(format!(
                "sigma_c must be >= 0, got {}",
                self.sigma_c
            )));
        }
        if self.sigma_c >= MAX_SIGMA_C {
            return Err(Error::config(format!(
                "sigma_c = {} is too large; truncation at zero would dominate (limit {MAX_SIGMA_C})",
                self.sigma_c
            )));
        }
        if !(self.sigma_r >= 0.0 && self.sigma_r.is_finite()) {
            return Err(Error::config(format!(
                "sigma_r must be >= 0, got {}",
                self.sigma_r
            )));
        }
        if let OnOffRatio::Finite(r) = self.on_off_ratio {
            if !(r > 1.0 && r.is_finite()) {
                return Err(Error::config(format!(
                    "on/off ratio must exceed 1, got {r}"
                )));
            }
        }
        Ok(())
    }

    pub fn seed_tree(&self) -> SeedTree {
        SeedTree::new(self.seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeFetInstance {
    /// `true` = '1' (positive polarization, low V_TH, on).
    pub stored_bit: bool,
    pub r_on: f64,
    #[serde(with = "resistance_serde")]
    pub r_off: f64,
}

impl FeFetInstance {
    pub fn nominal(params: &FeFetParams, stored_bit: bool) -> Self {
        Self {
            stored_bit,
            r_on: params.r_on_nominal,
            r_off: params.r_off_nominal,
        }
    }

    /// Channel resistance in the present state.
    pub fn resistance(&self) -> f64 {
        if self.stored_bit {
            self.r_on
        } else {
            self.r_off
        }
    }

    /// Channel conductance; exactly zero for an infinite off resistance.
    pub fn conductance(&self) -> f64 {
        1.0 / self.resistance()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacitorInstance {
    pub c_nominal: f64,
    pub c_sampled: f64,
}

impl CapacitorInstance {
    pub fn nominal(c: f64) -> Self {
        Self {
            c_nominal: c,
            c_sampled: c,
        }
    }
}

fn check_capacitor_inputs(c_nominal: f64, spec: &VariationSpec) -> Result<()> {
    if !(spec.sigma_c >= 0.0) || spec.sigma_c >= MAX_SIGMA_C {
        return Err(Error::config(format!(
            "sigma_c must lie in [0, {MAX_SIGMA_C}), got {}",
            spec.sigma_c
        )));
    }
    if !(c_nominal > 0.0 && c_nominal.is_finite()) {
        return Err(Error::config(format!(
            "c_nominal must be positive, got {c_nominal}"
        )));
    }
    Ok(())
}

/// Draws a capacitor from `Normal(c_nominal, (sigma_c * c_nominal)^2)`,
/// resampling non-positive values.
pub fn sample_capacitor<R: Rng + ?Sized>(
    c_nominal: f64,
    spec: &VariationSpec,
    stream: &mut R,
) -> Result<CapacitorInstance> {
    check_capacitor_inputs(c_nominal, spec)?;
    if spec.sigma_c == 0.0 {
        return Ok(CapacitorInstance::nominal(c_nominal));
    }
    loop {
        let z: f64 = stream.sample(StandardNormal);
        let c = c_nominal * (1.0 + spec.sigma_c * z);
        if c > 0.0 {
            return Ok(CapacitorInstance {
                c_nominal,
                c_sampled: c,
            });
        }
    }
}

/// Draws the on/off resistances of one transistor.
///
/// A finite `spec.on_off_ratio` replaces `params.r_off_nominal`; an infinite
/// one yields an open off-state.
pub fn sample_fefet<R: Rng + ?Sized>(
    params: &FeFetParams,
    spec: &VariationSpec,
    stream: &mut R,
    initial_bit: bool,
) -> Result<FeFetInstance> {
    params.validate()?;
    let r_on_nom = params.r_on_nominal;
    let r_off_nom = spec.on_off_ratio.off_resistance(r_on_nom);
    // Draw both normals unconditionally so the stream layout is fixed.
    let g1: f64 = stream.sample(StandardNormal);
    let g2: f64 = stream.sample(StandardNormal);
    let spread = spec.resistance_spread;
    let r_on = r_on_nom * (g1 * spread.log_sigma(spec.sigma_r, r_on_nom)).exp();
    let r_off = if r_off_nom.is_infinite() {
        f64::INFINITY
    } else {
        r_off_nom * (g2 * spread.log_sigma(spec.sigma_r, r_off_nom)).exp()
    };
    Ok(FeFetInstance {
        stored_bit: initial_bit,
        r_on,
        r_off,
    })
}

/// Addressed variants of the samplers: one stream per element.
pub fn sample_capacitor_at(
    c_nominal: f64,
    spec: &VariationSpec,
    tree: &SeedTree,
    key: ElementKey,
) -> Result<CapacitorInstance> {
    if spec.sigma_c == 0.0 {
        check_capacitor_inputs(c_nominal, spec)?;
        return Ok(CapacitorInstance::nominal(c_nominal));
    }
    sample_capacitor(c_nominal, spec, &mut tree.stream(Domain::Capacitor, key))
}

pub fn sample_fefet_at(
    params: &FeFetParams,
    spec: &VariationSpec,
    tree: &SeedTree,
    domain: Domain,
    key: ElementKey,
    initial_bit: bool,
) -> Result<FeFetInstance> {
    sample_fefet(params, spec, &mut tree.stream(domain, key), initial_bit)
}

/// Applies one gate pulse.
///
/// `v_gs >= v_write` writes '1', `v_gs <= -v_write` writes '0', and
/// `|v_gs| <= disturb_margin` is a no-op. The band in between is refused.
pub fn apply_gate_pulse(
    fefet: FeFetInstance,
    v_gs: f64,
    params: &FeFetParams,
) -> Result<FeFetInstance> {
    if v_gs >= params.v_write {
        Ok(FeFetInstance {
            stored_bit: true,
            ..fefet
        })
    } else if v_gs <= -params.v_write {
        Ok(FeFetInstance {
            stored_bit: false,
            ..fefet
        })
    } else if v_gs.abs() <= params.disturb_margin {
        Ok(fefet)
    } else {
        Err(Error::DisturbRisk { v_gs })
    }
}
