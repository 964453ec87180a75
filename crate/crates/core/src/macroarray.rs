//! The R x C charge-domain MAC macro.
//!
//! Inputs bind to rows and each column accumulates on its own source line
//! (ScL). A MAC runs in two phases: every capacitor is discharged with ScL
//! floating at GND, then each row's input rails are applied and node X of
//! every cell moves to its XNOR level. Charge conservation on the floating
//! ScL gives
//!
//! ```text
//! V_ScL = sum_i(V_Xi * C_i) / (sum_i(C_i) + C_par)
//! ```

use serde::{Deserialize, Serialize};

use crate::bits::BitMatrix;
use crate::cell::{
    apply_write_phase, bitline_rails, Cell2T1C, InputBitPair, WritePhaseVoltages, XnorModel,
};
use crate::device::{
    sample_capacitor_at, sample_fefet_at, CapacitorInstance, FeFetInstance, FeFetParams,
    VariationSpec,
};
use crate::error::{Device, Error, Result};
use crate::rng::{Domain, ElementKey};

/// Default macro geometry.
pub const DEFAULT_ROWS: usize = 128;
pub const DEFAULT_COLS: usize = 128;

#[derive(Debug, Clone, PartialEq)]
pub struct MacroArray {
    rows: usize,
    cols: usize,
    cells: Vec<Cell2T1C>,
    params: FeFetParams,
    c_parasitic: f64,
}

impl MacroArray {
    /// Nominal devices and capacitors, every cell storing '0'.
    pub fn new(rows: usize, cols: usize, params: FeFetParams, c_nominal: f64) -> Self {
        let cell = Cell2T1C::nominal(&params, c_nominal, false);
        Self {
            rows,
            cols,
            cells: vec![cell; rows * cols],
            params,
            c_parasitic: 0.0,
        }
    }

    /// Variation-sampled devices and capacitors, every cell storing '0'.
    ///
    /// Element `(r, c)` draws from the streams keyed by
    /// `(spec.seed, group, r, c, trial)`.
    pub fn sampled(
        rows: usize,
        cols: usize,
        params: FeFetParams,
        c_nominal: f64,
        spec: &VariationSpec,
        group: u64,
        trial: u64,
    ) -> Result<Self> {
        let mut a = Self::new(rows, cols, params, c_nominal);
        a.resample_in_place(spec, group, trial, c_nominal)?;
        Ok(a)
    }

    /// Builds an array from explicit cells, checking complementarity.
    pub fn from_cells(
        rows: usize,
        cols: usize,
        cells: Vec<Cell2T1C>,
        params: FeFetParams,
    ) -> Result<Self> {
        if cells.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                what: "cell grid",
                expected: rows * cols,
                found: cells.len(),
            });
        }
        if cells.iter().any(|c| !c.is_complementary()) {
            return Err(Error::InvalidCell);
        }
        Ok(Self {
            rows,
            cols,
            cells,
            params,
            c_parasitic: 0.0,
        })
    }

    pub fn with_parasitic(mut self, c_parasitic: f64) -> Self {
        self.c_parasitic = c_parasitic;
        self
    }

    /// Same stored bits, freshly sampled devices and capacitors.
    pub fn resample(&self, spec: &VariationSpec, group: u64, trial: u64) -> Result<Self> {
        let mut a = self.clone();
        let c_nominal = self.cells.first().map(|c| c.cap.c_nominal).unwrap_or(0.0);
        a.resample_in_place(spec, group, trial, c_nominal)?;
        Ok(a)
    }

    fn resample_in_place(
        &mut self,
        spec: &VariationSpec,
        group: u64,
        trial: u64,
        c_nominal: f64,
    ) -> Result<()> {
        spec.validate()?;
        let tree = spec.seed_tree();
        let params = self.params;
        for r in 0..self.rows {
            for c in 0..self.cols {
                let key = ElementKey::cell(r, c).with_group(group).with_trial(trial);
                let cell = &mut self.cells[r * self.cols + c];
                let w = cell.weight();
                let cap = sample_capacitor_at(c_nominal, spec, &tree, key)?;
                let m1 = sample_fefet_at(&params, spec, &tree, Domain::FeFetM1, key, w)?;
                let m2 = sample_fefet_at(&params, spec, &tree, Domain::FeFetM2, key, !w)?;
                *cell = Cell2T1C::new(m1, m2, cap);
            }
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn params(&self) -> &FeFetParams {
        &self.params
    }

    pub fn c_parasitic(&self) -> f64 {
        self.c_parasitic
    }

    pub fn cell(&self, row: usize, col: usize) -> &Cell2T1C {
        &self.cells[row * self.cols + col]
    }

    pub fn cells(&self) -> &[Cell2T1C] {
        &self.cells
    }

    /// Stored weights (M1 bits).
    pub fn read_back(&self) -> BitMatrix {
        BitMatrix::from_fn(self.rows, self.cols, |r, c| self.cell(r, c).weight())
    }

    /// Programs `weights` row by row with half-selected idle rows.
    pub fn program(&self, weights: &BitMatrix) -> Result<(MacroArray, WriteAudit)> {
        self.program_with(weights, |_, _, _| {})
    }

    /// Like [`program`](Self::program), but lets `hook` edit each planned
    /// phase before it is applied. Used to inject faulty schedules.
    pub fn program_with(
        &self,
        weights: &BitMatrix,
        mut hook: impl FnMut(usize, usize, &mut ArrayPhase),
    ) -> Result<(MacroArray, WriteAudit)> {
        if weights.rows() != self.rows || weights.cols() != self.cols {
            return Err(Error::DimensionMismatch {
                what: "weight matrix",
                expected: self.rows * self.cols,
                found: weights.rows() * weights.cols(),
            });
        }
        let mut array = self.clone();
        let mut audit = WriteAudit::default();
        for row in 0..self.rows {
            let mut phases = plan_row_write(weights, row, &self.params);
            for (p, phase) in phases.iter_mut().enumerate() {
                hook(row, p, phase);
                array.apply_phase(phase, p, &mut audit)?;
                audit.trace.push(PhaseRecord::summarize(row, p, phase));
            }
            if let Some(c) = array.cells.iter().find(|c| !c.is_complementary()) {
                return Err(Error::ComplementarityViolation(c.m1.stored_bit as u8));
            }
        }
        Ok((array, audit))
    }

    fn apply_phase(
        &mut self,
        phase: &ArrayPhase,
        phase_index: usize,
        audit: &mut WriteAudit,
    ) -> Result<()> {
        let params = self.params;
        for r in 0..self.rows {
            for c in 0..self.cols {
                let v = phase.cell_view(r, c);
                audit.record(v.v_gs(Device::M1).abs(), &params);
                audit.record(v.v_gs(Device::M2).abs(), &params);
                let idx = r * self.cols + c;
                self.cells[idx] = apply_write_phase(self.cells[idx], &v, phase_index, &params)
                    .map_err(|(device, phase, v_gs)| Error::WriteDisturb {
                        row: r,
                        col: c,
                        phase,
                        device,
                        v_gs,
                    })?;
            }
        }
        Ok(())
    }

    /// Evaluates every column using the cells' own capacitors.
    pub fn mac_evaluate(&self, stimulus: &MacStimulus, model: XnorModel) -> Result<MacResult> {
        self.check_stimulus(stimulus)?;
        Ok(self.evaluate(stimulus, model, |i| self.cells[i].cap.c_sampled, None, None))
    }

    /// Evaluates with an explicit row-major capacitor grid.
    pub fn mac_evaluate_with_caps(
        &self,
        stimulus: &MacStimulus,
        model: XnorModel,
        caps: &[CapacitorInstance],
    ) -> Result<MacResult> {
        self.check_stimulus(stimulus)?;
        if caps.len() != self.cells.len() {
            return Err(Error::DimensionMismatch {
                what: "capacitor grid",
                expected: self.cells.len(),
                found: caps.len(),
            });
        }
        Ok(self.evaluate(stimulus, model, |i| caps[i].c_sampled, None, None))
    }

    fn check_stimulus(&self, stimulus: &MacStimulus) -> Result<()> {
        if stimulus.inputs.len() != self.rows {
            return Err(Error::DimensionMismatch {
                what: "stimulus",
                expected: self.rows,
                found: stimulus.inputs.len(),
            });
        }
        if self.cells.iter().any(|c| !c.is_complementary()) {
            return Err(Error::InvalidCell);
        }
        Ok(())
    }

    fn evaluate(
        &self,
        stimulus: &MacStimulus,
        model: XnorModel,
        cap: impl Fn(usize) -> f64,
        row_active: Option<&[bool]>,
        col_active: Option<&[bool]>,
    ) -> MacResult {
        self.compile_with(model, cap)
            .run(stimulus, row_active, col_active)
    }

    /// Flattens the array into an evaluation-only form for repeated MACs.
    pub fn compile(&self, model: XnorModel) -> CompiledArray {
        self.compile_with(model, |i| self.cells[i].cap.c_sampled)
    }

    fn compile_with(&self, model: XnorModel, cap: impl Fn(usize) -> f64) -> CompiledArray {
        // Capacitances are kept in units of the nominal capacitor so that a
        // nominal ideal column yields exactly VDD * M / R.
        let c_ref = self.cells.first().map_or(1.0, |c| c.cap.c_nominal);
        let ci: Vec<f64> = (0..self.cells.len()).map(|i| cap(i) / c_ref).collect();
        let mut c_total = vec![0.0; self.cols];
        for r in 0..self.rows {
            for (c, t) in c_total.iter_mut().enumerate() {
                *t += ci[r * self.cols + c];
            }
        }
        let conductance = match model {
            XnorModel::Ideal => Vec::new(),
            XnorModel::Divider => self
                .cells
                .iter()
                .map(|c| (c.m1.conductance(), c.m2.conductance()))
                .collect(),
        };
        CompiledArray {
            rows: self.rows,
            cols: self.cols,
            v_dd: self.params.v_dd,
            c_parasitic: self.c_parasitic / c_ref,
            model,
            weights: self.cells.iter().map(Cell2T1C::weight).collect(),
            ci,
            c_total,
            conductance,
        }
    }

    /// Serializable dump of stored weights and device parameters.
    pub fn dump(&self) -> ArrayDump {
        ArrayDump {
            rows: self.rows,
            cols: self.cols,
            weights: self
                .read_back()
                .as_slice()
                .iter()
                .map(|&b| b as u8)
                .collect(),
            params: self.params,
            c_m: self.cells.first().map(|c| c.cap.c_nominal).unwrap_or(0.0),
            c_parasitic: self.c_parasitic,
        }
    }
}

/// Evaluation-only snapshot of a [`MacroArray`]: stored bits, normalized
/// capacitances and (for the divider model) conductances.
///
/// Inactive rows keep loading ScL through their capacitors but contribute no
/// charge; inactive columns are skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledArray {
    rows: usize,
    cols: usize,
    v_dd: f64,
    c_parasitic: f64,
    model: XnorModel,
    weights: Vec<bool>,
    ci: Vec<f64>,
    c_total: Vec<f64>,
    conductance: Vec<(f64, f64)>,
}

impl CompiledArray {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn evaluate(
        &self,
        stimulus: &MacStimulus,
        row_active: Option<&[bool]>,
        col_active: Option<&[bool]>,
    ) -> Result<MacResult> {
        if stimulus.inputs.len() != self.rows {
            return Err(Error::DimensionMismatch {
                what: "stimulus",
                expected: self.rows,
                found: stimulus.inputs.len(),
            });
        }
        for (mask, n) in [(row_active, self.rows), (col_active, self.cols)] {
            if mask.is_some_and(|m| m.len() != n) {
                return Err(Error::DimensionMismatch {
                    what: "activity mask",
                    expected: n,
                    found: mask.map_or(0, <[bool]>::len),
                });
            }
        }
        Ok(self.run(stimulus, row_active, col_active))
    }

    fn run(
        &self,
        stimulus: &MacStimulus,
        row_active: Option<&[bool]>,
        col_active: Option<&[bool]>,
    ) -> MacResult {
        let (cols, v_dd) = (self.cols, self.v_dd);
        let active_cols: Vec<usize> = (0..cols)
            .filter(|&c| col_active.is_none_or(|a| a[c]))
            .collect();
        let mut q = vec![0.0; cols];
        let mut matches = vec![0usize; cols];
        for r in 0..self.rows {
            if row_active.is_some_and(|a| !a[r]) {
                continue;
            }
            let input = &stimulus.inputs[r];
            let base = r * cols;
            for &c in &active_cols {
                let idx = base + c;
                let w = self.weights[idx];
                let x = match self.model {
                    XnorModel::Ideal => {
                        if w {
                            input.v_true
                        } else {
                            input.v_comp
                        }
                    }
                    XnorModel::Divider => {
                        let (g1, g2) = self.conductance[idx];
                        (g1 * input.v_true + g2 * input.v_comp) / (g1 + g2)
                    }
                };
                q[c] += x / v_dd * self.ci[idx];
                matches[c] += (w == input.value) as usize;
            }
        }
        let mut out = MacResult::default();
        for c in active_cols {
            let v = v_dd * (q[c] / (self.c_total[c] + self.c_parasitic));
            out.columns.push(c);
            out.v_scl.push(v.clamp(0.0, v_dd));
            out.match_counts.push(matches[c]);
            out.p_one.push(matches[c] as f64 / self.rows as f64);
        }
        out
    }
}

/// Per-row input rails for one MAC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacStimulus {
    pub inputs: Vec<InputBitPair>,
}

impl MacStimulus {
    pub fn from_bits(bits: &[bool], v_dd: f64) -> Self {
        Self {
            inputs: bits.iter().map(|&b| InputBitPair::new(b, v_dd)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MacResult {
    /// Column index of each entry (masked columns are omitted).
    pub columns: Vec<usize>,
    pub v_scl: Vec<f64>,
    /// Cells whose XNOR output is '1' (M).
    pub match_counts: Vec<usize>,
    /// `M / R`.
    pub p_one: Vec<f64>,
}

/// Rails applied to the whole array during one write phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayPhase {
    pub v_scl: f64,
    pub wl: Vec<f64>,
    pub wlb: Vec<f64>,
    pub bl: Vec<f64>,
    pub blb: Vec<f64>,
}

impl ArrayPhase {
    pub fn cell_view(&self, row: usize, col: usize) -> WritePhaseVoltages {
        WritePhaseVoltages {
            v_scl: self.v_scl,
            v_bl: self.bl[col],
            v_blb: self.blb[col],
            v_wl: self.wl[row],
            v_wlb: self.wlb[row],
        }
    }
}

/// Two-phase array schedule writing row `row` of `weights`.
///
/// Bitlines carry the selected row's weights for both phases. The selected
/// row's wordlines go GND then `v_write`; every other row holds its
/// wordlines at `v_write / 2`.
pub fn plan_row_write(weights: &BitMatrix, row: usize, params: &FeFetParams) -> [ArrayPhase; 2] {
    let (bl, blb): (Vec<f64>, Vec<f64>) = weights
        .row(row)
        .iter()
        .map(|&w| bitline_rails(w, params))
        .unzip();
    let half = params.v_write / 2.0;
    let wordlines = |selected: f64| -> Vec<f64> {
        (0..weights.rows())
            .map(|r| if r == row { selected } else { half })
            .collect()
    };
    let phase = |selected: f64| ArrayPhase {
        v_scl: 0.0,
        wl: wordlines(selected),
        wlb: wordlines(selected),
        bl: bl.clone(),
        blb: blb.clone(),
    };
    [phase(0.0), phase(params.v_write)]
}

/// Histogram of |V_GS| seen by every device during programming.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WriteAudit {
    /// `(|V_GS|, count)`, in first-seen order.
    pub histogram: Vec<(f64, u64)>,
    /// Pulses inside `(disturb_margin, v_write)`.
    pub forbidden: u64,
    pub pulses: u64,
    pub trace: Vec<PhaseRecord>,
}

impl WriteAudit {
    #[inline]
    fn record(&mut self, magnitude: f64, params: &FeFetParams) {
        self.pulses += 1;
        if magnitude > params.disturb_margin && magnitude < params.v_write {
            self.forbidden += 1;
        }
        match self.histogram.iter_mut().find(|(m, _)| *m == magnitude) {
            Some((_, n)) => *n += 1,
            None => self.histogram.push((magnitude, 1)),
        }
    }

    pub fn merge(&mut self, other: &WriteAudit) {
        self.pulses += other.pulses;
        self.forbidden += other.forbidden;
        for &(m, n) in &other.histogram {
            match self.histogram.iter_mut().find(|(x, _)| *x == m) {
                Some((_, k)) => *k += n,
                None => self.histogram.push((m, n)),
            }
        }
    }

    /// Histogram sorted by magnitude.
    pub fn sorted_histogram(&self) -> Vec<(f64, u64)> {
        let mut h = self.histogram.clone();
        h.sort_by(|a, b| a.0.total_cmp(&b.0));
        h
    }
}

/// One line of the programming trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub row: usize,
    pub phase: usize,
    pub v_wl_selected: f64,
    pub v_wlb_selected: f64,
    /// Columns whose BL is high.
    pub bl_high: usize,
    pub max_abs_vgs: f64,
}

impl PhaseRecord {
    fn summarize(row: usize, phase: usize, p: &ArrayPhase) -> Self {
        let mut max = 0.0f64;
        for (&wl, &wlb) in p.wl.iter().zip(&p.wlb) {
            for (&bl, &blb) in p.bl.iter().zip(&p.blb) {
                max = max.max((bl - wl).abs()).max((blb - wlb).abs());
            }
        }
        Self {
            row,
            phase,
            v_wl_selected: p.wl[row],
            v_wlb_selected: p.wlb[row],
            bl_high: p.bl.iter().filter(|&&v| v > 0.0).count(),
            max_abs_vgs: max,
        }
    }
}

/// A masked view of an array: inactive rows are driven to GND on both input
/// lines (their capacitors still load ScL), inactive columns are skipped.
#[derive(Debug, Clone)]
pub struct ArrayView<'a> {
    array: &'a MacroArray,
    row_active: Vec<bool>,
    col_active: Vec<bool>,
}

/// Deactivates the listed rows and columns.
pub fn deactivate<'a>(
    array: &'a MacroArray,
    rows: &[usize],
    cols: &[usize],
) -> Result<ArrayView<'a>> {
    let mut row_active = vec![true; array.rows];
    let mut col_active = vec![true; array.cols];
    for &r in rows {
        *row_active
            .get_mut(r)
            .ok_or_else(|| Error::domain(format!("row {r} out of range 0..{}", array.rows)))? =
            false;
    }
    for &c in cols {
        *col_active
            .get_mut(c)
            .ok_or_else(|| Error::domain(format!("column {c} out of range 0..{}", array.cols)))? =
            false;
    }
    Ok(ArrayView {
        array,
        row_active,
        col_active,
    })
}

impl ArrayView<'_> {
    pub fn mac_evaluate(&self, stimulus: &MacStimulus, model: XnorModel) -> Result<MacResult> {
        self.array.check_stimulus(stimulus)?;
        Ok(self.array.evaluate(
            stimulus,
            model,
            |i| self.array.cells[i].cap.c_sampled,
            Some(&self.row_active),
            Some(&self.col_active),
        ))
    }

    pub fn row_active(&self) -> &[bool] {
        &self.row_active
    }

    pub fn col_active(&self) -> &[bool] {
        &self.col_active
    }
}

/// Charge pulled from the supply during a MAC, as a capacitance:
/// `M * (N - M) * c_m / N`.
pub fn equivalent_capacitance(m: usize, n: usize, c_m: f64) -> Result<f64> {
    if n == 0 || m > n {
        return Err(Error::domain(format!(
            "need 0 <= M <= N and N > 0, got M={m}, N={n}"
        )));
    }
    Ok((m * (n - m)) as f64 * c_m / n as f64)
}

/// Sign comparison with ties resolved to +1.
pub fn quantize(v_scl: f64, v_ref: f64) -> i8 {
    if v_scl >= v_ref {
        1
    } else {
        -1
    }
}

/// Reference voltage for the bipolar condition `2M - N > alpha`:
/// `VDD * (N + alpha) / (2N)`.
pub fn threshold_to_vref(alpha: f64, n: usize, v_dd: f64) -> Result<f64> {
    let nf = n as f64;
    if n == 0 || !(alpha >= -nf && alpha <= nf) {
        return Err(Error::domain(format!(
            "alpha = {alpha} outside [-{n}, {n}]"
        )));
    }
    Ok(v_dd * (nf + alpha) / (2.0 * nf))
}

/// JSON form of a programmed array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayDump {
    pub rows: usize,
    pub cols: usize,
    /// Row-major, one 0/1 entry per cell.
    pub weights: Vec<u8>,
    pub params: FeFetParams,
    #[serde(default)]
    pub c_m: f64,
    #[serde(default)]
    pub c_parasitic: f64,
}

impl ArrayDump {
    pub fn weight_matrix(&self) -> Result<BitMatrix> {
        if let Some(bad) = self.weights.iter().position(|&w| w > 1) {
            return Err(Error::domain(format!("weight entry {bad} is not 0 or 1")));
        }
        BitMatrix::from_vec(
            self.rows,
            self.cols,
            self.weights.iter().map(|&w| w == 1).collect(),
        )
    }

    /// Rebuilds a nominal array holding the dumped weights.
    pub fn to_array(&self) -> Result<MacroArray> {
        self.params.validate()?;
        let w = self.weight_matrix()?;
        let cells = (0..self.rows * self.cols)
            .map(|i| Cell2T1C::nominal(&self.params, self.c_m, w.as_slice()[i]))
            .collect();
        Ok(
            MacroArray::from_cells(self.rows, self.cols, cells, self.params)?
                .with_parasitic(self.c_parasitic),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// One column of `n` cells all storing '1', with the first `m` inputs at
/// '1' so exactly `m` cells match. Devices are nominal.
pub fn single_column(
    n: usize,
    m: usize,
    params: FeFetParams,
    c_nominal: f64,
) -> (MacroArray, MacStimulus) {
    let cells = vec![Cell2T1C::nominal(&params, c_nominal, true); n];
    let array = MacroArray {
        rows: n,
        cols: 1,
        cells,
        params,
        c_parasitic: 0.0,
    };
    let bits: Vec<bool> = (0..n).map(|i| i < m).collect();
    (array, MacStimulus::from_bits(&bits, params.v_dd))
}

/// Helper for Monte Carlo loops: cells holding '1' with sampled devices.
pub(crate) fn sampled_ones_column(
    n: usize,
    params: &FeFetParams,
    c_nominal: f64,
    spec: &VariationSpec,
    trial: u64,
    with_devices: bool,
) -> Result<Vec<Cell2T1C>> {
    let tree = spec.seed_tree();
    (0..n)
        .map(|r| {
            let key = ElementKey::cell(r, 0).with_trial(trial);
            let cap = sample_capacitor_at(c_nominal, spec, &tree, key)?;
            let (m1, m2) = if with_devices {
                (
                    sample_fefet_at(params, spec, &tree, Domain::FeFetM1, key, true)?,
                    sample_fefet_at(params, spec, &tree, Domain::FeFetM2, key, false)?,
                )
            } else {
                let r_off = spec.on_off_ratio.off_resistance(params.r_on_nominal);
                let f = |b| FeFetInstance {
                    stored_bit: b,
                    r_on: params.r_on_nominal,
                    r_off,
                };
                (f(true), f(false))
            };
            Ok(Cell2T1C::new(m1, m2, cap))
        })
        .collect()
}
