//! Level-shifted composition of 2-bit quantizer blocks.
//!
//! Each block sees the analog input offset by a multiple of `delta_v`
//! and runs with its own reference voltage; the concatenated block codes
//! form the raw quantizer output. Quantization levels are defined
//! operationally: consecutive runs of identical raw codes in a sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{settle, SettleOptions};
use crate::error::{Error, Result};
use crate::metrics;
use crate::network::{CodeWord, NetworkSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftSign {
    Add,
    Subtract,
}

/// The level-shifted multi-block quantizer stage.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerArraySpec {
    pub n_blocks: usize,
    /// Shift between successive blocks, volts (nonnegative).
    pub delta_v: f64,
    pub shift_sign: ShiftSign,
    pub block_template: NetworkSpec,
    /// Per-block reference voltages overriding the template's.
    pub v_refs: Vec<f64>,
    /// (low, high) input range; quantize clamps outside it.
    pub v_in_range: (f64, f64),
}

impl QuantizerArraySpec {
    pub fn new(
        n_blocks: usize,
        delta_v: f64,
        shift_sign: ShiftSign,
        block_template: NetworkSpec,
        v_in_range: (f64, f64),
    ) -> Result<Self> {
        if n_blocks == 0 {
            return Err(Error::Parameter("n_blocks must be at least 1".into()));
        }
        if !(delta_v >= 0.0) {
            return Err(Error::Parameter(format!(
                "delta_v must be nonnegative, got {delta_v}"
            )));
        }
        if !(v_in_range.0 < v_in_range.1) {
            return Err(Error::Parameter(format!(
                "v_in_range low {} must be below high {}",
                v_in_range.0, v_in_range.1
            )));
        }
        block_template.validate()?;
        let v_refs = vec![block_template.v_ref; n_blocks];
        Ok(QuantizerArraySpec {
            n_blocks,
            delta_v,
            shift_sign,
            block_template,
            v_refs,
            v_in_range,
        })
    }

    pub fn with_v_refs(mut self, v_refs: Vec<f64>) -> Result<Self> {
        if v_refs.len() != self.n_blocks {
            return Err(Error::Parameter(format!(
                "expected {} reference voltages, got {}",
                self.n_blocks,
                v_refs.len()
            )));
        }
        self.v_refs = v_refs;
        Ok(self)
    }

    /// Block k: the template with its reference voltage overridden.
    pub fn block_spec(&self, k: usize) -> Result<NetworkSpec> {
        if k >= self.n_blocks {
            return Err(Error::Parameter(format!(
                "block index {k} out of range for {} blocks",
                self.n_blocks
            )));
        }
        Ok(self.block_template.clone().with_v_ref(self.v_refs[k]))
    }

    pub fn bits_per_block(&self) -> usize {
        self.block_template.n_bits
    }

    pub fn raw_width(&self) -> usize {
        self.n_blocks * self.bits_per_block()
    }
}

/// Input voltage seen by one block.
pub fn shifted_input(v_in: f64, block_index: usize, spec: &QuantizerArraySpec) -> Result<f64> {
    if block_index >= spec.n_blocks {
        return Err(Error::Parameter(format!(
            "block index {block_index} out of range for {} blocks",
            spec.n_blocks
        )));
    }
    let shift = block_index as f64 * spec.delta_v;
    Ok(match spec.shift_sign {
        ShiftSign::Add => v_in + shift,
        ShiftSign::Subtract => v_in - shift,
    })
}

/// Concatenated block codes, block-major (block 0's LSB pair first).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RawCode {
    bits: Vec<u8>,
}

impl RawCode {
    pub fn from_block_codes(codes: &[CodeWord]) -> Self {
        let bits = codes
            .iter()
            .flat_map(|c| c.bits().iter().copied())
            .collect();
        RawCode { bits }
    }

    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::Parameter("raw bits must be 0 or 1".into()));
        }
        Ok(RawCode { bits })
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Bit string in array order (block 0 LSB first), for CSV output.
    pub fn bit_string(&self) -> String {
        self.bits.iter().map(|b| char::from(b'0' + b)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Quantized {
    pub raw: RawCode,
    /// True when v_in fell outside the array's input range and was clamped.
    pub clamped: bool,
}

/// Settle every block on its shifted input and concatenate the codes.
pub fn quantize(spec: &QuantizerArraySpec, v_in: f64, opts: &SettleOptions) -> Result<Quantized> {
    let (lo, hi) = spec.v_in_range;
    let clamped = v_in < lo || v_in > hi;
    let v = v_in.clamp(lo, hi);
    let mut codes = Vec::with_capacity(spec.n_blocks);
    for k in 0..spec.n_blocks {
        let block = spec.block_spec(k)?;
        let shifted = shifted_input(v, k, spec)?;
        let result = settle(&block, shifted, opts)?;
        codes.push(result.code);
    }
    Ok(Quantized {
        raw: RawCode::from_block_codes(&codes),
        clamped,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferRow {
    pub v_in: f64,
    pub raw: RawCode,
    /// Rank of the raw-code run this row belongs to, in sweep order.
    pub level: usize,
}

/// Swept transfer characteristic with the operational level column.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferTable {
    pub rows: Vec<TransferRow>,
}

impl TransferTable {
    /// Assign run-rank levels to a sequence of (v_in, raw) pairs. The
    /// inputs must be strictly increasing.
    pub fn from_codes(points: Vec<(f64, RawCode)>) -> Self {
        let mut rows: Vec<TransferRow> = Vec::with_capacity(points.len());
        for (v_in, raw) in points {
            debug_assert!(
                rows.last().is_none_or(|prev| prev.v_in < v_in),
                "sweep inputs must be strictly increasing"
            );
            let level = match rows.last() {
                None => 0,
                Some(prev) if prev.raw == raw => prev.level,
                Some(prev) => prev.level + 1,
            };
            rows.push(TransferRow { v_in, raw, level });
        }
        TransferTable { rows }
    }

    pub fn n_levels(&self) -> usize {
        self.rows.last().map_or(0, |r| r.level + 1)
    }

    pub fn distinct_codes(&self) -> usize {
        let mut seen: Vec<&RawCode> = Vec::new();
        for row in &self.rows {
            if !seen.contains(&&row.raw) {
                seen.push(&row.raw);
            }
        }
        seen.len()
    }

    /// Number of rows that revisit a raw code from an earlier, closed run.
    pub fn non_monotonicity_count(&self) -> usize {
        let mut count = 0;
        let mut closed: Vec<&RawCode> = Vec::new();
        let mut prev: Option<&RawCode> = None;
        for row in &self.rows {
            if prev != Some(&row.raw) {
                if closed.contains(&&row.raw) {
                    count += 1;
                }
                if let Some(p) = prev {
                    if !closed.contains(&p) {
                        closed.push(p);
                    }
                }
            } else if closed.contains(&&row.raw) {
                count += 1;
            }
            prev = Some(&row.raw);
        }
        count
    }

    /// True when every raw code occupies exactly one contiguous run.
    pub fn is_monotone(&self) -> bool {
        self.non_monotonicity_count() == 0
    }
}

fn uniform_grid(v_lo: f64, v_hi: f64, n_points: usize) -> Vec<f64> {
    (0..n_points)
        .map(|k| v_lo + (v_hi - v_lo) * k as f64 / (n_points - 1) as f64)
        .collect()
}

/// One block's codes over a voltage grid (zero-state reset per point).
fn block_column(
    block: &NetworkSpec,
    spec: &QuantizerArraySpec,
    block_index: usize,
    grid: &[f64],
    opts: &SettleOptions,
) -> Result<Vec<CodeWord>> {
    let point_opts = SettleOptions {
        reset_policy: crate::dynamics::ResetPolicy::ZeroState,
        record_energy: false,
        ..*opts
    };
    grid.par_iter()
        .map(|&v| {
            let shifted = shifted_input(v, block_index, spec)?;
            Ok(settle(block, shifted, &point_opts)?.code)
        })
        .collect()
}

fn compose_table(grid: &[f64], columns: &[Vec<CodeWord>]) -> TransferTable {
    let points = grid
        .iter()
        .enumerate()
        .map(|(p, &v)| {
            let codes: Vec<CodeWord> = columns.iter().map(|col| col[p].clone()).collect();
            (v, RawCode::from_block_codes(&codes))
        })
        .collect();
    TransferTable::from_codes(points)
}

/// Swept transfer table on a uniform inclusive grid.
pub fn sweep(
    spec: &QuantizerArraySpec,
    v_lo: f64,
    v_hi: f64,
    n_points: usize,
    opts: &SettleOptions,
) -> Result<TransferTable> {
    if n_points < 2 {
        return Err(Error::Parameter("sweep needs at least 2 points".into()));
    }
    if !(v_lo < v_hi) {
        return Err(Error::Parameter(format!(
            "sweep bounds must satisfy v_lo < v_hi, got [{v_lo}, {v_hi}]"
        )));
    }
    let grid = uniform_grid(v_lo, v_hi, n_points);
    let mut columns = Vec::with_capacity(spec.n_blocks);
    for k in 0..spec.n_blocks {
        let block = spec.block_spec(k)?;
        columns.push(block_column(&block, spec, k, &grid, opts)?);
    }
    Ok(compose_table(&grid, &columns))
}

/// Internal sweep resolution used while searching reference voltages.
const CALIBRATION_POINTS: usize = 256;

#[derive(Debug, Clone)]
pub struct CalibrationOutcome {
    pub v_refs: Vec<f64>,
    pub max_abs_inl: f64,
    pub levels: usize,
    pub non_monotonicity: usize,
    pub table: TransferTable,
}

/// Lexicographic objective: revisit count, missing levels, then INL.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Objective {
    non_mono: usize,
    level_deficit: usize,
    max_inl: f64,
    abs_vref_sum: f64,
}

impl Objective {
    fn better_than(&self, other: &Objective) -> bool {
        (self.non_mono, self.level_deficit)
            .cmp(&(other.non_mono, other.level_deficit))
            .then(
                self.max_inl
                    .partial_cmp(&other.max_inl)
                    .unwrap_or(std::cmp::Ordering::Equal),
            )
            .then(
                self.abs_vref_sum
                    .partial_cmp(&other.abs_vref_sum)
                    .unwrap_or(std::cmp::Ordering::Equal),
            )
            .is_lt()
    }
}

fn evaluate_columns(
    grid: &[f64],
    columns: &[Vec<CodeWord>],
    required_levels: usize,
    v_refs: &[f64],
) -> (Objective, TransferTable) {
    let table = compose_table(grid, columns);
    let non_mono = table.non_monotonicity_count();
    let levels = table.n_levels();
    let level_deficit = required_levels.saturating_sub(levels);
    let max_inl = match metrics::transitions(&table) {
        Ok(ts) if ts.len() >= 2 => metrics::inl_dnl(&ts, 1.0, metrics::Fit::Endpoint)
            .map(|m| m.max_abs_inl)
            .unwrap_or(f64::INFINITY),
        _ => f64::INFINITY,
    };
    (
        Objective {
            non_mono,
            level_deficit,
            max_inl,
            abs_vref_sum: v_refs.iter().map(|v| v.abs()).sum(),
        },
        table,
    )
}

/// Grid-search the per-block reference voltages.
///
/// Blocks are visited in order; for each, every grid value is tried with
/// the other blocks held at their current best, minimizing
/// (non-monotonicity count, missing levels, max |INL|) with ties broken
/// toward the smaller |v_ref|. The required level count is
/// `targets.len() + 1`. Fails with a report of the best candidate when
/// no choice reaches a monotone staircase with that many levels.
pub fn calibrate_refs(
    spec: &QuantizerArraySpec,
    targets: &[f64],
    vref_grid: (f64, f64, f64),
    opts: &SettleOptions,
) -> Result<CalibrationOutcome> {
    let (g_lo, g_hi, g_step) = vref_grid;
    if !(g_step > 0.0) || g_lo > g_hi {
        return Err(Error::Parameter(format!(
            "invalid v_ref grid ({g_lo}, {g_hi}, {g_step})"
        )));
    }
    if targets.is_empty() || targets.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Parameter(
            "targets must be non-empty and strictly increasing".into(),
        ));
    }
    let mut grid_values = Vec::new();
    let mut g = g_lo;
    while g <= g_hi + 1e-12 {
        grid_values.push(g);
        g += g_step;
    }
    let required_levels = targets.len() + 1;
    let v_grid = uniform_grid(spec.v_in_range.0, spec.v_in_range.1, CALIBRATION_POINTS);

    let mut current = spec.clone();
    let mut columns: Vec<Vec<CodeWord>> = Vec::with_capacity(spec.n_blocks);
    for k in 0..spec.n_blocks {
        let block = current.block_spec(k)?;
        columns.push(block_column(&block, &current, k, &v_grid, opts)?);
    }
    let (mut best_obj, mut best_table) =
        evaluate_columns(&v_grid, &columns, required_levels, &current.v_refs);

    for k in 0..spec.n_blocks {
        for &candidate in &grid_values {
            if candidate == current.v_refs[k] {
                continue;
            }
            let block = current.block_template.clone().with_v_ref(candidate);
            let column = block_column(&block, &current, k, &v_grid, opts)?;
            let saved = std::mem::replace(&mut columns[k], column);
            let mut trial_refs = current.v_refs.clone();
            trial_refs[k] = candidate;
            let (obj, table) = evaluate_columns(&v_grid, &columns, required_levels, &trial_refs);
            if obj.better_than(&best_obj) {
                best_obj = obj;
                best_table = table;
                current.v_refs[k] = candidate;
            } else {
                columns[k] = saved;
            }
        }
    }

    let outcome = CalibrationOutcome {
        v_refs: current.v_refs.clone(),
        max_abs_inl: best_obj.max_inl,
        levels: best_table.n_levels(),
        non_monotonicity: best_obj.non_mono,
        table: best_table,
    };
    if best_obj.non_mono > 0 || best_obj.level_deficit > 0 {
        return Err(Error::CalibrationFailure(format!(
            "no grid point yields {required_levels} distinct monotone levels; \
             best candidate v_refs {:?} reached {} levels with {} revisits \
             and max |INL| {:.3} LSB",
            outcome.v_refs, outcome.levels, outcome.non_monotonicity, outcome.max_abs_inl
        )));
    }
    Ok(outcome)
}
