//! Run configuration: one flat JSON document whose defaults reproduce
//! the reported setup (six 2-bit blocks, 0.1 V shifts, [0, 2] V input
//! range, -670 mV swing and reference, learning rate 0.3, momentum 0.9).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::array::{QuantizerArraySpec, ShiftSign};
use crate::dynamics::{default_dt, ResetPolicy, SettleOptions};
use crate::encoder::TrainConfig;
use crate::error::{Error, Result};
use crate::network::{synth_normalized, synth_scaled, Formulation, NetworkSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    // Block synthesis
    pub n_bits: usize,
    pub formulation: Formulation,
    pub v_in_low: f64,
    pub v_in_high: f64,
    pub v_swing: f64,
    pub v_ref: f64,
    pub unit_scale: f64,
    pub capacitance: f64,
    pub gain_lambda: f64,
    // Array composition
    pub n_blocks: usize,
    pub delta_v: f64,
    pub shift_sign: ShiftSign,
    // Settling
    pub dt: Option<f64>,
    pub max_steps: usize,
    pub tol: f64,
    pub reset_policy: ResetPolicy,
    pub record_energy: bool,
    // Encoder training
    pub learning_rate: f64,
    pub momentum: f64,
    pub max_epochs: usize,
    pub target_exact_match: f64,
    pub init_range: f64,
    pub layer_sizes: Vec<usize>,
    // Calibration grid and targets
    pub vref_low: f64,
    pub vref_high: f64,
    pub vref_step: f64,
    /// Explicit transition targets; absent means the uniform 16-level
    /// boundaries of the input range.
    pub calibration_targets: Option<Vec<f64>>,
    // Run control
    pub seed: u64,
    pub points: usize,
    /// Input voltage for single-point subcommands (settle, quantize).
    pub v_in: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n_bits: 2,
            formulation: Formulation::PositiveConductance,
            v_in_low: 0.0,
            v_in_high: 2.0,
            v_swing: -0.67,
            v_ref: -0.67,
            unit_scale: 10.0e-6,
            capacitance: 10.0e-12,
            gain_lambda: 1.0e4,
            n_blocks: 6,
            delta_v: 0.1,
            shift_sign: ShiftSign::Add,
            dt: None,
            max_steps: 1_000_000,
            tol: 1e-6,
            reset_policy: ResetPolicy::ZeroState,
            record_energy: false,
            learning_rate: 0.3,
            momentum: 0.9,
            max_epochs: 20_000,
            target_exact_match: 1.0,
            init_range: 0.5,
            layer_sizes: vec![12, 11, 4],
            vref_low: -1.0,
            vref_high: -0.4,
            vref_step: 0.025,
            calibration_targets: None,
            seed: 42,
            points: 256,
            v_in: 1.0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, msg: String| Error::Config(format!("{name}: {msg}"));
        if !(1..=16).contains(&self.n_bits) {
            return Err(field(
                "n_bits",
                format!("must be in 1..=16, got {}", self.n_bits),
            ));
        }
        if !(self.v_in_low < self.v_in_high) {
            return Err(field(
                "v_in_low/v_in_high",
                format!("range [{}, {}] is empty", self.v_in_low, self.v_in_high),
            ));
        }
        if self.v_swing == 0.0 {
            return Err(field("v_swing", "must be nonzero".into()));
        }
        if self.v_ref == 0.0 {
            return Err(field("v_ref", "must be nonzero".into()));
        }
        if !(self.unit_scale > 0.0) {
            return Err(field(
                "unit_scale",
                format!("must be positive, got {}", self.unit_scale),
            ));
        }
        if !(self.capacitance > 0.0) {
            return Err(field(
                "capacitance",
                format!("must be positive, got {}", self.capacitance),
            ));
        }
        if !(self.gain_lambda > 0.0) {
            return Err(field(
                "gain_lambda",
                format!("must be positive, got {}", self.gain_lambda),
            ));
        }
        if self.n_blocks == 0 {
            return Err(field("n_blocks", "must be at least 1".into()));
        }
        if !(self.delta_v >= 0.0) {
            return Err(field(
                "delta_v",
                format!("must be nonnegative, got {}", self.delta_v),
            ));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(field("dt", format!("must be positive, got {dt}")));
            }
        }
        if self.max_steps == 0 {
            return Err(field("max_steps", "must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(field("tol", format!("must be positive, got {}", self.tol)));
        }
        if !(self.learning_rate >= 0.0) {
            return Err(field("learning_rate", "must be nonnegative".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(field(
                "momentum",
                format!("must be in [0, 1), got {}", self.momentum),
            ));
        }
        if self.max_epochs == 0 {
            return Err(field("max_epochs", "must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.target_exact_match) {
            return Err(field("target_exact_match", "must be in [0, 1]".into()));
        }
        if !(self.init_range > 0.0) {
            return Err(field("init_range", "must be positive".into()));
        }
        if self.layer_sizes.len() < 2 || self.layer_sizes.contains(&0) {
            return Err(field(
                "layer_sizes",
                format!("invalid layer list {:?}", self.layer_sizes),
            ));
        }
        if self.layer_sizes[0] != self.n_blocks * self.n_bits {
            return Err(field(
                "layer_sizes",
                format!(
                    "input width {} must equal n_blocks * n_bits = {}",
                    self.layer_sizes[0],
                    self.n_blocks * self.n_bits
                ),
            ));
        }
        if !(self.vref_step > 0.0) {
            return Err(field(
                "vref_step",
                format!("must be positive, got {}", self.vref_step),
            ));
        }
        if self.vref_low > self.vref_high {
            return Err(field(
                "vref_low/vref_high",
                format!("empty grid [{}, {}]", self.vref_low, self.vref_high),
            ));
        }
        if let Some(targets) = &self.calibration_targets {
            if targets.is_empty() || targets.windows(2).any(|w| w[0] >= w[1]) {
                return Err(field(
                    "calibration_targets",
                    "must be non-empty and strictly increasing".into(),
                ));
            }
        }
        if self.points < 2 {
            return Err(field(
                "points",
                format!("must be at least 2, got {}", self.points),
            ));
        }
        Ok(())
    }

    /// One quantizer block per this configuration.
    pub fn block_spec(&self) -> Result<NetworkSpec> {
        let spec = match self.formulation {
            Formulation::PositiveConductance => synth_scaled(
                self.n_bits,
                self.v_in_high,
                self.v_swing,
                self.v_ref,
                self.unit_scale,
            )?,
            // Normalized classic network; voltage-domain knobs are not used.
            Formulation::ClassicSigned => {
                synth_normalized(self.n_bits, Formulation::ClassicSigned)?
            }
        };
        spec.with_gain(self.gain_lambda)?
            .with_capacitance(self.capacitance)
    }

    pub fn array_spec(&self) -> Result<QuantizerArraySpec> {
        QuantizerArraySpec::new(
            self.n_blocks,
            self.delta_v,
            self.shift_sign,
            self.block_spec()?,
            (self.v_in_low, self.v_in_high),
        )
    }

    pub fn settle_options(&self, spec: &NetworkSpec) -> SettleOptions {
        SettleOptions {
            dt: self.dt.unwrap_or_else(|| default_dt(spec)),
            max_steps: self.max_steps,
            tol: self.tol,
            reset_policy: self.reset_policy,
            record_energy: self.record_energy,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            max_epochs: self.max_epochs,
            target_exact_match: self.target_exact_match,
            seed: self.seed,
            init_range: self.init_range,
        }
    }

    /// Calibration targets: configured ones, or the uniform boundaries
    /// of a 16-level staircase over the input range.
    pub fn targets(&self) -> Vec<f64> {
        match &self.calibration_targets {
            Some(t) => t.clone(),
            None => {
                let levels = 1usize << self.layer_sizes.last().unwrap().min(&16);
                let span = self.v_in_high - self.v_in_low;
                let lsb = span / levels as f64;
                (0..levels - 1)
                    .map(|m| self.v_in_low + (m as f64 + 0.5) * lsb)
                    .collect()
            }
        }
    }

    /// Ideal LSB of the composed converter over its input range.
    pub fn ideal_lsb(&self) -> f64 {
        let levels = 1usize << self.layer_sizes.last().unwrap().min(&16);
        (self.v_in_high - self.v_in_low) / levels as f64
    }
}

/// Parse a config from JSON text; unknown keys are rejected by name and
/// absent keys take the defaults above.
pub fn load_config(text: &str) -> Result<RunConfig> {
    let config: RunConfig = serde_json::from_str(text).map_err(|e| {
        Error::Config(format!(
            "parse error at line {}, column {}: {e}",
            e.line(),
            e.column()
        ))
    })?;
    config.validate()?;
    Ok(config)
}

pub fn load_config_file(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    load_config(&text)
}

/// Pretty JSON echo of the effective configuration, for provenance.
pub fn echo_config(config: &RunConfig) -> String {
    serde_json::to_string_pretty(config).expect("config serializes")
}
