//! Neuron activation: a monotone sigmoid between two output rails.
//!
//! The map is `g(u) = out_low + swing * sigma(s * lambda * u)` with
//! `sigma(x) = 1/(1+exp(-x))` and `s = -1` for inverting neurons. The
//! combination of polarity and swing sign decides whether `g` increases
//! or decreases in `u`; the "logic high" rail is always the value `g`
//! saturates to for large positive input.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Inverting,
    Noninverting,
}

impl Polarity {
    /// Sign applied to the sigmoid argument.
    pub fn sign(self) -> f64 {
        match self {
            Polarity::Inverting => -1.0,
            Polarity::Noninverting => 1.0,
        }
    }
}

/// Static description of one neuron's transfer curve.
///
/// Stored as (offset, swing) so the only structural constraint is a
/// nonzero swing; rails may sit at negative voltages (the scaled
/// networks swing from 0 to -670 mV).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivationSpec {
    pub polarity: Polarity,
    /// Sigmoid slope parameter, 1/volts. Must be positive.
    pub gain_lambda: f64,
    offset: f64,
    swing: f64,
}

impl ActivationSpec {
    pub fn new(polarity: Polarity, gain_lambda: f64, out_low: f64, out_high: f64) -> Result<Self> {
        if !(gain_lambda > 0.0) || !gain_lambda.is_finite() {
            return Err(Error::Parameter(format!(
                "gain_lambda must be positive and finite, got {gain_lambda}"
            )));
        }
        let swing = out_high - out_low;
        if swing == 0.0 || !swing.is_finite() || !out_low.is_finite() {
            return Err(Error::Parameter(format!(
                "output rails must be distinct and finite, got ({out_low}, {out_high})"
            )));
        }
        Ok(ActivationSpec {
            polarity,
            gain_lambda,
            offset: out_low,
            swing,
        })
    }

    pub fn out_low(&self) -> f64 {
        self.offset
    }

    pub fn out_high(&self) -> f64 {
        self.offset + self.swing
    }

    pub fn swing(&self) -> f64 {
        self.swing
    }

    pub fn midpoint(&self) -> f64 {
        self.offset + 0.5 * self.swing
    }

    /// True when the overall map u -> V is increasing.
    pub fn is_increasing(&self) -> bool {
        self.polarity.sign() * self.swing > 0.0
    }

    /// Rail reached for u -> +inf; the "logic high" output level.
    pub fn logic_high_rail(&self) -> f64 {
        if self.is_increasing() {
            self.offset + self.swing
        } else {
            self.offset
        }
    }

    /// Rail reached for u -> -inf; the "logic low" output level.
    pub fn logic_low_rail(&self) -> f64 {
        if self.is_increasing() {
            self.offset
        } else {
            self.offset + self.swing
        }
    }

    /// Output voltage of a logic bit in the high-gain limit.
    pub fn rail_for_bit(&self, bit: u8) -> f64 {
        if bit != 0 {
            self.logic_high_rail()
        } else {
            self.logic_low_rail()
        }
    }

    /// Normalized sigmoid coordinate of an output voltage.
    pub(crate) fn fraction_of(&self, v: f64) -> f64 {
        (v - self.offset) / self.swing
    }
}

fn sigma(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Evaluate the activation at internal voltage `u`.
pub fn activation(u: f64, spec: &ActivationSpec) -> f64 {
    spec.offset + spec.swing * sigma(spec.polarity.sign() * spec.gain_lambda * u)
}

/// Invert the activation. Errors on rail or out-of-range values, which
/// the sigmoid never attains.
pub fn activation_inverse(v: f64, spec: &ActivationSpec) -> Result<f64> {
    let p = spec.fraction_of(v);
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "activation_inverse: {v} is not strictly between the rails ({}, {})",
            spec.out_low(),
            spec.out_high()
        )));
    }
    let logit = (p / (1.0 - p)).ln();
    Ok(logit / (spec.polarity.sign() * spec.gain_lambda))
}

/// `int_0^p logit(q) dq = p ln p + (1-p) ln(1-p)`; zero at both ends.
pub(crate) fn logit_integral(p: f64) -> f64 {
    let a = if p > 0.0 { p * p.ln() } else { 0.0 };
    let b = if p < 1.0 {
        (1.0 - p) * (1.0 - p).ln()
    } else {
        0.0
    };
    a + b
}

/// Integral of the inverse activation from V = 0 to the given output
/// voltage, as it appears in the energy function. Zero must be one of
/// the rails (true for every network this crate synthesizes).
pub(crate) fn inverse_integral_from_zero(v: f64, spec: &ActivationSpec) -> f64 {
    let p0 = spec.fraction_of(0.0).clamp(0.0, 1.0);
    let p = spec.fraction_of(v).clamp(0.0, 1.0);
    let scale = spec.swing / (spec.polarity.sign() * spec.gain_lambda);
    scale * (logit_integral(p) - logit_integral(p0))
}
