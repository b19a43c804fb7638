//! Network synthesis, code words, and the energy function of one
//! quantizer block.
//!
//! Two equivalent formulations are supported. `classic_signed` keeps the
//! textbook convention: inhibitory couplings are negative numbers and the
//! neurons are ordinary rising sigmoids on (0, 1). `positive_conductance`
//! is the circuit-facing convention: every conductance is a physical
//! (nonnegative) value and the inhibition comes from inverting neurons
//! whose logic-high output is a negative voltage.

use serde::{Deserialize, Serialize};

use crate::activation::{self, ActivationSpec, Polarity};
use crate::error::{Error, Result};

pub const MAX_SYNTH_BITS: usize = 16;

/// Default slope for scaled (voltage-domain) networks, 1/volts.
pub const DEFAULT_SCALED_GAIN: f64 = 1.0e4;
/// Default slope for normalized networks.
pub const DEFAULT_NORMALIZED_GAIN: f64 = 100.0;
/// Default neuron capacitance for scaled networks, farads.
pub const DEFAULT_CAPACITANCE: f64 = 10.0e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    ClassicSigned,
    PositiveConductance,
}

/// Full electrical description of one Hopfield quantizer block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub n_bits: usize,
    /// Symmetric coupling conductances with zero diagonal, siemens.
    pub t_matrix: Vec<Vec<f64>>,
    /// Conductance from the analog input to each neuron, siemens.
    pub t_in: Vec<f64>,
    /// Conductance from the reference to each neuron, siemens.
    pub t_ref: Vec<f64>,
    /// Reference voltage, volts (sign carried here, not in `t_ref`).
    pub v_ref: f64,
    /// Per-neuron input capacitance, farads.
    pub capacitance: f64,
    pub activation: ActivationSpec,
    pub formulation: Formulation,
}

impl NetworkSpec {
    /// Check the structural invariants; synthesized specs always pass.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_bits;
        if n == 0 {
            return Err(Error::Parameter("n_bits must be at least 1".into()));
        }
        if self.t_matrix.len() != n || self.t_in.len() != n || self.t_ref.len() != n {
            return Err(Error::Parameter(format!(
                "conductance arrays must all have length n_bits = {n}"
            )));
        }
        if !(self.capacitance > 0.0) {
            return Err(Error::Parameter("capacitance must be positive".into()));
        }
        for (i, row) in self.t_matrix.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Parameter("t_matrix must be square".into()));
            }
            if row[i] != 0.0 {
                return Err(Error::Parameter(format!(
                    "t_matrix diagonal must be zero, got {} at [{i}][{i}]",
                    row[i]
                )));
            }
            for (j, &t) in row.iter().enumerate() {
                if !t.is_finite() {
                    return Err(Error::Parameter(format!(
                        "t_matrix[{i}][{j}] is not finite"
                    )));
                }
                if t != self.t_matrix[j][i] {
                    return Err(Error::Parameter(format!(
                        "t_matrix must be symmetric, [{i}][{j}] != [{j}][{i}]"
                    )));
                }
                match self.formulation {
                    Formulation::PositiveConductance if t < 0.0 => {
                        return Err(Error::Parameter(format!(
                            "positive_conductance t_matrix[{i}][{j}] is negative"
                        )));
                    }
                    Formulation::ClassicSigned if t > 0.0 => {
                        return Err(Error::Parameter(format!(
                            "classic_signed t_matrix[{i}][{j}] is positive"
                        )));
                    }
                    _ => {}
                }
            }
        }
        for (name, arr) in [("t_in", &self.t_in), ("t_ref", &self.t_ref)] {
            for (i, &t) in arr.iter().enumerate() {
                if !t.is_finite() || t < 0.0 {
                    return Err(Error::Parameter(format!(
                        "{name}[{i}] must be finite and nonnegative, got {t}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Effective input conductance of neuron `i`: every branch loads the
    /// input node regardless of coupling sign, so magnitudes are summed.
    pub fn effective_conductance(&self, i: usize) -> f64 {
        let coupling: f64 = self.t_matrix[i].iter().map(|t| t.abs()).sum();
        self.t_in[i] + self.t_ref[i] + coupling
    }

    /// Source current into neuron `i` for a given analog input.
    pub fn input_current(&self, i: usize, v_in: f64) -> f64 {
        self.t_in[i] * v_in + self.t_ref[i] * self.v_ref
    }

    pub fn with_gain(mut self, gain_lambda: f64) -> Result<Self> {
        self.activation = ActivationSpec::new(
            self.activation.polarity,
            gain_lambda,
            self.activation.out_low(),
            self.activation.out_high(),
        )?;
        Ok(self)
    }

    pub fn with_capacitance(mut self, capacitance: f64) -> Result<Self> {
        if !(capacitance > 0.0) {
            return Err(Error::Parameter("capacitance must be positive".into()));
        }
        self.capacitance = capacitance;
        Ok(self)
    }

    pub fn with_v_ref(mut self, v_ref: f64) -> Self {
        self.v_ref = v_ref;
        self
    }
}

/// Binary output word; bit `i` carries weight `2^i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CodeWord {
    bits: Vec<u8>,
}

impl CodeWord {
    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::Parameter("code bits must be 0 or 1".into()));
        }
        Ok(CodeWord { bits })
    }

    pub fn from_value(value: u64, n_bits: usize) -> Self {
        let bits = (0..n_bits).map(|i| ((value >> i) & 1) as u8).collect();
        CodeWord { bits }
    }

    pub fn zeros(n_bits: usize) -> Self {
        CodeWord {
            bits: vec![0; n_bits],
        }
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

    /// Weighted value per the binary code relation.
    pub fn value(&self) -> u64 {
        self.bits
            .iter()
            .enumerate()
            .map(|(i, &b)| (b as u64) << i)
            .sum()
    }
}

impl std::fmt::Display for CodeWord {
    /// MSB-first bit string, e.g. code 1 of 2 bits prints "01".
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for &b in self.bits.iter().rev() {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

fn pow2(e: i32) -> f64 {
    (2.0f64).powi(e)
}

fn check_bits(n_bits: usize) -> Result<()> {
    if !(1..=MAX_SYNTH_BITS).contains(&n_bits) {
        return Err(Error::Parameter(format!(
            "n_bits must be in 1..={MAX_SYNTH_BITS}, got {n_bits}"
        )));
    }
    Ok(())
}

/// Synthesize the normalized (dimensionless, unit-capacitance) network:
/// |T_ij| = 2^(i+j), T_Ini = 2^i, T_Ri = 2^(2i-1), reference at -1 so the
/// bias current comes out as -2^(2i-1). The analog input is then measured
/// in code units (LSB = 1).
pub fn synth_normalized(n_bits: usize, formulation: Formulation) -> Result<NetworkSpec> {
    check_bits(n_bits)?;
    let n = n_bits;
    let coupling_sign = match formulation {
        Formulation::ClassicSigned => -1.0,
        Formulation::PositiveConductance => 1.0,
    };
    let mut t_matrix = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                t_matrix[i][j] = coupling_sign * pow2((i + j) as i32);
            }
        }
    }
    let t_in: Vec<f64> = (0..n).map(|i| pow2(i as i32)).collect();
    let t_ref: Vec<f64> = (0..n).map(|i| pow2(2 * i as i32 - 1)).collect();
    let activation = match formulation {
        Formulation::ClassicSigned => {
            ActivationSpec::new(Polarity::Noninverting, DEFAULT_NORMALIZED_GAIN, 0.0, 1.0)?
        }
        // Inverting neurons swinging to -1: logic high is the -1 rail,
        // which is what feeds the positive couplings their sign flip.
        Formulation::PositiveConductance => {
            ActivationSpec::new(Polarity::Inverting, DEFAULT_NORMALIZED_GAIN, -1.0, 0.0)?
        }
    };
    let spec = NetworkSpec {
        n_bits: n,
        t_matrix,
        t_in,
        t_ref,
        v_ref: -1.0,
        capacitance: 1.0,
        activation,
        formulation,
    };
    spec.validate()?;
    Ok(spec)
}

/// Synthesize the voltage-domain network: T_ij = u*2^(i+j)/|v_swing|,
/// T_Ini = u*2^(N+i)/v_in_max, T_Ri = u*(2^(i-1) + 2^(2i-1)/|v_ref|).
/// Magnitudes keep every conductance positive; the signs of `v_swing`
/// and `v_ref` live in the activation rails and the reference voltage.
pub fn synth_scaled(
    n_bits: usize,
    v_in_max: f64,
    v_swing: f64,
    v_ref: f64,
    unit_scale: f64,
) -> Result<NetworkSpec> {
    check_bits(n_bits)?;
    if !(v_in_max > 0.0) {
        return Err(Error::Parameter(format!(
            "v_in_max must be positive, got {v_in_max}"
        )));
    }
    if v_swing == 0.0 || v_ref == 0.0 {
        return Err(Error::Parameter("v_swing and v_ref must be nonzero".into()));
    }
    if !(unit_scale > 0.0) {
        return Err(Error::Parameter(format!(
            "unit_scale must be positive, got {unit_scale}"
        )));
    }
    let n = n_bits;
    let mut t_matrix = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                t_matrix[i][j] = unit_scale * pow2((i + j) as i32) / v_swing.abs();
            }
        }
    }
    let t_in: Vec<f64> = (0..n)
        .map(|i| unit_scale * pow2((n + i) as i32) / v_in_max)
        .collect();
    let t_ref: Vec<f64> = (0..n)
        .map(|i| unit_scale * (pow2(i as i32 - 1) + pow2(2 * i as i32 - 1) / v_ref.abs()))
        .collect();
    let activation = if v_swing < 0.0 {
        ActivationSpec::new(Polarity::Inverting, DEFAULT_SCALED_GAIN, v_swing, 0.0)?
    } else {
        ActivationSpec::new(Polarity::Noninverting, DEFAULT_SCALED_GAIN, 0.0, v_swing)?
    };
    let spec = NetworkSpec {
        n_bits: n,
        t_matrix,
        t_in,
        t_ref,
        v_ref,
        capacitance: DEFAULT_CAPACITANCE,
        activation,
        formulation: Formulation::PositiveConductance,
    };
    spec.validate()?;
    Ok(spec)
}

/// Nearest code to `v_in/lsb`, rounding half up, clamped to the code range.
pub fn ideal_code(v_in: f64, n_bits: usize, lsb: f64) -> Result<CodeWord> {
    if !(lsb > 0.0) {
        return Err(Error::Parameter(format!("lsb must be positive, got {lsb}")));
    }
    let max = ((1u64 << n_bits) - 1) as f64;
    let value = (v_in / lsb + 0.5).floor().clamp(0.0, max);
    Ok(CodeWord::from_value(value as u64, n_bits))
}

/// Operand for the energy function: a vector of output voltages, or a
/// code word interpreted at the rails in the high-gain limit.
#[derive(Debug, Clone, Copy)]
pub enum EnergyOperand<'a> {
    State(&'a [f64]),
    Code(&'a CodeWord),
}

/// Energy of a state or code at the given analog input.
///
/// The quadratic part is `-1/2 sum T_ij V_i V_j - sum V_i I_i` with
/// `I_i = T_Ini v_in + T_Ri V_ref`; `include_integral` adds
/// `sum T_i int_0^{V_i} g^{-1}(V) dV`. For networks whose activation
/// decreases in u the whole expression is negated, which is the branch
/// the dynamics actually descend. Code words always omit the integral
/// term (it vanishes at the rails in the high-gain limit); requesting it
/// is a parameter error.
pub fn energy(
    spec: &NetworkSpec,
    operand: EnergyOperand<'_>,
    v_in: f64,
    include_integral: bool,
) -> Result<f64> {
    match operand {
        EnergyOperand::State(v) => energy_of_state(spec, v, v_in, include_integral),
        EnergyOperand::Code(code) => {
            if include_integral {
                return Err(Error::Parameter(
                    "include_integral is not defined for code words".into(),
                ));
            }
            energy_of_code(spec, code, v_in)
        }
    }
}

pub fn energy_of_state(
    spec: &NetworkSpec,
    v: &[f64],
    v_in: f64,
    include_integral: bool,
) -> Result<f64> {
    let n = spec.n_bits;
    if v.len() != n {
        return Err(Error::Parameter(format!(
            "state vector length {} does not match n_bits {n}",
            v.len()
        )));
    }
    let lo = spec.activation.out_low().min(spec.activation.out_high());
    let hi = spec.activation.out_low().max(spec.activation.out_high());
    for (i, &vi) in v.iter().enumerate() {
        if !vi.is_finite() || vi < lo - 1e-12 || vi > hi + 1e-12 {
            return Err(Error::Parameter(format!(
                "state[{i}] = {vi} lies outside the activation rails [{lo}, {hi}]"
            )));
        }
    }
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += spec.t_matrix[i][j] * v[i] * v[j];
        }
    }
    let mut e = -0.5 * quad;
    for i in 0..n {
        e -= v[i] * spec.input_current(i, v_in);
    }
    if include_integral {
        for (i, &vi) in v.iter().enumerate() {
            e += spec.effective_conductance(i)
                * activation::inverse_integral_from_zero(vi, &spec.activation);
        }
    }
    Ok(descent_sign(spec) * e)
}

pub fn energy_of_code(spec: &NetworkSpec, code: &CodeWord, v_in: f64) -> Result<f64> {
    if code.len() != spec.n_bits {
        return Err(Error::Parameter(format!(
            "code length {} does not match n_bits {}",
            code.len(),
            spec.n_bits
        )));
    }
    let v: Vec<f64> = code
        .bits()
        .iter()
        .map(|&b| spec.activation.rail_for_bit(b))
        .collect();
    energy_of_state(spec, &v, v_in, false)
}

/// +1 when the literal energy expression descends along trajectories
/// (increasing activation), -1 otherwise.
pub(crate) fn descent_sign(spec: &NetworkSpec) -> f64 {
    if spec.activation.is_increasing() {
        1.0
    } else {
        -1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const US: f64 = 1e-6;

    #[test]
    fn normalized_values_match_closed_form() {
        let net = synth_normalized(4, Formulation::PositiveConductance).unwrap();
        assert_eq!(net.t_matrix[0][1], 2.0);
        assert_eq!(net.t_matrix[2][3], 32.0);
        assert_eq!(net.t_in[3], 8.0);
        assert_eq!(net.t_ref[3], 32.0);
        assert_eq!(net.v_ref, -1.0);
    }

    #[test]
    fn normalized_single_neuron() {
        let net = synth_normalized(1, Formulation::ClassicSigned).unwrap();
        assert_eq!(net.t_matrix, vec![vec![0.0]]);
        assert_eq!(net.t_in[0], 1.0);
        assert_eq!(net.t_ref[0], 0.5);
    }

    #[test]
    fn classic_couplings_are_negative_and_symmetric() {
        let net = synth_normalized(4, Formulation::ClassicSigned).unwrap();
        assert_eq!(net.t_matrix[0][1], -2.0);
        for i in 0..4 {
            assert_eq!(net.t_matrix[i][i], 0.0);
            for j in 0..4 {
                assert_eq!(net.t_matrix[i][j], net.t_matrix[j][i]);
                if i != j {
                    assert!(net.t_matrix[i][j] < 0.0);
                }
            }
        }
    }

    #[test]
    fn synth_rejects_out_of_range_bits() {
        assert!(synth_normalized(0, Formulation::ClassicSigned).is_err());
        assert!(synth_normalized(17, Formulation::ClassicSigned).is_err());
        assert!(synth_scaled(0, 2.0, -0.67, -0.67, 1e-5).is_err());
    }

    #[test]
    fn scaled_reproduces_published_conductances() {
        let net = synth_scaled(2, 2.0, -0.67, -0.67, 10.0 * US).unwrap();
        let printed = [
            (net.t_matrix[0][1], 29.9),
            (net.t_matrix[1][0], 29.9),
            (net.t_ref[0], 12.5),
            (net.t_ref[1], 39.9),
            (net.t_in[0], 20.0),
            (net.t_in[1], 40.0),
        ];
        for (got, want_us) in printed {
            assert!(
                (got - want_us * US).abs() <= 0.1 * US,
                "expected {want_us} uS, got {} uS",
                got / US
            );
        }
    }

    #[test]
    fn scaled_input_conductance_cancellation() {
        // v_in_max = 2^N cancels the 2^N factor, leaving T_Ini = 2^i.
        let n = 3;
        let net = synth_scaled(n, (1u64 << n) as f64, 1.0, -1.0, 1.0).unwrap();
        for i in 0..n {
            assert_eq!(net.t_in[i], (1u64 << i) as f64);
        }
        assert_eq!(net.t_in[0], 1.0);
    }

    #[test]
    fn scaled_reference_ratio() {
        let net = synth_scaled(2, 2.0, -0.67, -0.67, 1.0).unwrap();
        let ratio = net.t_ref[0] / net.t_ref[1];
        assert!((ratio - 12.46 / 39.85).abs() < 1e-3);
    }

    #[test]
    fn scaled_rejects_zero_denominators() {
        assert!(synth_scaled(2, 0.0, -0.67, -0.67, 1.0).is_err());
        assert!(synth_scaled(2, 2.0, 0.0, -0.67, 1.0).is_err());
        assert!(synth_scaled(2, 2.0, -0.67, 0.0, 1.0).is_err());
        assert!(synth_scaled(2, 2.0, -0.67, -0.67, 0.0).is_err());
    }

    #[test]
    fn ideal_code_examples() {
        assert_eq!(ideal_code(1.3, 2, 1.0).unwrap().value(), 1);
        assert_eq!(ideal_code(1.3, 2, 1.0).unwrap().bits(), &[1, 0]);
        assert_eq!(ideal_code(2.5, 2, 1.0).unwrap().value(), 3); // half up
        assert_eq!(ideal_code(-0.4, 2, 1.0).unwrap().value(), 0);
        assert_eq!(ideal_code(9.9, 2, 1.0).unwrap().value(), 3);
        assert!(ideal_code(1.0, 2, 0.0).is_err());
    }

    #[test]
    fn ideal_code_is_monotone() {
        let mut prev = 0;
        let mut v = -1.0;
        while v <= 4.0 {
            let c = ideal_code(v, 2, 1.0).unwrap().value();
            assert!(c >= prev, "code decreased at v={v}");
            prev = c;
            v += 0.01;
        }
    }

    #[test]
    fn energy_zero_code_zero_input() {
        let mut net = synth_normalized(3, Formulation::ClassicSigned).unwrap();
        net.v_ref = 0.0;
        let code = CodeWord::zeros(3);
        let e = energy_of_code(&net, &code, 0.0).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn classic_rail_energy_matches_quadratic_oracle() {
        // At the rails the classic normalized energy is
        // (x - c)^2 / 2 up to a code-independent constant; check every
        // pair difference against that closed form at x = 1.3.
        let net = synth_normalized(2, Formulation::ClassicSigned).unwrap();
        let x = 1.3;
        let codes: Vec<CodeWord> = (0..4).map(|c| CodeWord::from_value(c, 2)).collect();
        for a in &codes {
            for b in &codes {
                let got = energy_of_code(&net, a, x).unwrap() - energy_of_code(&net, b, x).unwrap();
                let ca = a.value() as f64;
                let cb = b.value() as f64;
                let want = 0.5 * ((x - ca).powi(2) - (x - cb).powi(2));
                assert!(
                    (got - want).abs() < 1e-12,
                    "pair ({},{}): got {got}, want {want}",
                    a.value(),
                    b.value()
                );
            }
        }
    }

    #[test]
    fn midpoint_integral_term_closed_form() {
        // At the exact midpoint state the integral term contributes
        // sum_i T_i * |swing| * ln(2) / lambda, with the sign that keeps
        // the term a descent bonus for the midpoint on both formulations.
        for formulation in [Formulation::ClassicSigned, Formulation::PositiveConductance] {
            let net = synth_normalized(2, formulation).unwrap();
            let mid = net.activation.midpoint();
            let v = vec![mid; 2];
            let with = energy_of_state(&net, &v, 0.7, true).unwrap();
            let without = energy_of_state(&net, &v, 0.7, false).unwrap();
            let t_sum: f64 = (0..2).map(|i| net.effective_conductance(i)).sum();
            let magnitude =
                t_sum * net.activation.swing().abs() * (2.0f64).ln() / net.activation.gain_lambda;
            let delta = with - without;
            assert!(
                (delta.abs() - magnitude).abs() < 1e-12,
                "{formulation:?}: |delta| = {}, want {magnitude}",
                delta.abs()
            );
            assert!(
                delta < 0.0,
                "{formulation:?}: midpoint bonus should lower energy"
            );
        }
    }

    #[test]
    fn energy_dimension_mismatch() {
        let net = synth_normalized(2, Formulation::ClassicSigned).unwrap();
        assert!(energy_of_state(&net, &[0.5], 0.0, false).is_err());
        let code = CodeWord::zeros(3);
        assert!(energy_of_code(&net, &code, 0.0).is_err());
    }

    #[test]
    fn code_energy_rejects_integral() {
        let net = synth_normalized(2, Formulation::ClassicSigned).unwrap();
        let code = CodeWord::zeros(2);
        let err = energy(&net, EnergyOperand::Code(&code), 0.0, true);
        assert!(matches!(err, Err(Error::Parameter(_))));
    }

    #[test]
    fn synthesized_specs_validate() {
        for net in [
            synth_normalized(4, Formulation::ClassicSigned).unwrap(),
            synth_normalized(4, Formulation::PositiveConductance).unwrap(),
            synth_scaled(2, 2.0, -0.67, -0.67, 10.0 * US).unwrap(),
        ] {
            net.validate().unwrap();
        }
    }

    #[test]
    fn code_word_round_trip() {
        for value in 0..16 {
            let c = CodeWord::from_value(value, 4);
            assert_eq!(c.value(), value);
        }
        assert_eq!(CodeWord::from_value(5, 4).to_string(), "0101");
        assert!(CodeWord::from_bits(vec![0, 2]).is_err());
    }
}
