//! Continuous-time settling of one quantizer block.
//!
//! Integrates the neuron current balance
//! `C du_i/dt = sum_j T_ij V_j - T_i u_i + T_Ini V_in + T_Ri V_ref`
//! with classical fixed-step RK4 (no adaptive stepping, so runs are
//! bit-reproducible), then reads the binary code off the output rails.

use serde::{Deserialize, Serialize};

use crate::activation::activation;
use crate::error::{Error, Result};
use crate::network::{energy_of_state, CodeWord, NetworkSpec};

/// Internal and output voltages of the N neurons. `v` is always derived
/// from `u`; it is cached, never independently mutated.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronState {
    u: Vec<f64>,
    v: Vec<f64>,
}

impl NeuronState {
    pub fn from_u(spec: &NetworkSpec, u: Vec<f64>) -> Self {
        let v = u
            .iter()
            .map(|&ui| activation(ui, &spec.activation))
            .collect();
        NeuronState { u, v }
    }

    pub fn zeros(spec: &NetworkSpec) -> Self {
        Self::from_u(spec, vec![0.0; spec.n_bits])
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResetPolicy {
    /// Reset u to zero before each sample, suppressing hysteresis.
    ZeroState,
    /// Carry the previous settled state into the next sample.
    HoldPrevious,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettleOptions {
    /// Integration step, seconds.
    pub dt: f64,
    pub max_steps: usize,
    /// Convergence threshold on the max-norm of du/dt, volts/second.
    pub tol: f64,
    pub reset_policy: ResetPolicy,
    pub record_energy: bool,
}

impl SettleOptions {
    /// Defaults sized for the given network: dt from the fastest time
    /// constant and the sigmoid-slope stability bound.
    pub fn for_network(spec: &NetworkSpec) -> Self {
        SettleOptions {
            dt: default_dt(spec),
            max_steps: 1_000_000,
            tol: 1e-6,
            reset_policy: ResetPolicy::ZeroState,
            record_energy: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::Parameter(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::Parameter("max_steps must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Parameter(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        Ok(())
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_reset_policy(mut self, policy: ResetPolicy) -> Self {
        self.reset_policy = policy;
        self
    }

    pub fn with_record_energy(mut self, record: bool) -> Self {
        self.record_energy = record;
        self
    }
}

/// Step size keeping RK4 stable: 1/50 of the fastest linear time
/// constant, capped by the worst-case sigmoid-slope coupling stiffness.
pub fn default_dt(spec: &NetworkSpec) -> f64 {
    let n = spec.n_bits;
    let max_leak = (0..n)
        .map(|i| spec.effective_conductance(i))
        .fold(0.0f64, f64::max);
    let max_coupling = (0..n)
        .map(|i| spec.t_matrix[i].iter().map(|t| t.abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    let slope_max = spec.activation.gain_lambda * spec.activation.swing().abs() / 4.0;
    let stiffness = (max_coupling * slope_max + max_leak) / spec.capacitance;
    let tau_min = spec.capacitance / max_leak;
    // 2.0 sits 28% below RK4's real-axis stability limit of 2.785.
    (tau_min / 50.0).min(2.0 / stiffness)
}

#[derive(Debug, Clone)]
pub struct SettleResult {
    pub final_state: NeuronState,
    pub code: CodeWord,
    pub steps: usize,
    pub converged: bool,
    /// (time, energy) samples when requested; energy includes the
    /// integral term so it is the quantity the dynamics descend.
    pub energy_trace: Option<Vec<(f64, f64)>>,
}

/// Per-neuron time derivative of the internal voltages.
pub fn derivative(spec: &NetworkSpec, u: &[f64], v_in: f64) -> Vec<f64> {
    let n = spec.n_bits;
    let v: Vec<f64> = u
        .iter()
        .map(|&ui| activation(ui, &spec.activation))
        .collect();
    (0..n)
        .map(|i| {
            let coupling: f64 = (0..n).map(|j| spec.t_matrix[i][j] * v[j]).sum();
            (coupling - spec.effective_conductance(i) * u[i] + spec.input_current(i, v_in))
                / spec.capacitance
        })
        .collect()
}

/// Allocation-free evaluator for the settle loop: leak conductances and
/// source currents are frozen once per (spec, v_in).
struct Evaluator<'a> {
    spec: &'a NetworkSpec,
    leak: Vec<f64>,
    current: Vec<f64>,
    inv_c: f64,
}

impl<'a> Evaluator<'a> {
    fn new(spec: &'a NetworkSpec, v_in: f64) -> Self {
        let n = spec.n_bits;
        Evaluator {
            spec,
            leak: (0..n).map(|i| spec.effective_conductance(i)).collect(),
            current: (0..n).map(|i| spec.input_current(i, v_in)).collect(),
            inv_c: 1.0 / spec.capacitance,
        }
    }

    fn deriv_into(&self, u: &[f64], v_buf: &mut [f64], out: &mut [f64]) {
        let n = u.len();
        for i in 0..n {
            v_buf[i] = activation(u[i], &self.spec.activation);
        }
        for i in 0..n {
            let row = &self.spec.t_matrix[i];
            let mut acc = self.current[i] - self.leak[i] * u[i];
            for j in 0..n {
                acc += row[j] * v_buf[j];
            }
            out[i] = acc * self.inv_c;
        }
    }
}

/// Scratch buffers for one RK4 step.
struct Rk4Scratch {
    v_buf: Vec<f64>,
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    stage: Vec<f64>,
}

impl Rk4Scratch {
    fn new(n: usize) -> Self {
        Rk4Scratch {
            v_buf: vec![0.0; n],
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            stage: vec![0.0; n],
        }
    }

    /// One classical RK4 step in place; `k1` must already hold f(u).
    fn advance(&mut self, eval: &Evaluator<'_>, u: &mut [f64], dt: f64) {
        let n = u.len();
        let half = 0.5 * dt;
        for i in 0..n {
            self.stage[i] = u[i] + half * self.k1[i];
        }
        eval.deriv_into(&self.stage, &mut self.v_buf, &mut self.k2);
        for i in 0..n {
            self.stage[i] = u[i] + half * self.k2[i];
        }
        eval.deriv_into(&self.stage, &mut self.v_buf, &mut self.k3);
        for i in 0..n {
            self.stage[i] = u[i] + dt * self.k3[i];
        }
        eval.deriv_into(&self.stage, &mut self.v_buf, &mut self.k4);
        for i in 0..n {
            u[i] += dt / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

/// Single RK4 update of a state; `v` is recomputed from the new `u`.
pub fn step_rk4(
    spec: &NetworkSpec,
    state: &NeuronState,
    v_in: f64,
    dt: f64,
) -> Result<NeuronState> {
    if !(dt > 0.0) {
        return Err(Error::Parameter(format!("dt must be positive, got {dt}")));
    }
    let eval = Evaluator::new(spec, v_in);
    let mut scratch = Rk4Scratch::new(spec.n_bits);
    let mut u = state.u.clone();
    eval.deriv_into(&u, &mut scratch.v_buf, &mut scratch.k1);
    scratch.advance(&eval, &mut u, dt);
    if u.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericOverflow {
            step: 1,
            detail: "non-finite internal voltage after RK4 step".into(),
        });
    }
    Ok(NeuronState::from_u(spec, u))
}

/// Settle from the zero reset state (u = 0).
pub fn settle(spec: &NetworkSpec, v_in: f64, opts: &SettleOptions) -> Result<SettleResult> {
    settle_from(spec, v_in, vec![0.0; spec.n_bits], opts)
}

/// Settle from an arbitrary initial internal-voltage vector.
pub fn settle_from(
    spec: &NetworkSpec,
    v_in: f64,
    init_u: Vec<f64>,
    opts: &SettleOptions,
) -> Result<SettleResult> {
    opts.validate()?;
    if init_u.len() != spec.n_bits {
        return Err(Error::Parameter(format!(
            "initial state length {} does not match n_bits {}",
            init_u.len(),
            spec.n_bits
        )));
    }
    let eval = Evaluator::new(spec, v_in);
    let mut scratch = Rk4Scratch::new(spec.n_bits);
    let mut u = init_u;
    let mut trace = if opts.record_energy {
        Some(Vec::new())
    } else {
        None
    };

    let record = |t: f64, u: &[f64], trace: &mut Option<Vec<(f64, f64)>>| -> Result<()> {
        if let Some(tr) = trace {
            let v: Vec<f64> = u
                .iter()
                .map(|&ui| activation(ui, &spec.activation))
                .collect();
            tr.push((t, energy_of_state(spec, &v, v_in, true)?));
        }
        Ok(())
    };

    record(0.0, &u, &mut trace)?;
    let mut steps = 0;
    let mut converged = false;
    while steps < opts.max_steps {
        eval.deriv_into(&u, &mut scratch.v_buf, &mut scratch.k1);
        let norm = scratch.k1.iter().fold(0.0f64, |m, &d| m.max(d.abs()));
        if norm < opts.tol {
            converged = true;
            break;
        }
        scratch.advance(&eval, &mut u, opts.dt);
        steps += 1;
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::NumericOverflow {
                step: steps,
                detail: format!("non-finite internal voltage while settling at v_in = {v_in}"),
            });
        }
        record(steps as f64 * opts.dt, &u, &mut trace)?;
    }
    if !converged && steps == opts.max_steps {
        // One last check so `converged` reflects the final state.
        eval.deriv_into(&u, &mut scratch.v_buf, &mut scratch.k1);
        let norm = scratch.k1.iter().fold(0.0f64, |m, &d| m.max(d.abs()));
        converged = norm < opts.tol;
    }
    let final_state = NeuronState::from_u(spec, u);
    let code = read_code(&final_state, spec);
    Ok(SettleResult {
        final_state,
        code,
        steps,
        converged,
        energy_trace: trace,
    })
}

/// Read the binary code: bit i is 1 iff the output voltage is strictly
/// closer to the logic-high rail than to the logic-low rail, where
/// "logic high" is the rail reached for large positive input. The exact
/// midpoint reads as 0.
pub fn read_code(state: &NeuronState, spec: &NetworkSpec) -> CodeWord {
    let low = spec.activation.logic_low_rail();
    let half = spec.activation.swing().abs() / 2.0;
    let bits = state
        .v
        .iter()
        .map(|&vi| u8::from((vi - low).abs() > half))
        .collect();
    CodeWord::from_bits(bits).expect("bits are 0/1 by construction")
}

#[derive(Debug, Clone)]
pub struct WaveformSample {
    pub time: f64,
    pub v_in: f64,
    pub code: CodeWord,
}

/// Sample a waveform function at a fixed period and settle the block at
/// each instant, applying the reset policy between samples.
pub fn simulate_waveform<F: Fn(f64) -> f64>(
    spec: &NetworkSpec,
    waveform: F,
    sample_period: f64,
    n_samples: usize,
    opts: &SettleOptions,
) -> Result<Vec<WaveformSample>> {
    if !(sample_period > 0.0) {
        return Err(Error::Parameter(format!(
            "sample_period must be positive, got {sample_period}"
        )));
    }
    let samples: Vec<f64> = (0..n_samples)
        .map(|k| waveform(k as f64 * sample_period))
        .collect();
    simulate_samples(spec, &samples, sample_period, opts)
}

/// Same as [`simulate_waveform`] for an already-sampled series.
pub fn simulate_samples(
    spec: &NetworkSpec,
    samples: &[f64],
    sample_period: f64,
    opts: &SettleOptions,
) -> Result<Vec<WaveformSample>> {
    if !(sample_period > 0.0) {
        return Err(Error::Parameter(format!(
            "sample_period must be positive, got {sample_period}"
        )));
    }
    let mut out = Vec::with_capacity(samples.len());
    let mut carry: Option<Vec<f64>> = None;
    for (k, &v_in) in samples.iter().enumerate() {
        let init = match (opts.reset_policy, &carry) {
            (ResetPolicy::HoldPrevious, Some(u)) => u.clone(),
            _ => vec![0.0; spec.n_bits],
        };
        let result = settle_from(spec, v_in, init, opts)?;
        carry = Some(result.final_state.u.clone());
        out.push(WaveformSample {
            time: k as f64 * sample_period,
            v_in,
            code: result.code,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::{ActivationSpec, Polarity};
    use crate::network::{synth_normalized, synth_scaled, Formulation};

    fn single_neuron() -> NetworkSpec {
        let spec = NetworkSpec {
            n_bits: 1,
            t_matrix: vec![vec![0.0]],
            t_in: vec![1.0],
            t_ref: vec![1.0],
            v_ref: 0.0,
            capacitance: 1.0,
            activation: ActivationSpec::new(Polarity::Noninverting, 100.0, 0.0, 1.0).unwrap(),
            formulation: Formulation::PositiveConductance,
        };
        spec.validate().unwrap();
        spec
    }

    #[test]
    fn derivative_single_neuron_direct_substitution() {
        let spec = single_neuron();
        let d = derivative(&spec, &[0.0], 0.5);
        // No coupling, u = 0, V_ref = 0: du/dt = T_In0 * v_in / C.
        // The coupling row is all zero so the activation value at u=0
        // contributes nothing.
        assert!((d[0] - 0.5).abs() < 1e-15, "got {}", d[0]);
    }

    #[test]
    fn settled_state_is_a_fixed_point() {
        let spec = synth_normalized(2, Formulation::ClassicSigned).unwrap();
        let opts = SettleOptions {
            tol: 1e-10,
            ..SettleOptions::for_network(&spec)
        };
        let result = settle(&spec, 1.3, &opts).unwrap();
        assert!(result.converged);
        for i in 0..2 {
            let coupling: f64 = (0..2)
                .map(|j| spec.t_matrix[i][j] * result.final_state.v()[j])
                .sum();
            let rhs = (coupling + spec.input_current(i, 1.3)) / spec.effective_conductance(i);
            let residual = (result.final_state.u()[i] - rhs).abs();
            assert!(residual < 1e-9, "residual {residual} at neuron {i}");
        }
    }

    #[test]
    fn rk4_matches_exponential_to_fourth_order() {
        // Linear RC test double: the coupling row is zero and the input
        // current is constant, so du/dt = (I - T u)/C exactly, with
        // closed-form solution u(t) = I/T + (u0 - I/T) exp(-T t / C).
        let spec = single_neuron(); // T_0 = 2, I = v_in here
        let v_in = 0.8;
        let exact = |t: f64| 0.4 + (0.0 - 0.4) * (-2.0 * t).exp();
        let run = |dt: f64| {
            let mut state = NeuronState::from_u(&spec, vec![0.0]);
            let steps = (1.0 / dt).round() as usize;
            for _ in 0..steps {
                state = step_rk4(&spec, &state, v_in, dt).unwrap();
            }
            (state.u()[0] - exact(1.0)).abs()
        };
        let err_coarse = run(0.05);
        let err_fine = run(0.025);
        assert!(err_coarse < 1e-6);
        let order = (err_coarse / err_fine).log2();
        assert!(
            (3.5..=4.5).contains(&order),
            "observed order {order} (errors {err_coarse:e}, {err_fine:e})"
        );
    }

    #[test]
    fn step_rk4_leaves_fixed_point_unchanged() {
        let spec = single_neuron();
        let v_in = 0.8;
        // Equilibrium: u* = I / T with zero coupling row.
        let star = spec.input_current(0, v_in) / spec.effective_conductance(0);
        let state = NeuronState::from_u(&spec, vec![star]);
        let next = step_rk4(&spec, &state, v_in, 1e-3).unwrap();
        assert!((next.u()[0] - star).abs() < 1e-15);
    }

    #[test]
    fn reference_block_settles_to_code_zero_below_first_transition() {
        let spec = synth_scaled(2, 2.0, -0.67, -0.67, 10e-6).unwrap();
        let opts = SettleOptions::for_network(&spec);
        let result = settle(&spec, 0.1, &opts).unwrap();
        assert!(result.converged);
        assert_eq!(result.code.bits(), &[0, 0]);
    }

    #[test]
    fn reference_block_staircase_spot_checks() {
        let spec = synth_scaled(2, 2.0, -0.67, -0.67, 10e-6).unwrap();
        let opts = SettleOptions::for_network(&spec);
        for (v_in, want) in [(0.3, 0), (0.7, 1), (1.1, 2), (1.8, 3)] {
            let result = settle(&spec, v_in, &opts).unwrap();
            assert!(result.converged, "not converged at {v_in}");
            assert_eq!(result.code.value(), want, "wrong code at v_in = {v_in}");
        }
    }

    #[test]
    fn classic_block_settles_to_nearest_code() {
        let spec = synth_normalized(2, Formulation::ClassicSigned).unwrap();
        let opts = SettleOptions::for_network(&spec);
        let result = settle(&spec, 1.3, &opts).unwrap();
        assert!(result.converged);
        assert_eq!(result.code.bits(), &[1, 0], "x = 1.3 should read code 1");
        let result = settle(&spec, 3.0, &opts).unwrap();
        assert_eq!(result.code.bits(), &[1, 1], "x = 3.0 should read code 3");
    }

    #[test]
    fn halving_dt_barely_moves_the_settled_state() {
        let spec = synth_scaled(2, 2.0, -0.67, -0.67, 10e-6).unwrap();
        let opts = SettleOptions::for_network(&spec);
        let fine = SettleOptions {
            dt: opts.dt / 2.0,
            ..opts
        };
        for v_in in [0.3, 0.7, 1.1] {
            let a = settle(&spec, v_in, &opts).unwrap();
            let b = settle(&spec, v_in, &fine).unwrap();
            for i in 0..2 {
                let diff = (a.final_state.u()[i] - b.final_state.u()[i]).abs();
                assert!(diff < 1e-6, "dt sensitivity {diff} at v_in = {v_in}");
            }
        }
    }

    #[test]
    fn read_code_rails_and_midpoint() {
        let spec = synth_normalized(2, Formulation::ClassicSigned).unwrap();
        // Neuron 0 at the logic-high rail, neuron 1 at logic low.
        let state = NeuronState {
            u: vec![1.0, -1.0],
            v: vec![1.0, 0.0],
        };
        assert_eq!(read_code(&state, &spec).bits(), &[1, 0]);
        // Exact midpoint reads 0 (strict inequality).
        let mid = NeuronState {
            u: vec![0.0, 0.0],
            v: vec![0.5, 0.5],
        };
        assert_eq!(read_code(&mid, &spec).bits(), &[0, 0]);
    }

    #[test]
    fn read_code_inverting_logic_high_is_negative_rail() {
        let spec = synth_scaled(2, 2.0, -0.67, -0.67, 10e-6).unwrap();
        let state = NeuronState {
            u: vec![1.0, -1.0],
            v: vec![-0.67, 0.0],
        };
        assert_eq!(read_code(&state, &spec).bits(), &[1, 0]);
    }

    #[test]
    fn constant_waveform_gives_identical_codes() {
        let spec = synth_scaled(2, 2.0, -0.67, -0.67, 10e-6).unwrap();
        let opts = SettleOptions::for_network(&spec);
        let out = simulate_waveform(&spec, |_| 1.0, 1e-6, 16, &opts).unwrap();
        let first = out[0].code.clone();
        assert!(out.iter().all(|s| s.code == first));
    }

    #[test]
    fn settle_rejects_bad_options() {
        let spec = single_neuron();
        let mut opts = SettleOptions::for_network(&spec);
        opts.dt = 0.0;
        assert!(settle(&spec, 0.0, &opts).is_err());
        assert!(step_rk4(&spec, &NeuronState::zeros(&spec), 0.0, -1.0).is_err());
    }

    #[test]
    fn divergent_dynamics_report_the_step() {
        // A huge dt makes RK4 blow up; the error must name the step.
        let spec = synth_scaled(2, 2.0, -0.67, -0.67, 10e-6).unwrap();
        let opts = SettleOptions {
            dt: 1.0,
            max_steps: 10_000,
            tol: 1e-12,
            reset_policy: ResetPolicy::ZeroState,
            record_energy: false,
        };
        match settle(&spec, 1.0, &opts) {
            Err(Error::NumericOverflow { step, .. }) => assert!(step >= 1),
            other => panic!("expected numeric overflow, got {other:?}"),
        }
    }
}
