//! Python bindings for the Hopfield ADC simulator.
//!
//! Exposes the block/array/encoder types and the main operations:
//! synthesis, settling, sweeping, calibration, metrics, the energy
//! landscape oracle, and encoder training.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use nadc_core::array as core_array;
use nadc_core::dynamics as core_dyn;
use nadc_core::encoder as core_enc;
use nadc_core::landscape as core_land;
use nadc_core::metrics as core_metrics;
use nadc_core::network as core_net;
use nadc_core::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Parameter(_) | Error::Config(_) | Error::Domain(_) | Error::Data(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn parse_formulation(s: &str) -> PyResult<core_net::Formulation> {
    match s {
        "classic_signed" => Ok(core_net::Formulation::ClassicSigned),
        "positive_conductance" => Ok(core_net::Formulation::PositiveConductance),
        other => Err(PyValueError::new_err(format!(
            "unknown formulation {other:?}; use \"classic_signed\" or \"positive_conductance\""
        ))),
    }
}

fn parse_shift_sign(s: &str) -> PyResult<core_array::ShiftSign> {
    match s {
        "add" => Ok(core_array::ShiftSign::Add),
        "subtract" => Ok(core_array::ShiftSign::Subtract),
        other => Err(PyValueError::new_err(format!(
            "unknown shift_sign {other:?}; use \"add\" or \"subtract\""
        ))),
    }
}

fn settle_options(
    spec: &core_net::NetworkSpec,
    dt: Option<f64>,
    max_steps: usize,
    tol: f64,
) -> core_dyn::SettleOptions {
    let mut opts = core_dyn::SettleOptions::for_network(spec);
    if let Some(dt) = dt {
        opts.dt = dt;
    }
    opts.max_steps = max_steps;
    opts.tol = tol;
    opts
}

/// One Hopfield quantizer block.
#[pyclass(name = "Network", skip_from_py_object)]
#[derive(Clone)]
struct PyNetwork {
    inner: core_net::NetworkSpec,
}

#[pymethods]
impl PyNetwork {
    #[getter]
    fn n_bits(&self) -> usize {
        self.inner.n_bits
    }

    #[getter]
    fn t_matrix(&self) -> Vec<Vec<f64>> {
        self.inner.t_matrix.clone()
    }

    #[getter]
    fn t_in(&self) -> Vec<f64> {
        self.inner.t_in.clone()
    }

    #[getter]
    fn t_ref(&self) -> Vec<f64> {
        self.inner.t_ref.clone()
    }

    #[getter]
    fn v_ref(&self) -> f64 {
        self.inner.v_ref
    }

    #[getter]
    fn gain_lambda(&self) -> f64 {
        self.inner.activation.gain_lambda
    }

    #[getter]
    fn logic_high(&self) -> f64 {
        self.inner.activation.logic_high_rail()
    }

    fn with_v_ref(&self, v_ref: f64) -> PyNetwork {
        PyNetwork {
            inner: self.inner.clone().with_v_ref(v_ref),
        }
    }

    fn with_gain(&self, gain_lambda: f64) -> PyResult<PyNetwork> {
        Ok(PyNetwork {
            inner: self.inner.clone().with_gain(gain_lambda).map_err(py_err)?,
        })
    }

    /// Settle from the zero reset state; returns (code, converged, steps).
    #[pyo3(signature = (v_in, dt=None, max_steps=1_000_000, tol=1e-6))]
    fn settle(
        &self,
        v_in: f64,
        dt: Option<f64>,
        max_steps: usize,
        tol: f64,
    ) -> PyResult<(u64, bool, usize)> {
        let opts = settle_options(&self.inner, dt, max_steps, tol);
        let result = core_dyn::settle(&self.inner, v_in, &opts).map_err(py_err)?;
        Ok((result.code.value(), result.converged, result.steps))
    }

    /// Settle at each sample of a waveform; returns [(time, v_in, code)].
    #[pyo3(signature = (samples, sample_period, hold_previous=false))]
    fn simulate(
        &self,
        samples: Vec<f64>,
        sample_period: f64,
        hold_previous: bool,
    ) -> PyResult<Vec<(f64, f64, u64)>> {
        let mut opts = core_dyn::SettleOptions::for_network(&self.inner);
        if hold_previous {
            opts.reset_policy = core_dyn::ResetPolicy::HoldPrevious;
        }
        let out = core_dyn::simulate_samples(&self.inner, &samples, sample_period, &opts)
            .map_err(py_err)?;
        Ok(out
            .into_iter()
            .map(|s| (s.time, s.v_in, s.code.value()))
            .collect())
    }

    fn derivative(&self, u: Vec<f64>, v_in: f64) -> Vec<f64> {
        core_dyn::derivative(&self.inner, &u, v_in)
    }

    /// Energy of a code word (by weighted value) at the given input.
    fn energy_of_code(&self, code: u64, v_in: f64) -> PyResult<f64> {
        let word = core_net::CodeWord::from_value(code, self.inner.n_bits);
        core_net::energy_of_code(&self.inner, &word, v_in).map_err(py_err)
    }

    #[pyo3(signature = (v, v_in, include_integral=false))]
    fn energy_of_state(&self, v: Vec<f64>, v_in: f64, include_integral: bool) -> PyResult<f64> {
        core_net::energy_of_state(&self.inner, &v, v_in, include_integral).map_err(py_err)
    }

    /// Brute-force global energy minimum over all codes.
    fn global_min_code(&self, v_in: f64) -> PyResult<u64> {
        Ok(core_land::global_min_code(&self.inner, v_in)
            .map_err(py_err)?
            .value())
    }

    /// Weighted values of every single-bit-flip local minimum.
    fn local_minima(&self, v_in: f64) -> PyResult<Vec<u64>> {
        let report = core_land::enumerate_local_minima(&self.inner, v_in).map_err(py_err)?;
        Ok(report.local_minima.iter().map(|c| c.value()).collect())
    }
}

/// Swept transfer characteristic of a quantizer array.
#[pyclass(name = "TransferTable")]
struct PyTransferTable {
    inner: core_array::TransferTable,
}

#[pymethods]
impl PyTransferTable {
    /// Rows as (v_in, raw_bits, level).
    fn rows(&self) -> Vec<(f64, String, usize)> {
        self.inner
            .rows
            .iter()
            .map(|r| (r.v_in, r.raw.bit_string(), r.level))
            .collect()
    }

    fn n_levels(&self) -> usize {
        self.inner.n_levels()
    }

    fn is_monotone(&self) -> bool {
        self.inner.is_monotone()
    }

    fn transitions(&self) -> PyResult<Vec<f64>> {
        core_metrics::transitions(&self.inner).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.inner.rows.len()
    }
}

/// Level-shifted multi-block quantizer.
#[pyclass(name = "QuantizerArray")]
struct PyQuantizerArray {
    inner: core_array::QuantizerArraySpec,
}

#[pymethods]
impl PyQuantizerArray {
    #[new]
    #[pyo3(signature = (n_blocks, delta_v, shift_sign, block, v_in_low, v_in_high))]
    fn new(
        n_blocks: usize,
        delta_v: f64,
        shift_sign: &str,
        block: &PyNetwork,
        v_in_low: f64,
        v_in_high: f64,
    ) -> PyResult<Self> {
        let inner = core_array::QuantizerArraySpec::new(
            n_blocks,
            delta_v,
            parse_shift_sign(shift_sign)?,
            block.inner.clone(),
            (v_in_low, v_in_high),
        )
        .map_err(py_err)?;
        Ok(PyQuantizerArray { inner })
    }

    #[getter]
    fn v_refs(&self) -> Vec<f64> {
        self.inner.v_refs.clone()
    }

    fn set_v_refs(&mut self, v_refs: Vec<f64>) -> PyResult<()> {
        self.inner = self.inner.clone().with_v_refs(v_refs).map_err(py_err)?;
        Ok(())
    }

    fn shifted_input(&self, v_in: f64, block_index: usize) -> PyResult<f64> {
        core_array::shifted_input(v_in, block_index, &self.inner).map_err(py_err)
    }

    /// Returns (raw_bits, clamped).
    fn quantize(&self, v_in: f64) -> PyResult<(String, bool)> {
        let opts = core_dyn::SettleOptions::for_network(&self.inner.block_template);
        let q = core_array::quantize(&self.inner, v_in, &opts).map_err(py_err)?;
        Ok((q.raw.bit_string(), q.clamped))
    }

    fn sweep(&self, v_lo: f64, v_hi: f64, n_points: usize) -> PyResult<PyTransferTable> {
        let opts = core_dyn::SettleOptions::for_network(&self.inner.block_template);
        let table = core_array::sweep(&self.inner, v_lo, v_hi, n_points, &opts).map_err(py_err)?;
        Ok(PyTransferTable { inner: table })
    }

    /// Grid-search per-block reference voltages; returns a dict with
    /// v_refs, levels, and max_abs_inl, and updates this array.
    fn calibrate<'py>(
        &mut self,
        py: Python<'py>,
        targets: Vec<f64>,
        grid_low: f64,
        grid_high: f64,
        grid_step: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let opts = core_dyn::SettleOptions::for_network(&self.inner.block_template);
        let outcome = core_array::calibrate_refs(
            &self.inner,
            &targets,
            (grid_low, grid_high, grid_step),
            &opts,
        )
        .map_err(py_err)?;
        self.inner = self
            .inner
            .clone()
            .with_v_refs(outcome.v_refs.clone())
            .map_err(py_err)?;
        let dict = PyDict::new(py);
        dict.set_item("v_refs", outcome.v_refs)?;
        dict.set_item("levels", outcome.levels)?;
        dict.set_item("max_abs_inl", outcome.max_abs_inl)?;
        dict.set_item("non_monotonicity", outcome.non_monotonicity)?;
        Ok(dict)
    }
}

/// Corrective MLP encoder.
#[pyclass(name = "Encoder")]
struct PyEncoder {
    inner: core_enc::MlpEncoder,
}

#[pymethods]
impl PyEncoder {
    #[new]
    #[pyo3(signature = (layer_sizes, seed=42, init_range=0.5))]
    fn new(layer_sizes: Vec<usize>, seed: u64, init_range: f64) -> PyResult<Self> {
        Ok(PyEncoder {
            inner: core_enc::init_mlp(&layer_sizes, seed, init_range).map_err(py_err)?,
        })
    }

    #[getter]
    fn layer_sizes(&self) -> Vec<usize> {
        self.inner.layer_sizes.clone()
    }

    fn forward(&self, input: Vec<f64>) -> PyResult<Vec<f64>> {
        core_enc::forward(&self.inner, &input).map_err(py_err)
    }

    /// Threshold-encode a raw bit pattern to a weighted binary value.
    fn encode_bits(&self, bits: Vec<u8>) -> PyResult<u64> {
        let raw = core_array::RawCode::from_bits(bits).map_err(py_err)?;
        Ok(core_enc::encode(&self.inner, &raw).value())
    }

    /// Train on a swept transfer table (levels become the targets);
    /// returns a dict with exact_match, epochs, and final_loss.
    #[pyo3(signature = (table, learning_rate=0.3, momentum=0.9, max_epochs=20_000))]
    fn train_on_table<'py>(
        &mut self,
        py: Python<'py>,
        table: &PyTransferTable,
        learning_rate: f64,
        momentum: f64,
        max_epochs: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        let out_bits = *self.inner.layer_sizes.last().unwrap();
        let dataset =
            core_enc::EncoderDataset::from_table(&table.inner, out_bits).map_err(py_err)?;
        self.train_dataset(py, dataset, learning_rate, momentum, max_epochs)
    }

    /// Train on explicit rows of (input bits, target bits).
    #[pyo3(signature = (inputs, targets, learning_rate=0.3, momentum=0.9, max_epochs=20_000))]
    fn train_rows<'py>(
        &mut self,
        py: Python<'py>,
        inputs: Vec<Vec<u8>>,
        targets: Vec<Vec<u8>>,
        learning_rate: f64,
        momentum: f64,
        max_epochs: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        if inputs.len() != targets.len() {
            return Err(PyValueError::new_err("inputs and targets differ in length"));
        }
        let rows = inputs
            .into_iter()
            .zip(targets)
            .map(|(input, target)| core_enc::DatasetRow { input, target })
            .collect();
        let dataset = core_enc::EncoderDataset::new(rows).map_err(py_err)?;
        self.train_dataset(py, dataset, learning_rate, momentum, max_epochs)
    }

    /// Max relative backprop-vs-finite-difference discrepancy.
    fn gradient_check(
        &self,
        inputs: Vec<Vec<u8>>,
        targets: Vec<Vec<u8>>,
        epsilon: f64,
    ) -> PyResult<f64> {
        let rows = inputs
            .into_iter()
            .zip(targets)
            .map(|(input, target)| core_enc::DatasetRow { input, target })
            .collect();
        let dataset = core_enc::EncoderDataset::new(rows).map_err(py_err)?;
        core_enc::gradient_check(&self.inner, &dataset, epsilon).map_err(py_err)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner)
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<PyEncoder> {
        let inner: core_enc::MlpEncoder =
            serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        inner.validate().map_err(py_err)?;
        Ok(PyEncoder { inner })
    }
}

impl PyEncoder {
    fn train_dataset<'py>(
        &mut self,
        py: Python<'py>,
        dataset: core_enc::EncoderDataset,
        learning_rate: f64,
        momentum: f64,
        max_epochs: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        let config = core_enc::TrainConfig {
            learning_rate,
            momentum,
            max_epochs,
            ..core_enc::TrainConfig::default()
        };
        let outcome = core_enc::train(&self.inner, &dataset, &config).map_err(py_err)?;
        self.inner = outcome.mlp;
        let dict = PyDict::new(py);
        dict.set_item("exact_match", outcome.exact_match)?;
        dict.set_item("epochs", outcome.epochs)?;
        dict.set_item("final_loss", outcome.loss_history.last().copied())?;
        Ok(dict)
    }
}

/// Voltage-domain block from the scaled conductance formulas.
#[pyfunction]
#[pyo3(signature = (n_bits, v_in_max, v_swing, v_ref, unit_scale, gain_lambda=None, capacitance=None))]
fn synth_scaled(
    n_bits: usize,
    v_in_max: f64,
    v_swing: f64,
    v_ref: f64,
    unit_scale: f64,
    gain_lambda: Option<f64>,
    capacitance: Option<f64>,
) -> PyResult<PyNetwork> {
    let mut spec =
        core_net::synth_scaled(n_bits, v_in_max, v_swing, v_ref, unit_scale).map_err(py_err)?;
    if let Some(gain) = gain_lambda {
        spec = spec.with_gain(gain).map_err(py_err)?;
    }
    if let Some(c) = capacitance {
        spec = spec.with_capacitance(c).map_err(py_err)?;
    }
    Ok(PyNetwork { inner: spec })
}

/// Dimensionless block with unit capacitance (input in code units).
#[pyfunction]
fn synth_normalized(n_bits: usize, formulation: &str) -> PyResult<PyNetwork> {
    Ok(PyNetwork {
        inner: core_net::synth_normalized(n_bits, parse_formulation(formulation)?)
            .map_err(py_err)?,
    })
}

/// Nearest code to v_in/lsb (half-up, clamped), as a weighted value.
#[pyfunction]
fn ideal_code(v_in: f64, n_bits: usize, lsb: f64) -> PyResult<u64> {
    Ok(core_net::ideal_code(v_in, n_bits, lsb)
        .map_err(py_err)?
        .value())
}

/// INL/DNL/gain error of a transition list against an endpoint fit.
#[pyfunction]
fn inl_dnl<'py>(
    py: Python<'py>,
    transitions: Vec<f64>,
    ideal_lsb: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let m = core_metrics::inl_dnl(&transitions, ideal_lsb, core_metrics::Fit::Endpoint)
        .map_err(py_err)?;
    let dict = PyDict::new(py);
    dict.set_item("transitions", m.transitions)?;
    dict.set_item("inl", m.inl)?;
    dict.set_item("dnl", m.dnl)?;
    dict.set_item("max_abs_inl", m.max_abs_inl)?;
    dict.set_item("max_abs_dnl", m.max_abs_dnl)?;
    dict.set_item("gain_error", m.gain_error)?;
    dict.set_item("monotone", m.monotone)?;
    Ok(dict)
}

#[pymodule]
fn nadc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNetwork>()?;
    m.add_class::<PyQuantizerArray>()?;
    m.add_class::<PyTransferTable>()?;
    m.add_class::<PyEncoder>()?;
    m.add_function(wrap_pyfunction!(synth_scaled, m)?)?;
    m.add_function(wrap_pyfunction!(synth_normalized, m)?)?;
    m.add_function(wrap_pyfunction!(ideal_code, m)?)?;
    m.add_function(wrap_pyfunction!(inl_dnl, m)?)?;
    Ok(())
}
