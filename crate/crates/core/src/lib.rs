//! Behavioral simulator and analysis toolkit for level-shifted
//! Hopfield-network analog-to-digital converters.
//!
//! The crate synthesizes quantizer blocks from closed-form conductance
//! formulas, settles their neuron ODEs with fixed-step RK4, composes
//! level-shifted multi-block arrays, trains the corrective MLP encoder,
//! computes static ADC metrics (INL/DNL/gain error), and provides a
//! brute-force energy-landscape oracle for verification.

// `!(x > 0.0)` is the NaN-rejecting form of these validations, and the
// matrix loops read best with explicit indices.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod activation;
pub mod array;
pub mod config;
pub mod dynamics;
pub mod encoder;
pub mod error;
pub mod landscape;
pub mod metrics;
pub mod network;
pub mod rng;
pub mod run;

pub use activation::{activation, activation_inverse, ActivationSpec, Polarity};
pub use array::{
    calibrate_refs, quantize, shifted_input, sweep, CalibrationOutcome, Quantized,
    QuantizerArraySpec, RawCode, ShiftSign, TransferRow, TransferTable,
};
pub use config::{echo_config, load_config, load_config_file, RunConfig};
pub use dynamics::{
    default_dt, derivative, read_code, settle, settle_from, simulate_samples, simulate_waveform,
    step_rk4, NeuronState, ResetPolicy, SettleOptions, SettleResult, WaveformSample,
};
pub use encoder::{
    encode, forward, gradient_check, init_mlp, train, DatasetRow, EncoderDataset, MlpEncoder,
    TrainConfig, TrainOutcome,
};
pub use error::{Error, Result};
pub use landscape::{
    enumerate_local_minima, global_min_code, landscape_table, LandscapeReport, LandscapeRow,
};
pub use metrics::{inl_dnl, metrics_from_table, transitions, AdcMetrics, Fit};
pub use network::{
    energy, energy_of_code, energy_of_state, ideal_code, synth_normalized, synth_scaled, CodeWord,
    EnergyOperand, Formulation, NetworkSpec,
};
