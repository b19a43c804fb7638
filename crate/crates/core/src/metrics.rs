//! Static ADC quality metrics from a swept transfer table: code
//! transition levels, INL/DNL against an endpoint-fit line, gain error,
//! and monotonicity.

use crate::array::TransferTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fit {
    /// Reference line through the first and last transition; pins INL to
    /// zero at both ends.
    Endpoint,
}

#[derive(Debug, Clone)]
pub struct AdcMetrics {
    /// Code transition input voltages, one per level boundary.
    pub transitions: Vec<f64>,
    /// Per-transition INL in fitted LSB.
    pub inl: Vec<f64>,
    /// Per-step DNL in fitted LSB (one fewer than transitions).
    pub dnl: Vec<f64>,
    pub max_abs_inl: f64,
    pub max_abs_dnl: f64,
    /// (LSB_fit - ideal_lsb)/ideal_lsb.
    pub gain_error: f64,
    /// True when the transitions are strictly increasing.
    pub monotone: bool,
}

/// Extract code transition voltages: the midpoint of each pair of
/// consecutive sweep inputs whose level differs. Emitted in sweep order,
/// so a non-monotone table still yields its boundaries. Resolution is
/// half a grid step.
pub fn transitions(table: &TransferTable) -> Result<Vec<f64>> {
    if table.rows.is_empty() {
        return Err(Error::Metrics("transfer table is empty".into()));
    }
    let ts: Vec<f64> = table
        .rows
        .windows(2)
        .filter(|w| w[0].level != w[1].level)
        .map(|w| 0.5 * (w[0].v_in + w[1].v_in))
        .collect();
    if ts.is_empty() {
        return Err(Error::Metrics(
            "fewer than 2 distinct levels; no transitions to extract".into(),
        ));
    }
    Ok(ts)
}

/// INL/DNL/gain error of a transition list against an endpoint fit.
pub fn inl_dnl(transitions: &[f64], ideal_lsb: f64, fit: Fit) -> Result<AdcMetrics> {
    let Fit::Endpoint = fit;
    let k = transitions.len();
    if k < 2 {
        return Err(Error::Metrics(format!(
            "need at least 2 transitions, got {k}"
        )));
    }
    if !(ideal_lsb > 0.0) {
        return Err(Error::Metrics(format!(
            "ideal_lsb must be positive, got {ideal_lsb}"
        )));
    }
    let first = transitions[0];
    let last = transitions[k - 1];
    if first == last {
        return Err(Error::Metrics(
            "degenerate endpoint fit: first and last transition coincide".into(),
        ));
    }
    let lsb_fit = (last - first) / (k - 1) as f64;
    let inl: Vec<f64> = transitions
        .iter()
        .enumerate()
        .map(|(i, &t)| (t - (first + i as f64 * lsb_fit)) / lsb_fit)
        .collect();
    let dnl: Vec<f64> = transitions
        .windows(2)
        .map(|w| (w[1] - w[0]) / lsb_fit - 1.0)
        .collect();
    let max_abs_inl = inl.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let max_abs_dnl = dnl.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let monotone = transitions.windows(2).all(|w| w[0] < w[1]);
    Ok(AdcMetrics {
        transitions: transitions.to_vec(),
        inl,
        dnl,
        max_abs_inl,
        max_abs_dnl,
        gain_error: (lsb_fit - ideal_lsb) / ideal_lsb,
        monotone,
    })
}

/// Convenience: extract transitions from a table and compute the
/// metrics in one go.
pub fn metrics_from_table(table: &TransferTable, ideal_lsb: f64) -> Result<AdcMetrics> {
    let ts = transitions(table)?;
    let mut m = inl_dnl(&ts, ideal_lsb, Fit::Endpoint)?;
    m.monotone = m.monotone && table.is_monotone();
    Ok(m)
}
