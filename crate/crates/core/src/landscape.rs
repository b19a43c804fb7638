//! Brute-force analysis of the energy landscape over binary codes:
//! global minima, single-bit-flip local minima, and per-input counts.
//! This is the verification oracle for the settling dynamics and the
//! reproduction of the local-minima error mechanism.

use crate::error::{Error, Result};
use crate::network::{energy_of_code, CodeWord, NetworkSpec};

/// Enumeration bound: 2^20 codes is the largest landscape we scan.
pub const MAX_ENUM_BITS: usize = 20;

#[derive(Debug, Clone)]
pub struct LandscapeReport {
    pub v_in: f64,
    /// Energy of every code, indexed by weighted value.
    pub energies: Vec<f64>,
    pub global_min: CodeWord,
    /// Codes no single bit flip of which strictly lowers the energy.
    pub local_minima: Vec<CodeWord>,
    pub is_unique: bool,
}

#[derive(Debug, Clone)]
pub struct LandscapeRow {
    pub v_in: f64,
    pub global_min: CodeWord,
    pub n_local_minima: usize,
}

fn enumerate_energies(spec: &NetworkSpec, v_in: f64) -> Result<Vec<f64>> {
    let n = spec.n_bits;
    if n > MAX_ENUM_BITS {
        return Err(Error::Parameter(format!(
            "enumeration supports at most {MAX_ENUM_BITS} bits, got {n}"
        )));
    }
    (0..(1u64 << n))
        .map(|c| energy_of_code(spec, &CodeWord::from_value(c, n), v_in))
        .collect()
}

/// Code with the lowest energy over all 2^N codes; ties break toward the
/// smaller weighted value.
pub fn global_min_code(spec: &NetworkSpec, v_in: f64) -> Result<CodeWord> {
    let energies = enumerate_energies(spec, v_in)?;
    let mut best = 0usize;
    for (c, &e) in energies.iter().enumerate() {
        if e < energies[best] {
            best = c;
        }
    }
    Ok(CodeWord::from_value(best as u64, spec.n_bits))
}

/// Full landscape report: energies, global minimum, and every
/// Hamming-1 local minimum.
pub fn enumerate_local_minima(spec: &NetworkSpec, v_in: f64) -> Result<LandscapeReport> {
    let n = spec.n_bits;
    let energies = enumerate_energies(spec, v_in)?;
    let mut local = Vec::new();
    let mut best = 0usize;
    for c in 0..energies.len() {
        if energies[c] < energies[best] {
            best = c;
        }
        let is_local_min = (0..n).all(|i| energies[c ^ (1 << i)] >= energies[c]);
        if is_local_min {
            local.push(CodeWord::from_value(c as u64, n));
        }
    }
    let is_unique = local.len() == 1;
    Ok(LandscapeReport {
        v_in,
        energies,
        global_min: CodeWord::from_value(best as u64, n),
        local_minima: local,
        is_unique,
    })
}

/// Landscape summary on a uniform input grid, endpoints included.
pub fn landscape_table(
    spec: &NetworkSpec,
    v_lo: f64,
    v_hi: f64,
    n_points: usize,
) -> Result<Vec<LandscapeRow>> {
    if n_points == 0 {
        return Err(Error::Parameter("n_points must be at least 1".into()));
    }
    if !(v_lo.is_finite() && v_hi.is_finite()) || v_lo > v_hi {
        return Err(Error::Parameter(format!(
            "invalid landscape bounds [{v_lo}, {v_hi}]"
        )));
    }
    (0..n_points)
        .map(|k| {
            let v_in = if n_points == 1 {
                v_lo
            } else {
                v_lo + (v_hi - v_lo) * k as f64 / (n_points - 1) as f64
            };
            let report = enumerate_local_minima(spec, v_in)?;
            Ok(LandscapeRow {
                v_in,
                global_min: report.global_min,
                n_local_minima: report.local_minima.len(),
            })
        })
        .collect()
}
