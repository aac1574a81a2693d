use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::mask::SpectralMask;
use super::rrc::FilterTaps;
use crate::error::{invalid, Result};

/// Magnitudes below this are reported as this many dB.
pub const DB_FLOOR: f64 = -300.0;

/// Allowed linear excess over the mask on the design grid.
pub const GRID_TOLERANCE: f64 = 1e-9;
/// Allowed excess over the mask on the verification grid, in dB.
pub const VERIFY_TOLERANCE_DB: f64 = 0.05;

/// `Σ hₙ e^{−j2πfn}` with `n` counted from the first coefficient.
pub fn freq_response(coeffs: &[f64], f: f64) -> Complex64 {
    let w = -2.0 * PI * f;
    coeffs.iter().enumerate().map(|(n, &h)| Complex64::from_polar(h, w * n as f64)).sum()
}

fn to_db(mag: f64) -> f64 {
    if mag <= 0.0 {
        return DB_FLOOR;
    }
    (20.0 * mag.log10()).max(DB_FLOOR)
}

/// `20·log10|H(f)|` at each frequency, floored at [`DB_FLOOR`].
pub fn freq_response_db(taps: &FilterTaps, freqs: &[f64]) -> Result<Vec<f64>> {
    if let Some(f) = freqs.iter().find(|f| !(0.0..=0.5).contains(*f)) {
        return Err(invalid(format!("frequency {f} outside [0, 0.5]")));
    }
    Ok(freqs.iter().map(|&f| to_db(freq_response(taps.coeffs(), f).norm())).collect())
}

/// Per-sample PSD (dB) of unit-energy symbols shaped by `taps`:
/// `|H(f)|² / sps`.
pub fn transmit_psd_db(taps: &FilterTaps, f: f64) -> f64 {
    let h = freq_response(taps.coeffs(), f).norm();
    to_db(h / (taps.samples_per_symbol() as f64).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskReport {
    /// max(|H(fᵢ)| − D(fᵢ)) on the design grid (negative when strictly inside).
    pub grid_excess: f64,
    /// Frequency at which `grid_excess` occurs.
    pub grid_worst_freq: f64,
    /// max(20log10|H(f)| − mask_dB(f)) on the verification grid.
    pub verify_excess_db: f64,
    pub verify_worst_freq: f64,
    pub compliant: bool,
}

/// Compares the magnitude response of `taps` with the mask on both grids.
pub fn check_mask(taps: &FilterTaps, mask: &SpectralMask) -> MaskReport {
    let c = taps.coeffs();
    let mut grid_excess = f64::NEG_INFINITY;
    let mut grid_worst_freq = 0.0;
    for f in mask.grid() {
        let e = freq_response(c, f).norm() - mask.amplitude(f);
        if e > grid_excess {
            grid_excess = e;
            grid_worst_freq = f;
        }
    }
    let mut verify_excess_db = f64::NEG_INFINITY;
    let mut verify_worst_freq = 0.0;
    for f in mask.verification_grid() {
        let e = to_db(freq_response(c, f).norm()) - mask.level_db(f);
        if e > verify_excess_db {
            verify_excess_db = e;
            verify_worst_freq = f;
        }
    }
    MaskReport {
        grid_excess,
        grid_worst_freq,
        verify_excess_db,
        verify_worst_freq,
        compliant: grid_excess <= GRID_TOLERANCE && verify_excess_db <= VERIFY_TOLERANCE_DB,
    }
}
