use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Span (in symbols) of the reference RRC from which truncated pulses are cut.
pub const DEFAULT_RRC_SPAN: usize = 32;

/// Real FIR coefficients tagged with the oversampling factor they run at.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterTaps {
    coeffs: Vec<f64>,
    samples_per_symbol: u32,
    symmetric: bool,
}

impl FilterTaps {
    /// Wraps coefficients; `symmetric` is derived from the data.
    pub fn new(coeffs: Vec<f64>, samples_per_symbol: u32) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(invalid("filter needs at least one coefficient"));
        }
        if samples_per_symbol == 0 {
            return Err(invalid("samples per symbol must be positive"));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(invalid("filter coefficients must be finite"));
        }
        let n = coeffs.len();
        let symmetric = (0..n / 2).all(|i| coeffs[i] == coeffs[n - 1 - i]);
        Ok(Self { coeffs, samples_per_symbol, symmetric })
    }

    /// Builds an odd-length even-symmetric filter from its half
    /// `[h_center, h_1, ..., h_M]`.
    pub fn from_half(half: &[f64], samples_per_symbol: u32) -> Result<Self> {
        if half.is_empty() {
            return Err(invalid("half-tap vector is empty"));
        }
        let mut c: Vec<f64> = half.iter().rev().cloned().collect();
        c.extend_from_slice(&half[1..]);
        Self::new(c, samples_per_symbol)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn samples_per_symbol(&self) -> u32 {
        self.samples_per_symbol
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * k).collect(),
            samples_per_symbol: self.samples_per_symbol,
            symmetric: self.symmetric,
        }
    }

    /// Same coefficients run at a different oversampling factor.
    pub fn with_samples_per_symbol(&self, sps: u32) -> Result<Self> {
        Self::new(self.coeffs.clone(), sps)
    }
}

fn rrc_value(beta: f64, t: f64) -> f64 {
    if t.abs() < 1e-12 {
        return 1.0 - beta + 4.0 * beta / PI;
    }
    let edge = 1.0 / (4.0 * beta);
    if (t.abs() - edge).abs() < 1e-9 {
        let a = PI / (4.0 * beta);
        return beta / 2f64.sqrt() * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos());
    }
    let num = (PI * t * (1.0 - beta)).sin() + 4.0 * beta * t * (PI * t * (1.0 + beta)).cos();
    let den = PI * t * (1.0 - (4.0 * beta * t).powi(2));
    num / den
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(invalid(format!("roll-off {beta} outside (0, 1]")));
    }
    Ok(())
}

fn normalized(taps: Vec<f64>, sps: u32) -> Result<FilterTaps> {
    let e: f64 = taps.iter().map(|c| c * c).sum::<f64>().sqrt();
    FilterTaps::new(taps.into_iter().map(|c| c / e).collect(), sps)
}

/// Unit-energy root-raised-cosine pulse with `span_symbols * sps + 1` taps.
pub fn rrc_taps(beta: f64, span_symbols: usize, sps: u32) -> Result<FilterTaps> {
    check_beta(beta)?;
    if span_symbols == 0 || span_symbols % 2 != 0 {
        return Err(invalid(format!("RRC span {span_symbols} must be even and positive")));
    }
    if sps == 0 {
        return Err(invalid("samples per symbol must be positive"));
    }
    truncated_rrc_taps_from(beta, span_symbols * sps as usize + 1, sps)
}

/// RRC pulse cut to `num_taps` samples centred on the peak and renormalized
/// to unit energy. Even lengths sample the pulse at half-sample offsets so the
/// result stays symmetric.
pub fn truncated_rrc_taps(beta: f64, num_taps: usize, sps: u32) -> Result<FilterTaps> {
    check_beta(beta)?;
    if sps == 0 {
        return Err(invalid("samples per symbol must be positive"));
    }
    let full = DEFAULT_RRC_SPAN * sps as usize + 1;
    if num_taps == 0 || num_taps > full {
        return Err(invalid(format!(
            "{num_taps} taps requested but the generated RRC spans {full}"
        )));
    }
    truncated_rrc_taps_from(beta, num_taps, sps)
}

fn truncated_rrc_taps_from(beta: f64, num_taps: usize, sps: u32) -> Result<FilterTaps> {
    let mid = (num_taps as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..num_taps)
        .map(|n| rrc_value(beta, (n as f64 - mid) / sps as f64))
        .collect();
    let mut taps = normalized(raw, sps)?;
    // Force exact mirror symmetry regardless of rounding in the formula.
    let n = taps.coeffs.len();
    for i in 0..n / 2 {
        taps.coeffs[n - 1 - i] = taps.coeffs[i];
    }
    taps.symmetric = true;
    Ok(taps)
}
