//! Error rates, bit metrics and achievable information rates.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{invalid, Error, Result};
use crate::link::Constellation;

/// Saturation applied to every LLR.
pub const LLR_CLAMP: f64 = 50.0;

/// One aggregated sweep point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub scheme: String,
    #[serde(rename = "M")]
    pub order: usize,
    pub snr_db: f64,
    pub ser: f64,
    pub air_bpcu: f64,
    pub air_mbps: f64,
    pub n_symbols: u64,
    pub seed: u64,
}

impl TrialResult {
    pub const CSV_HEADER: &'static str = "scheme,M,snr_db,ser,air_bpcu,air_mbps,n_symbols,seed";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.scheme, self.order, self.snr_db, self.ser, self.air_bpcu, self.air_mbps, self.n_symbols, self.seed
        )
    }
}

/// Fraction of positions where `decisions` and `truth` differ.
pub fn ser<T: PartialEq>(decisions: &[T], truth: &[T]) -> Result<f64> {
    if decisions.len() != truth.len() {
        return Err(Error::LengthMismatch { expected: truth.len(), got: decisions.len() });
    }
    if truth.is_empty() {
        return Err(invalid("SER of an empty stream"));
    }
    Ok(decisions.iter().zip(truth).filter(|(d, t)| d != t).count() as f64 / truth.len() as f64)
}

/// Two-sided 95% Wilson score interval for `errors` out of `n`.
pub fn wilson_interval(errors: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054f64;
    let n = n as f64;
    let p = errors as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * ((p * (1.0 - p) + z * z / (4.0 * n)) / n).sqrt() / denom;
    let lo = if errors == 0 { 0.0 } else { (centre - half).max(0.0) };
    (lo, (centre + half).min(1.0))
}

fn log_sum_exp(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Exact bit LLRs `log(Σ_{b=1} e^{−|r−x|²/σ²} / Σ_{b=0} e^{−|r−x|²/σ²})`,
/// clamped to ±[`LLR_CLAMP`], written into `out` (length log2 M).
///
/// The Gaussian metric factorizes over the two PAM dimensions and each bit
/// belongs to one of them, so the sums reduce to √M terms per bit.
pub fn bit_llrs_into(r: Complex64, constellation: &Constellation, sigma2: f64, out: &mut [f64]) -> Result<()> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(invalid(format!("LLR noise variance must be positive, got {sigma2}")));
    }
    let m = constellation.bits_per_symbol() as usize;
    if out.len() != m {
        return Err(Error::LengthMismatch { expected: m, got: out.len() });
    }
    let h = m / 2;
    let side = constellation.side();
    for (dim, x) in [r.re, r.im].into_iter().enumerate() {
        let metric: Vec<f64> = (0..side).map(|i| -(x - constellation.level(i)).powi(2) / sigma2).collect();
        for b in 0..h {
            let shift = h - 1 - b;
            let bit = |i: usize| (constellation.level_gray(i) >> shift) & 1;
            let one = log_sum_exp((0..side).filter(|&i| bit(i) == 1).map(|i| metric[i]));
            let zero = log_sum_exp((0..side).filter(|&i| bit(i) == 0).map(|i| metric[i]));
            let llr = if one == zero { 0.0 } else { one - zero };
            out[dim * h + b] = llr.clamp(-LLR_CLAMP, LLR_CLAMP);
        }
    }
    Ok(())
}

pub fn bit_llrs(r: Complex64, constellation: &Constellation, sigma2: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; constellation.bits_per_symbol() as usize];
    bit_llrs_into(r, constellation, sigma2, &mut out)?;
    Ok(out)
}

/// `log2(1 + e^x)` without overflow.
fn log2_one_plus_exp(x: f64) -> f64 {
    (x.max(0.0) + (-x.abs()).exp().ln_1p()) / std::f64::consts::LN_2
}

/// Running form of the achievable-rate estimate so long streams need not be
/// buffered.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AirAccumulator {
    bits_per_symbol: usize,
    penalty: f64,
    symbols: u64,
}

impl AirAccumulator {
    pub fn new(bits_per_symbol: usize) -> Self {
        Self { bits_per_symbol, penalty: 0.0, symbols: 0 }
    }

    /// Adds one symbol's LLRs and transmitted bits.
    pub fn push(&mut self, llrs: &[f64], bits: &[u8]) -> Result<()> {
        if llrs.len() != self.bits_per_symbol || bits.len() != self.bits_per_symbol {
            return Err(Error::LengthMismatch { expected: self.bits_per_symbol, got: llrs.len().min(bits.len()) });
        }
        for (l, b) in llrs.iter().zip(bits) {
            let signed = if *b == 1 { -l } else { *l };
            self.penalty += log2_one_plus_exp(signed);
        }
        self.symbols += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &Self) {
        self.penalty += other.penalty;
        self.symbols += other.symbols;
    }

    pub fn symbols(&self) -> u64 {
        self.symbols
    }

    /// Unclamped estimate `m − (1/N)·Σ log2(1 + e^{(−1)^b·LLR})`.
    pub fn raw(&self) -> f64 {
        if self.symbols == 0 {
            return 0.0;
        }
        self.bits_per_symbol as f64 - self.penalty / self.symbols as f64
    }

    /// Estimate clamped at zero for reporting.
    pub fn reported(&self) -> f64 {
        self.raw().max(0.0)
    }
}

/// Achievable information rate from row-major `N × m` LLRs and bits.
pub fn air(llrs: &[f64], bits: &[u8], bits_per_symbol: usize) -> Result<f64> {
    if llrs.len() != bits.len() {
        return Err(Error::LengthMismatch { expected: bits.len(), got: llrs.len() });
    }
    if bits_per_symbol == 0 || llrs.len() % bits_per_symbol != 0 {
        return Err(invalid("LLR matrix is not a whole number of symbols"));
    }
    let mut acc = AirAccumulator::new(bits_per_symbol);
    for (l, b) in llrs.chunks(bits_per_symbol).zip(bits.chunks(bits_per_symbol)) {
        acc.push(l, b)?;
    }
    Ok(acc.raw())
}

/// Per-sample noise variance that puts the baseline scheme at `target_db`
/// E_s/N_0, where `symbol_energy` is the baseline pulse energy per symbol.
pub fn snr_calibrate(symbol_energy: f64, target_db: f64) -> Result<f64> {
    if !(symbol_energy > 0.0) || !target_db.is_finite() {
        return Err(invalid("SNR calibration needs positive energy and a finite target"));
    }
    Ok(symbol_energy * 10f64.powf(-target_db / 10.0))
}

/// Gaussian tail probability.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Symbol error rate of square M-QAM on AWGN at linear E_s/N_0.
pub fn qam_ser_awgn(order: usize, es_n0: f64) -> f64 {
    let side = (order as f64).sqrt();
    let p = 2.0 * (1.0 - 1.0 / side) * q_function((3.0 * es_n0 / (order as f64 - 1.0)).sqrt());
    1.0 - (1.0 - p).powi(2)
}
