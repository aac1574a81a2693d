use num_complex::Complex64;
use rand::Rng;

use super::frame::SymbolFrame;
use super::noise::complex_gaussian;
use super::rummler::ChannelRealization;
use crate::equalize::thp_precode;
use crate::error::{invalid, Error, Result};
use crate::spectral::FilterTaps;

/// Sample-rate complex baseband signal.
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    pub samples: Vec<Complex64>,
    pub samples_per_symbol: u32,
}

impl Waveform {
    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }
}

/// THP configuration applied ahead of upsampling.
#[derive(Clone, Debug)]
pub struct Precoder<'a> {
    /// Strictly causal feedback taps `b₁, b₂, …`.
    pub feedback: &'a [Complex64],
    pub delta: f64,
}

#[derive(Clone, Debug)]
pub struct Transmission {
    pub waveform: Waveform,
    /// Symbols entering the pulse shaper (precoded when THP is active).
    pub channel_symbols: Vec<Complex64>,
    /// THP displacements `d_k`; empty without precoding.
    pub displacements: Vec<Complex64>,
}

/// Zero-stuffs by the filter's oversampling factor and convolves with it.
/// The output has `(n − 1)·sps + len(taps)` samples.
pub fn upsample_filter(symbols: &[Complex64], taps: &FilterTaps) -> Vec<Complex64> {
    if symbols.is_empty() {
        return Vec::new();
    }
    let sps = taps.samples_per_symbol() as usize;
    let h = taps.coeffs();
    let mut out = vec![Complex64::new(0.0, 0.0); (symbols.len() - 1) * sps + h.len()];
    for (k, &a) in symbols.iter().enumerate() {
        let base = k * sps;
        for (i, &c) in h.iter().enumerate() {
            out[base + i] += a * c;
        }
    }
    out
}

pub fn transmit(frame: &SymbolFrame, shaping: &FilterTaps, precoder: Option<Precoder>) -> Result<Transmission> {
    if frame.samples_per_symbol != shaping.samples_per_symbol() {
        return Err(invalid(format!(
            "frame runs at {} samples/symbol but the pulse at {}",
            frame.samples_per_symbol,
            shaping.samples_per_symbol()
        )));
    }
    let (channel_symbols, displacements) = match precoder {
        Some(p) => thp_precode(&frame.symbols, p.feedback, p.delta)?,
        None => (frame.symbols.clone(), Vec::new()),
    };
    let samples = upsample_filter(&channel_symbols, shaping);
    Ok(Transmission {
        waveform: Waveform { samples, samples_per_symbol: shaping.samples_per_symbol() },
        channel_symbols,
        displacements,
    })
}

/// Repeats each symbol-rate phase `sps` times and pads with the last value
/// up to `len` samples.
pub fn hold_per_symbol(phases: &[f64], sps: u32, len: usize) -> Vec<f64> {
    let last = phases.last().copied().unwrap_or(0.0);
    (0..len).map(|n| phases.get(n / sps as usize).copied().unwrap_or(last)).collect()
}

fn convolve(x: &[Complex64], h: &[Complex64]) -> Vec<Complex64> {
    if x.is_empty() || h.is_empty() {
        return Vec::new();
    }
    let mut out = vec![Complex64::new(0.0, 0.0); x.len() + h.len() - 1];
    for (i, &xi) in x.iter().enumerate() {
        for (j, &hj) in h.iter().enumerate() {
            out[i + j] += xi * hj;
        }
    }
    out
}

/// `y = e^{jφ}·(x * h_C) + n` with `n` circular Gaussian of variance
/// `sigma_n2` per complex sample; `pn` holds one phase per output sample.
pub fn channel_pass<R: Rng + ?Sized>(
    waveform: &Waveform,
    channel: &ChannelRealization,
    pn: &[f64],
    sigma_n2: f64,
    rng: &mut R,
) -> Result<Waveform> {
    if !(sigma_n2 >= 0.0) {
        return Err(invalid(format!("noise variance {sigma_n2} must be >= 0")));
    }
    let mut y = convolve(&waveform.samples, &channel.taps);
    if pn.len() < y.len() {
        return Err(Error::LengthMismatch { expected: y.len(), got: pn.len() });
    }
    for (s, &phi) in y.iter_mut().zip(pn) {
        if phi != 0.0 {
            *s *= Complex64::from_polar(1.0, phi);
        }
        if sigma_n2 > 0.0 {
            *s += complex_gaussian(rng, sigma_n2);
        }
    }
    Ok(Waveform { samples: y, samples_per_symbol: waveform.samples_per_symbol })
}

/// Anti-aliasing filter followed by decimation at phase `timing_offset`:
/// `y_k = Σᵢ aaf[i]·w[offset + k·sps − i]` over the full convolution length.
pub fn receive_front_end(
    waveform: &Waveform,
    aaf: &FilterTaps,
    sps: u32,
    timing_offset: u32,
) -> Result<Vec<Complex64>> {
    if timing_offset >= sps {
        return Err(invalid(format!("timing offset {timing_offset} outside [0, {sps})")));
    }
    if aaf.samples_per_symbol() != sps || waveform.samples_per_symbol != sps {
        return Err(invalid("receive filter, waveform and decimation rates differ"));
    }
    let w = &waveform.samples;
    let h = aaf.coeffs();
    if w.is_empty() {
        return Ok(Vec::new());
    }
    let full = w.len() + h.len() - 1;
    let mut out = Vec::with_capacity(full / sps as usize + 1);
    let mut n = timing_offset as usize;
    while n < full {
        let lo = n.saturating_sub(w.len() - 1);
        let hi = n.min(h.len() - 1);
        let mut acc = Complex64::new(0.0, 0.0);
        for i in lo..=hi {
            acc += w[n - i] * h[i];
        }
        out.push(acc);
        n += sps as usize;
    }
    Ok(out)
}

/// Symbol-rate view of transmit filter, channel and receive filter.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateResponse {
    /// `h_A` after trimming negligible end taps.
    pub taps: Vec<Complex64>,
    /// Energy-maximizing decimation phase.
    pub timing_offset: u32,
    /// Symbols trimmed from the front; the front end's output must be
    /// advanced by this much to line up with `taps`.
    pub lead: usize,
}

/// Relative threshold below which end taps of `h_A` are dropped.
pub const AGGREGATE_TRIM: f64 = 1e-8;

pub fn aggregate_response(
    tx: &FilterTaps,
    channel: &[Complex64],
    rx: &FilterTaps,
) -> Result<AggregateResponse> {
    let sps = tx.samples_per_symbol();
    if rx.samples_per_symbol() != sps {
        return Err(invalid("transmit and receive filters run at different rates"));
    }
    let txc: Vec<Complex64> = tx.coeffs().iter().map(|&c| Complex64::new(c, 0.0)).collect();
    let rxc: Vec<Complex64> = rx.coeffs().iter().map(|&c| Complex64::new(c, 0.0)).collect();
    let g = convolve(&convolve(&txc, channel), &rxc);
    let s = sps as usize;
    let (offset, _) = (0..s)
        .map(|p| (p, g.iter().skip(p).step_by(s).map(|v| v.norm_sqr()).sum::<f64>()))
        .fold((0, f64::MIN), |best, cur| if cur.1 > best.1 { cur } else { best });
    let full: Vec<Complex64> = g.iter().skip(offset).step_by(s).cloned().collect();
    let peak = full.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let keep = |v: &Complex64| v.norm() >= AGGREGATE_TRIM * peak;
    let lead = full.iter().position(keep).unwrap_or(0);
    let end = full.iter().rposition(keep).unwrap_or(0);
    Ok(AggregateResponse { taps: full[lead..=end].to_vec(), timing_offset: offset as u32, lead })
}
