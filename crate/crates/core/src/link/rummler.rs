use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::SAMPLE_RATE_HZ;

/// Echo delay of the simplified three-path model.
pub const ECHO_DELAY_S: f64 = 6.3e-9;

/// Half-width of the baseline signal band in cycles per sample.
pub const REFERENCE_HALF_BAND: f64 = 12.8e6 / SAMPLE_RATE_HZ;

/// Half-length of the windowed-sinc fractional delay, in samples.
const INTERP_HALF: usize = 16;

/// Discrete-time multipath channel plus its noise level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub taps: Vec<Complex64>,
    /// Notch attenuation relative to the scale `a`, in dB (≤ 0).
    pub notch_depth_db: f64,
    /// Notch position in cycles per sample.
    pub notch_freq: f64,
    /// Echo amplitude `b`.
    pub echo_amplitude: f64,
    /// Scale `a` giving unit mean power gain over the reference band.
    pub scale: f64,
    pub sigma_n2: f64,
}

impl ChannelRealization {
    pub fn flat() -> Self {
        Self {
            taps: vec![Complex64::new(1.0, 0.0)],
            notch_depth_db: 0.0,
            notch_freq: 0.0,
            echo_amplitude: 0.0,
            scale: 1.0,
            sigma_n2: 0.0,
        }
    }

    pub fn with_noise(mut self, sigma_n2: f64) -> Self {
        self.sigma_n2 = sigma_n2;
        self
    }

    pub fn is_flat(&self) -> bool {
        self.taps.len() == 1
    }

    pub fn response(&self, f: f64) -> Complex64 {
        self.taps
            .iter()
            .enumerate()
            .map(|(n, &h)| h * Complex64::from_polar(1.0, -2.0 * PI * f * n as f64))
            .sum()
    }
}

/// Mean of `|H(f)|²` over `|f| ≤ half_band`, in closed form.
pub fn band_power_gain(taps: &[Complex64], half_band: f64) -> f64 {
    let mut acc = 0.0;
    for (k, hk) in taps.iter().enumerate() {
        for (l, hl) in taps.iter().enumerate() {
            let lag = k as f64 - l as f64;
            acc += (hk * hl.conj()).re * sinc(2.0 * half_band * lag);
        }
    }
    acc
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

fn blackman(x: f64, half_width: f64) -> f64 {
    if x.abs() >= half_width {
        return 0.0;
    }
    let t = PI * x / half_width;
    0.42 + 0.5 * t.cos() + 0.08 * (2.0 * t).cos()
}

/// Taps realizing `a·[1 − b·e^{−j2π(f−f₀)τ}]` at the simulation sample rate.
///
/// `notch_freq` is in cycles per sample. The echo is a windowed-sinc
/// fractional delay. `a` is chosen so the mean power gain over
/// `|f| ≤ REFERENCE_HALF_BAND` is one, which keeps the SNR referred to the
/// baseline 25.6 Msym/s signal band; `b = 0` gives a single unit tap.
pub fn gen_rummler_channel(depth_db: f64, notch_freq: f64) -> Result<ChannelRealization> {
    rummler_channel_at(depth_db, notch_freq, ECHO_DELAY_S * SAMPLE_RATE_HZ)
}

pub fn rummler_channel_at(depth_db: f64, notch_freq: f64, delay_samples: f64) -> Result<ChannelRealization> {
    if !(depth_db <= 0.0) {
        return Err(invalid(format!("notch depth {depth_db} dB must be <= 0")));
    }
    if !notch_freq.is_finite() {
        return Err(invalid(format!("notch frequency {notch_freq} must be finite")));
    }
    let b = 1.0 - 10f64.powf(depth_db / 20.0);
    if b == 0.0 {
        return Ok(ChannelRealization { notch_freq, ..ChannelRealization::flat() });
    }
    let c = INTERP_HALF;
    let len = 2 * c + 2;
    let rot = Complex64::from_polar(b, 2.0 * PI * notch_freq * delay_samples);
    let half_width = c as f64 + 1.0;
    let mut taps: Vec<Complex64> = (0..len)
        .map(|n| {
            let x = n as f64 - c as f64 - delay_samples;
            -rot * sinc(x) * blackman(x, half_width)
        })
        .collect();
    taps[c] += 1.0;
    let scale = 1.0 / band_power_gain(&taps, REFERENCE_HALF_BAND).sqrt();
    for t in &mut taps {
        *t *= scale;
    }
    Ok(ChannelRealization {
        taps,
        notch_depth_db: depth_db,
        notch_freq,
        echo_amplitude: b,
        scale,
        sigma_n2: 0.0,
    })
}

/// Distribution of the notch attenuation (positive dB values).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NotchDepth {
    /// Exponential attenuation with the given mean, capped at `max_db`.
    Exponential { mean_db: f64, max_db: f64 },
    Uniform { min_db: f64, max_db: f64 },
    Fixed { depth_db: f64 },
}

/// Distribution of the notch position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NotchPosition {
    /// Uniform over a centred interval of the given width (Hz).
    Uniform { range_hz: f64 },
    /// Over one notch period `1/τ`: the inner half around the carrier is
    /// `ratio` times as likely per Hz as the outer half.
    TwoLevel { ratio: f64 },
}

/// Notch statistics for random draws.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RummlerStats {
    pub depth: NotchDepth,
    pub position: NotchPosition,
}

impl Default for RummlerStats {
    fn default() -> Self {
        Self {
            depth: NotchDepth::Exponential { mean_db: 3.8, max_db: 40.0 },
            position: NotchPosition::TwoLevel { ratio: 5.0 },
        }
    }
}

impl RummlerStats {
    pub fn validate(&self) -> Result<()> {
        let depth_ok = match self.depth {
            NotchDepth::Exponential { mean_db, max_db } => mean_db > 0.0 && max_db >= 0.0,
            NotchDepth::Uniform { min_db, max_db } => min_db >= 0.0 && max_db >= min_db,
            NotchDepth::Fixed { depth_db } => depth_db >= 0.0,
        };
        let position_ok = match self.position {
            NotchPosition::Uniform { range_hz } => (0.0..=SAMPLE_RATE_HZ).contains(&range_hz),
            NotchPosition::TwoLevel { ratio } => ratio > 0.0 && ratio.is_finite(),
        };
        if !depth_ok || !position_ok {
            return Err(invalid(format!("invalid notch statistics {self:?}")));
        }
        Ok(())
    }

    /// Notch position in cycles per sample.
    fn draw_position<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.position {
            NotchPosition::Uniform { range_hz } => {
                let half = range_hz / 2.0 / SAMPLE_RATE_HZ;
                if half > 0.0 {
                    rng.random_range(-half..half)
                } else {
                    0.0
                }
            }
            NotchPosition::TwoLevel { ratio } => {
                let quarter = 0.25 / ECHO_DELAY_S;
                let inner = rng.random::<f64>() < ratio / (ratio + 1.0);
                let u: f64 = rng.random_range(-1.0..1.0);
                let hz = if inner { u * quarter } else { u.signum() * (quarter + u.abs() * quarter) };
                hz / SAMPLE_RATE_HZ
            }
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ChannelRealization> {
        self.validate()?;
        let atten = match self.depth {
            NotchDepth::Exponential { mean_db, max_db } => {
                Exp::new(1.0 / mean_db).expect("positive rate").sample(rng).min(max_db)
            }
            NotchDepth::Uniform { min_db, max_db } => {
                if max_db > min_db {
                    rng.random_range(min_db..max_db)
                } else {
                    min_db
                }
            }
            NotchDepth::Fixed { depth_db } => depth_db,
        };
        let f0 = self.draw_position(rng);
        gen_rummler_channel(-atten, f0)
    }
}
