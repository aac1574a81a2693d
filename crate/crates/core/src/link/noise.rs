use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Wiener phase-noise variance per symbol from an oscillator's single-sided
/// phase-noise level `L(f_offset)`: `10^{L/10} · 4π² f_offset² · T`.
pub fn pn_variance_from_dbc(level_dbc_hz: f64, f_offset_hz: f64, symbol_period_s: f64) -> f64 {
    10f64.powf(level_dbc_hz / 10.0) * 4.0 * PI * PI * f_offset_hz * f_offset_hz * symbol_period_s
}

/// Random-walk phase process with i.i.d. Gaussian increments.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PnModel {
    /// Increment variance in rad² per symbol.
    pub sigma_psi2: f64,
    pub seed: u64,
}

impl PnModel {
    pub fn new(sigma_psi2: f64, seed: u64) -> Result<Self> {
        if !(sigma_psi2 >= 0.0 && sigma_psi2.is_finite()) {
            return Err(invalid(format!("phase-noise variance {sigma_psi2} must be >= 0")));
        }
        Ok(Self { sigma_psi2, seed })
    }
}

/// `n` phases with φ₀ = 0 and φₖ = φₖ₋₁ + ψₖ.
pub fn gen_wiener_pn(model: PnModel, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    wiener_pn_with(&mut rng, model.sigma_psi2, n)
}

pub fn wiener_pn_with<R: Rng + ?Sized>(rng: &mut R, sigma_psi2: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    out.push(0.0);
    if sigma_psi2 == 0.0 {
        out.resize(n, 0.0);
        return out;
    }
    let step = Normal::new(0.0, sigma_psi2.sqrt()).expect("finite variance");
    let mut phi = 0.0;
    for _ in 1..n {
        phi += step.sample(rng);
        out.push(phi);
    }
    out
}

/// Circularly symmetric complex Gaussian sample with total variance `var`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * s, im * s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variance_from_dbc_reference_points() {
        let rrc = pn_variance_from_dbc(-90.0, 1e5, 1.0 / 25.6e6);
        assert!((rrc / 1.5e-5 - 1.0).abs() < 0.03, "{rrc}");
        let ssf = pn_variance_from_dbc(-90.0, 1e5, 1.0 / 51.2e6);
        assert!((ssf / 7.7e-6 - 1.0).abs() < 0.03, "{ssf}");
        assert_eq!(pn_variance_from_dbc(f64::NEG_INFINITY, 1e5, 1e-8), 0.0);
    }

    #[test]
    fn zero_variance_is_zero() {
        let p = gen_wiener_pn(PnModel::new(0.0, 4).unwrap(), 100);
        assert!(p.iter().all(|&x| x == 0.0));
        assert!(PnModel::new(-1.0, 0).is_err());
    }

    #[test]
    fn increments_have_configured_variance() {
        let s2 = 7.7e-6;
        let p = gen_wiener_pn(PnModel::new(s2, 11).unwrap(), 1_000_001);
        assert_eq!(p[0], 0.0);
        let inc: Vec<f64> = p.windows(2).map(|w| w[1] - w[0]).collect();
        let mean = inc.iter().sum::<f64>() / inc.len() as f64;
        let var = inc.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (inc.len() - 1) as f64;
        assert!((var / s2 - 1.0).abs() < 0.02, "{var}");
    }

    #[test]
    fn variance_grows_linearly() {
        let s2 = 1e-4;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let trials = 10_000;
        let acc: f64 = (0..trials)
            .map(|_| wiener_pn_with(&mut rng, s2, 1001)[1000].powi(2))
            .sum::<f64>()
            / trials as f64;
        assert!((acc / (1000.0 * s2) - 1.0).abs() < 0.05, "{acc}");
    }

    #[test]
    fn deterministic_per_seed() {
        let m = PnModel::new(1e-5, 99).unwrap();
        assert_eq!(gen_wiener_pn(m, 50), gen_wiener_pn(m, 50));
        assert_ne!(gen_wiener_pn(m, 50), gen_wiener_pn(PnModel { seed: 98, ..m }, 50));
    }

    #[test]
    fn complex_gaussian_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 200_000;
        let p: f64 = (0..n).map(|_| complex_gaussian(&mut rng, 0.3).norm_sqr()).sum::<f64>() / n as f64;
        assert!((p / 0.3 - 1.0).abs() < 0.01);
    }
}
