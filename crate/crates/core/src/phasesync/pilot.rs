use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::equalize::ThpPrecoder;
use crate::error::{invalid, Result};
use crate::link::Constellation;

/// Mass below which lattice points are dropped from the prior.
pub const PRIOR_TRUNCATION: f64 = 1e-6;
pub const MIN_PRIOR_DRAWS: usize = 100_000;

/// Distribution of the extended-lattice representative `a_pilot + (ℓ + jm)Δ`
/// seen by the receiver for a precoded pilot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectivePilotPrior {
    pub pilot: Complex64,
    pub delta: f64,
    /// Lattice offsets `(ℓ, m)`.
    pub offsets: Vec<(i64, i64)>,
    pub probs: Vec<f64>,
}

impl EffectivePilotPrior {
    pub fn point_mass(pilot: Complex64, delta: f64) -> Self {
        Self { pilot, delta, offsets: vec![(0, 0)], probs: vec![1.0] }
    }

    pub fn support(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.offsets.iter().map(|&(l, m)| self.pilot + Complex64::new(l as f64, m as f64) * self.delta)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Builds a prior from raw lattice-offset counts, truncating and
    /// renormalizing.
    pub fn from_counts(pilot: Complex64, delta: f64, counts: &BTreeMap<(i64, i64), u64>) -> Result<Self> {
        let total: u64 = counts.values().sum();
        if total == 0 {
            return Err(invalid("empty pilot histogram"));
        }
        let mut offsets = Vec::new();
        let mut probs = Vec::new();
        for (&o, &c) in counts {
            let p = c as f64 / total as f64;
            if p >= PRIOR_TRUNCATION {
                offsets.push(o);
                probs.push(p);
            }
        }
        let s: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= s);
        Ok(Self { pilot, delta, offsets, probs })
    }
}

/// Monte-Carlo prior of the effective pilot: precodes `n_mc` frames of
/// `d_pilot − 1` random data symbols each followed by the pilot and records
/// the pilot's lattice displacement.
pub fn effective_pilot_prior<R: Rng + ?Sized>(
    pilot: Complex64,
    feedback: &[Complex64],
    constellation: &Constellation,
    d_pilot: usize,
    n_mc: usize,
    rng: &mut R,
) -> Result<EffectivePilotPrior> {
    if n_mc < MIN_PRIOR_DRAWS {
        return Err(invalid(format!("pilot prior needs at least {MIN_PRIOR_DRAWS} draws, got {n_mc}")));
    }
    if d_pilot < 2 {
        return Err(invalid("pilot period must be >= 2"));
    }
    let delta = constellation.delta();
    if feedback.iter().all(|b| b.norm_sqr() == 0.0) {
        return Ok(EffectivePilotPrior::point_mass(pilot, delta));
    }
    let m = constellation.order() as u32;
    let mut pre = ThpPrecoder::new(feedback, delta)?;
    // Warm-up so the first recorded pilot sees a full feedback memory.
    for _ in 0..feedback.len() {
        pre.push(constellation.point(rng.random_range(0..m)));
    }
    let mut counts = BTreeMap::new();
    for _ in 0..n_mc {
        for _ in 0..d_pilot - 1 {
            pre.push(constellation.point(rng.random_range(0..m)));
        }
        let (_, disp) = pre.push(pilot);
        let key = ((disp.re / delta).round() as i64, (disp.im / delta).round() as i64);
        *counts.entry(key).or_insert(0u64) += 1;
    }
    EffectivePilotPrior::from_counts(pilot, delta, &counts)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PilotEstimate {
    pub u: Complex64,
    pub phi: f64,
    /// Set when the restricted window held no candidate and the full search
    /// was used instead.
    pub fallback: bool,
}

pub(crate) fn wrap_angle(x: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let y = (x + PI).rem_euclid(TAU) - PI;
    if y == -PI {
        PI
    } else {
        y
    }
}

fn check_inputs(prior: &EffectivePilotPrior, sigma2: f64) -> Result<()> {
    if prior.is_empty() {
        return Err(invalid("pilot prior has empty support"));
    }
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(invalid(format!("pilot noise variance must be positive, got {sigma2}")));
    }
    Ok(())
}

fn best_by<F: Fn(Complex64) -> Option<f64>>(prior: &EffectivePilotPrior, score: F) -> Option<Complex64> {
    let mut best: Option<(f64, Complex64)> = None;
    for (u, p) in prior.support().zip(&prior.probs) {
        if let Some(s) = score(u) {
            let s = s + p.ln();
            if best.is_none_or(|(b, _)| s > b) {
                best = Some((s, u));
            }
        }
    }
    best.map(|(_, u)| u)
}

/// Joint effective-pilot and phase search over the whole support, using the
/// magnitude-only form of the likelihood.
pub fn pilot_phase_full_search(r: Complex64, prior: &EffectivePilotPrior, sigma2: f64) -> Result<PilotEstimate> {
    check_inputs(prior, sigma2)?;
    let u = best_by(prior, |u| Some(-(r.norm() - u.norm()).powi(2) / sigma2)).expect("non-empty prior");
    Ok(PilotEstimate { u, phi: (r * u.conj()).arg(), fallback: false })
}

/// Effective-pilot decision aided by a coarse phase. A positive `window`
/// restricts the magnitude search to candidates whose implied phase lies
/// within `coarse ± window`; `window = 0` scores every candidate at the
/// coarse phase itself. The phase is then refined as `arg(r·û*)`.
pub fn pilot_phase_estimate(
    r: Complex64,
    prior: &EffectivePilotPrior,
    sigma2: f64,
    coarse: f64,
    window: f64,
) -> Result<PilotEstimate> {
    check_inputs(prior, sigma2)?;
    if !(0.0..std::f64::consts::PI).contains(&window) || !coarse.is_finite() {
        return Err(invalid(format!("pilot window {window} must lie in [0, pi)")));
    }
    let u = if window == 0.0 {
        let rot = Complex64::from_polar(1.0, coarse);
        best_by(prior, |u| Some(-(r - u * rot).norm_sqr() / sigma2))
    } else {
        best_by(prior, |u| {
            let off = wrap_angle((r * u.conj()).arg() - coarse);
            (off.abs() <= window).then(|| -(r.norm() - u.norm()).powi(2) / sigma2)
        })
    };
    match u {
        Some(u) => Ok(PilotEstimate { u, phi: (r * u.conj()).arg(), fallback: false }),
        None => Ok(PilotEstimate { fallback: true, ..pilot_phase_full_search(r, prior, sigma2)? }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_prior() -> EffectivePilotPrior {
        let c = Constellation::new(1024).unwrap();
        EffectivePilotPrior {
            pilot: c.outer_pilot(),
            delta: c.delta(),
            offsets: vec![(0, 0), (1, 0), (0, -1), (1, -1), (2, 0)],
            probs: vec![0.4, 0.25, 0.2, 0.1, 0.05],
        }
    }

    #[test]
    fn zero_feedback_gives_point_mass() {
        let c = Constellation::new(1024).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = effective_pilot_prior(c.outer_pilot(), &[Complex64::new(0.0, 0.0); 4], &c, 50, 100_000, &mut rng)
            .unwrap();
        assert_eq!(p.offsets, vec![(0, 0)]);
        assert_eq!(p.probs, vec![1.0]);
    }

    #[test]
    fn prior_is_normalized_and_truncated() {
        let c = Constellation::new(64).unwrap();
        let fb = [Complex64::new(0.6, 0.1), Complex64::new(-0.3, 0.2), Complex64::new(0.15, 0.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = effective_pilot_prior(c.outer_pilot(), &fb, &c, 10, 100_000, &mut rng).unwrap();
        assert!(p.len() > 1);
        assert!((p.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.probs.iter().all(|&q| q >= PRIOR_TRUNCATION));
    }

    #[test]
    fn rejects_small_draw_count() {
        let c = Constellation::new(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(effective_pilot_prior(c.outer_pilot(), &[], &c, 10, 10, &mut rng).is_err());
    }

    #[test]
    fn noiseless_most_likely_candidate_is_recovered() {
        let prior = toy_prior();
        let u0 = prior.support().next().unwrap();
        let phi0 = 0.31;
        let r = u0 * Complex64::from_polar(1.0, phi0);
        for window in [0.0, 0.1] {
            let est = pilot_phase_estimate(r, &prior, 1e-5, 0.3, window).unwrap();
            assert_eq!(est.u, u0);
            assert!((est.phi - phi0).abs() < 1e-12);
            assert!(!est.fallback);
        }
    }

    #[test]
    fn empty_window_falls_back() {
        let prior = EffectivePilotPrior::point_mass(Complex64::new(1.0, 0.0), 2.0);
        let r = Complex64::from_polar(1.0, 1.0);
        let est = pilot_phase_estimate(r, &prior, 1e-3, -1.0, 0.1).unwrap();
        assert!(est.fallback);
        assert!((est.phi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn magnitude_form_solves_joint_search() {
        let prior = toy_prior();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s2 = 0.01;
        for _ in 0..50 {
            let r = Complex64::new(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0));
            let est = pilot_phase_full_search(r, &prior, s2).unwrap();
            let objective =
                |u: Complex64, phi: f64, p: f64| -(r - u * Complex64::from_polar(1.0, phi)).norm_sqr() / s2 + p.ln();
            let p_hat = prior.probs[prior.support().position(|u| u == est.u).unwrap()];
            let at_est = objective(est.u, est.phi, p_hat);
            for (u, &p) in prior.support().zip(&prior.probs) {
                for i in 0..2000 {
                    let phi = i as f64 * std::f64::consts::TAU / 2000.0;
                    assert!(objective(u, phi, p) <= at_est + 1e-9);
                }
            }
        }
    }

    #[test]
    fn angle_wrapping() {
        assert!((wrap_angle(3.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
        assert!((wrap_angle(-0.5) + 0.5).abs() < 1e-15);
        assert!((wrap_angle(7.0) - (7.0 - std::f64::consts::TAU)).abs() < 1e-12);
    }
}
