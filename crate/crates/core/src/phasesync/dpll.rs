use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::track::PhaseTrack;
use crate::equalize::modulo;
use crate::error::{invalid, Result};
use crate::link::{Constellation, SymbolRole};

/// First-order DPLL state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpllState {
    pub phi_hat: f64,
    pub gain: f64,
    pub locked: bool,
}

impl DpllState {
    pub fn new(gain: f64, phi_hat: f64) -> Result<Self> {
        if !(gain >= 0.0) || !gain.is_finite() || !phi_hat.is_finite() {
            return Err(invalid(format!("DPLL gain {gain} / phase {phi_hat} invalid")));
        }
        Ok(Self { phi_hat, gain, locked: true })
    }
}

/// Phase detector `Im{ y · (ref · e^{jφ̂})* }`.
pub fn dpll_error(y: Complex64, reference: Complex64, phi_hat: f64) -> f64 {
    (y * (reference * Complex64::from_polar(1.0, phi_hat)).conj()).im
}

/// `φ̂ ← φ̂ + G·e`.
pub fn dpll_update(state: DpllState, e: f64) -> DpllState {
    DpllState { phi_hat: state.phi_hat + state.gain * e, ..state }
}

/// Extended-constellation representative of a pilot: the lattice shift of
/// `pilot` nearest to the derotated sample. Returns `(û, d̂)`.
pub fn thp_dpll_pilot_decide(r: Complex64, phi_hat: f64, pilot: Complex64, delta: f64) -> (Complex64, Complex64) {
    let z = r * Complex64::from_polar(1.0, -phi_hat) - pilot;
    let d = Complex64::new((z.re / delta).round() * delta, (z.im / delta).round() * delta);
    (pilot + d, d)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DpllConfig {
    pub gain: f64,
    /// Symbols in the lock detector's moving window.
    pub lock_window: usize,
    /// Mean absolute residual phase (rad) above which lock is declared lost.
    pub lock_threshold: f64,
}

impl Default for DpllConfig {
    fn default() -> Self {
        Self { gain: 0.02, lock_window: 200, lock_threshold: 0.25 }
    }
}

/// Receiver-side inputs shared by the phase trackers.
#[derive(Clone, Copy, Debug)]
pub struct TrackInput<'a> {
    /// Post-FFF samples, `stream[k]` carrying symbol `k`.
    pub stream: &'a [Complex64],
    pub roles: &'a [SymbolRole],
    /// Known extended symbols `u_k` for the training prefix.
    pub training: &'a [Complex64],
    pub pilot: Complex64,
    /// Genie effective pilots, one per pilot in stream order.
    pub known_pilots: Option<&'a [Complex64]>,
    /// Modulo constant when the link is precoded.
    pub delta: Option<f64>,
}

impl TrackInput<'_> {
    pub(crate) fn check(&self) -> Result<()> {
        if self.stream.len() != self.roles.len() {
            return Err(crate::Error::LengthMismatch { expected: self.roles.len(), got: self.stream.len() });
        }
        let n_train = self.roles.iter().take_while(|r| **r == SymbolRole::Training).count();
        if self.training.len() < n_train {
            return Err(crate::Error::LengthMismatch { expected: n_train, got: self.training.len() });
        }
        if let Some(k) = self.known_pilots {
            let n = self.roles.iter().filter(|r| **r == SymbolRole::Pilot).count();
            if k.len() < n {
                return Err(crate::Error::LengthMismatch { expected: n, got: k.len() });
            }
        }
        Ok(())
    }
}

/// Folds and slices a derotated sample; returns the label and the extended
/// reference `â + d̂`.
pub(crate) fn decide(z: Complex64, constellation: &Constellation, delta: Option<f64>) -> (u32, Complex64) {
    match delta {
        Some(d) => {
            let folded = modulo(z, d);
            let label = constellation.slice(folded);
            (label, constellation.point(label) + (z - folded))
        }
        None => {
            let label = constellation.slice(z);
            (label, constellation.point(label))
        }
    }
}

/// Decision-directed DPLL after the FFF and before the modulo device.
pub fn run_thp_dpll(input: &TrackInput, constellation: &Constellation, config: &DpllConfig) -> Result<PhaseTrack> {
    input.check()?;
    let mut state = DpllState::new(config.gain, 0.0)?;
    let n = input.stream.len();
    let mut phases = Vec::with_capacity(n);
    let mut decisions = Vec::with_capacity(n);
    let mut window = std::collections::VecDeque::with_capacity(config.lock_window);
    let mut window_sum = 0.0;
    let mut lock_lost_at = None;
    let mut pilot_no = 0;
    for k in 0..n {
        let r = input.stream[k];
        let z = r * Complex64::from_polar(1.0, -state.phi_hat);
        let (label, data_ref) = decide(z, constellation, input.delta);
        let reference = match input.roles[k] {
            SymbolRole::Training => input.training[k],
            SymbolRole::Pilot => {
                let u = match (input.known_pilots, input.delta) {
                    (Some(known), _) => known[pilot_no],
                    (None, Some(d)) => thp_dpll_pilot_decide(r, state.phi_hat, input.pilot, d).0,
                    (None, None) => input.pilot,
                };
                pilot_no += 1;
                u
            }
            SymbolRole::Data | SymbolRole::Guard => data_ref,
        };
        phases.push(state.phi_hat);
        decisions.push(label);
        let e = dpll_error(r, reference, state.phi_hat);
        if config.lock_window > 0 {
            let resid = (r * (reference * Complex64::from_polar(1.0, state.phi_hat)).conj()).arg().abs();
            window.push_back(resid);
            window_sum += resid;
            if window.len() > config.lock_window {
                window_sum -= window.pop_front().unwrap();
            }
            if window.len() == config.lock_window
                && window_sum / config.lock_window as f64 > config.lock_threshold
                && lock_lost_at.is_none()
            {
                lock_lost_at = Some(k);
                state.locked = false;
            }
        }
        state = dpll_update(state, e);
    }
    Ok(PhaseTrack { phases, decisions, lock_lost_at, pilot_fallbacks: 0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn locked_loop_has_zero_error() {
        let a = Complex64::new(0.3, -0.7);
        let phi = 0.37;
        assert!(dpll_error(a * Complex64::from_polar(1.0, phi), a, phi).abs() < 1e-15);
    }

    #[test]
    fn positive_offset_gives_positive_error() {
        let a = Complex64::new(0.6, 0.2);
        let eps = 0.01;
        let e = dpll_error(a * Complex64::from_polar(1.0, 0.2 + eps), a, 0.2);
        assert!((e - a.norm_sqr() * eps.sin()).abs() < 1e-15);
        assert!(e > 0.0);
    }

    #[test]
    fn error_matches_direct_arithmetic() {
        let y = Complex64::new(2.3, -4.1);
        let reference = Complex64::new(-3.9, 1.2);
        let phi: f64 = -0.8;
        let direct = {
            let rr = reference.re * phi.cos() - reference.im * phi.sin();
            let ri = reference.re * phi.sin() + reference.im * phi.cos();
            y.im * rr - y.re * ri
        };
        assert!((dpll_error(y, reference, phi) - direct).abs() < 1e-12);
    }

    #[test]
    fn update_rules() {
        let s = DpllState::new(0.05, 0.1).unwrap();
        assert_eq!(dpll_update(s, 0.0), s);
        let frozen = DpllState::new(0.0, 0.1).unwrap();
        assert_eq!(dpll_update(frozen, 3.0).phi_hat, 0.1);
    }

    #[test]
    fn converges_from_constant_offset() {
        let mut s = DpllState::new(0.05, 0.0).unwrap();
        let phi = 0.1;
        let a = Complex64::new(1.0, 0.0);
        for _ in 0..500 {
            let e = dpll_error(a * Complex64::from_polar(1.0, phi), a, s.phi_hat);
            s = dpll_update(s, e);
        }
        assert!((s.phi_hat - phi).abs() < 1e-3);
    }

    #[test]
    fn pilot_region_decisions() {
        let p = Complex64::new(-0.9, 0.7);
        let phi = 0.2;
        let rot = Complex64::from_polar(1.0, phi);
        let (u, d) = thp_dpll_pilot_decide(p * rot, phi, p, 3.0);
        assert_eq!((u, d), (p, Complex64::new(0.0, 0.0)));
        let (u, d) = thp_dpll_pilot_decide((p + 3.0) * rot, phi, p, 3.0);
        assert!((d - Complex64::new(3.0, 0.0)).norm() < 1e-12);
        assert!((u - p - 3.0).norm() < 1e-12);
    }
}
