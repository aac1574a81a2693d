use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::bcjr::ForwardPass;
use super::dpll::{decide, TrackInput};
use super::pilot::{pilot_phase_estimate, pilot_phase_full_search, EffectivePilotPrior, PilotEstimate};
use super::trellis::PhaseTrellis;
use crate::error::{invalid, Result};
use crate::link::{Constellation, SymbolRole};

/// Per-symbol output of a phase tracker.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseTrack {
    pub phases: Vec<f64>,
    /// Sliced base-constellation labels after derotation (and folding).
    pub decisions: Vec<u32>,
    /// First symbol at which the DPLL lock detector tripped.
    pub lock_lost_at: Option<usize>,
    /// Pilots whose restricted search came back empty.
    pub pilot_fallbacks: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BcjrConfig {
    pub num_levels: usize,
    pub span_factor: f64,
    /// Half-width of the admissible pilot phase range; 0 selects the
    /// fixed-coarse pilot decision.
    pub pilot_window: f64,
    /// Extra passes that rerun the tracker with the decision-directed
    /// noise variance of the previous pass when it exceeds the model value.
    pub noise_refinements: usize,
}

impl Default for BcjrConfig {
    fn default() -> Self {
        Self { num_levels: 101, span_factor: 3.5, pilot_window: 0.1, noise_refinements: 1 }
    }
}

/// Phase of the training prefix from a least-squares fit to the known
/// extended symbols.
pub fn training_phase(stream: &[Complex64], training: &[Complex64]) -> Option<f64> {
    let acc: Complex64 = stream.iter().zip(training).map(|(r, u)| r * u.conj()).sum();
    (acc.norm_sqr() > 0.0).then(|| acc.arg())
}

struct PilotContext<'a> {
    input: &'a TrackInput<'a>,
    prior: &'a EffectivePilotPrior,
    sigma2: f64,
    window: f64,
    fallbacks: usize,
}

impl PilotContext<'_> {
    fn estimate(&mut self, k: usize, pilot_no: usize, coarse: Option<f64>) -> Result<f64> {
        let r = self.input.stream[k];
        if let Some(known) = self.input.known_pilots {
            return Ok((r * known[pilot_no].conj()).arg());
        }
        let est: PilotEstimate = match coarse {
            Some(c) => pilot_phase_estimate(r, self.prior, self.sigma2, c, self.window)?,
            None => pilot_phase_full_search(r, self.prior, self.sigma2)?,
        };
        if est.fallback {
            self.fallbacks += 1;
        }
        // Keep the estimate on the branch closest to the coarse value so the
        // trellis offsets stay small.
        Ok(match coarse {
            Some(c) => c + super::pilot::wrap_angle(est.phi - c),
            None => est.phi,
        })
    }
}

/// Pilot-anchored BCJR phase estimation block by block, followed by
/// derotation, folding and slicing.
pub fn run_thp_bcjr(
    input: &TrackInput,
    constellation: &Constellation,
    trellis: &PhaseTrellis,
    prior: &EffectivePilotPrior,
    sigma2: f64,
    config: &BcjrConfig,
) -> Result<PhaseTrack> {
    input.check()?;
    let pilots: Vec<usize> =
        input.roles.iter().enumerate().filter(|(_, r)| **r == SymbolRole::Pilot).map(|(k, _)| k).collect();
    if pilots.is_empty() {
        return Err(invalid("BCJR phase tracking needs pilots"));
    }
    let n = input.stream.len();
    let n_train = input.roles.iter().take_while(|r| **r == SymbolRole::Training).count();
    let mut ctx = PilotContext { input, prior, sigma2, window: config.pilot_window, fallbacks: 0 };
    let initial = training_phase(&input.stream[..n_train], &input.training[..n_train]);
    let mut phases = vec![0.0; n];
    for p in phases.iter_mut().take(n_train) {
        *p = initial.unwrap_or(0.0);
    }
    let mut start = ctx.estimate(pilots[0], 0, initial)?;
    for (b, w) in pilots.windows(2).enumerate() {
        let (p0, p1) = (w[0], w[1]);
        phases[p0] = start;
        let block = &input.stream[p0 + 1..p1];
        let fwd = ForwardPass::run(block, constellation, trellis, start, sigma2, input.delta)?;
        let end = ctx.estimate(p1, b + 1, Some(fwd.end_coarse()))?;
        let est = fwd.smooth(Some(end), false)?;
        phases[p0 + 1..p1].copy_from_slice(&est.phases);
        let coarse_next = match est.phases.as_slice() {
            [.., a, z] => z + (z - a),
            [z] => *z,
            [] => end,
        };
        start = if b + 2 < pilots.len() { ctx.estimate(p1, b + 1, Some(coarse_next))? } else { end };
    }
    let last = *pilots.last().unwrap();
    for p in phases.iter_mut().skip(last) {
        *p = start;
    }
    let decisions = input
        .stream
        .iter()
        .zip(&phases)
        .map(|(r, p)| decide(r * Complex64::from_polar(1.0, -p), constellation, input.delta).0)
        .collect();
    Ok(PhaseTrack { phases, decisions, lock_lost_at: None, pilot_fallbacks: ctx.fallbacks })
}
