use num_complex::Complex64;

use super::trellis::PhaseTrellis;
use crate::equalize::modulo;
use crate::error::{invalid, Error, Result};
use crate::link::Constellation;

/// Largest per-symbol log-metric gap kept between states; keeps every
/// reachable state strictly positive.
const MAX_LOG_GAP: f64 = 60.0;

/// Squared distance from a derotated sample to its tentative decision, with
/// the modulo folded into the metric when `delta` is set.
pub fn branch_distance(z: Complex64, constellation: &Constellation, delta: Option<f64>) -> f64 {
    let v = match delta {
        Some(d) => modulo(z, d),
        None => z,
    };
    (v - constellation.slice_point(v)).norm_sqr()
}

/// Forward pass over one block between two pilots, ready to be smoothed once
/// the closing anchor is known.
#[derive(Clone, Debug)]
pub struct ForwardPass<'t> {
    trellis: &'t PhaseTrellis,
    start_phase: f64,
    start_state: usize,
    /// Per-symbol branch likelihoods, row-major `n × K`.
    metrics: Vec<f64>,
    /// Normalized forward messages including the symbol's own metric.
    alphas: Vec<f64>,
    /// Prediction for the step after the last symbol.
    predicted: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockEstimate {
    /// Absolute MAP phase per block symbol.
    pub phases: Vec<f64>,
    /// Posteriors for the opening anchor, each symbol and the closing anchor.
    pub posteriors: Option<Vec<Vec<f64>>>,
    /// Most likely phase one step past the block from the forward recursion.
    pub end_coarse: f64,
}

fn normalize(v: &mut [f64], step: usize) -> Result<()> {
    let s: f64 = v.iter().sum();
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::PosteriorVanished(step));
    }
    v.iter_mut().for_each(|x| *x /= s);
    Ok(())
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

impl<'t> ForwardPass<'t> {
    /// Runs the forward recursion from a state pinned at `start_phase`.
    pub fn run(
        samples: &[Complex64],
        constellation: &Constellation,
        trellis: &'t PhaseTrellis,
        start_phase: f64,
        sigma2: f64,
        delta: Option<f64>,
    ) -> Result<Self> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(invalid(format!("BCJR noise variance must be positive, got {sigma2}")));
        }
        if !start_phase.is_finite() {
            return Err(invalid("BCJR start phase must be finite"));
        }
        let k = trellis.num_levels();
        let n = samples.len();
        let rotors: Vec<Complex64> =
            trellis.levels().iter().map(|l| Complex64::from_polar(1.0, -(start_phase + l))).collect();
        let mut metrics = vec![0.0; n * k];
        for (t, r) in samples.iter().enumerate() {
            let row = &mut metrics[t * k..(t + 1) * k];
            let mut best = f64::INFINITY;
            for (m, rot) in row.iter_mut().zip(&rotors) {
                *m = branch_distance(r * rot, constellation, delta);
                best = best.min(*m);
            }
            for m in row.iter_mut() {
                *m = (-((*m - best) / sigma2).min(MAX_LOG_GAP)).exp();
            }
        }
        let start_state = trellis.nearest_level(0.0);
        let mut prev = vec![0.0; k];
        prev[start_state] = 1.0;
        let mut alphas = vec![0.0; n * k];
        for t in 0..n {
            let row = &mut alphas[t * k..(t + 1) * k];
            trellis.forward_step(&prev, row);
            for (a, m) in row.iter_mut().zip(&metrics[t * k..(t + 1) * k]) {
                *a *= m;
            }
            normalize(row, t + 1)?;
            prev.copy_from_slice(row);
        }
        let mut predicted = vec![0.0; k];
        trellis.forward_step(&prev, &mut predicted);
        normalize(&mut predicted, n + 1)?;
        Ok(Self { trellis, start_phase, start_state, metrics, alphas, predicted })
    }

    pub fn len(&self) -> usize {
        self.alphas.len() / self.trellis.num_levels()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    /// Coarse phase for the closing pilot.
    pub fn end_coarse(&self) -> f64 {
        self.start_phase + self.trellis.levels()[argmax(&self.predicted)]
    }

    /// Backward recursion from the closing anchor (`None` leaves it free)
    /// and per-symbol MAP phases.
    pub fn smooth(&self, end_phase: Option<f64>, keep_posteriors: bool) -> Result<BlockEstimate> {
        let k = self.trellis.num_levels();
        let n = self.len();
        let levels = self.trellis.levels();
        let mut beta = match end_phase {
            Some(p) => {
                if !p.is_finite() {
                    return Err(invalid("BCJR end phase must be finite"));
                }
                let mut b = vec![0.0; k];
                b[self.trellis.nearest_level(p - self.start_phase)] = 1.0;
                b
            }
            None => vec![1.0 / k as f64; k],
        };
        let mut posteriors = keep_posteriors.then(|| vec![Vec::new(); n + 2]);
        if let Some(p) = posteriors.as_mut() {
            let mut post: Vec<f64> = self.predicted.iter().zip(&beta).map(|(a, b)| a * b).collect();
            normalize(&mut post, n + 1)?;
            p[n + 1] = post;
        }
        let mut phases = vec![0.0; n];
        let mut next = vec![0.0; k];
        let mut post = vec![0.0; k];
        for t in (0..n).rev() {
            // beta currently holds the message into step t from step t+1.
            let weighted: Vec<f64> = if t + 1 < n {
                beta.iter().zip(&self.metrics[(t + 1) * k..(t + 2) * k]).map(|(b, m)| b * m).collect()
            } else {
                beta.clone()
            };
            self.trellis.backward_step(&weighted, &mut next);
            normalize(&mut next, t + 1)?;
            std::mem::swap(&mut beta, &mut next);
            for ((p, a), b) in post.iter_mut().zip(&self.alphas[t * k..(t + 1) * k]).zip(&beta) {
                *p = a * b;
            }
            normalize(&mut post, t + 1)?;
            phases[t] = self.start_phase + levels[argmax(&post)];
            if let Some(p) = posteriors.as_mut() {
                p[t + 1] = post.clone();
            }
        }
        if let Some(p) = posteriors.as_mut() {
            let mut first = vec![0.0; k];
            first[self.start_state] = 1.0;
            p[0] = first;
        }
        Ok(BlockEstimate { phases, posteriors, end_coarse: self.end_coarse() })
    }
}

/// Forward-backward phase estimation over one block with both anchors known.
#[allow(clippy::too_many_arguments)]
pub fn bcjr_block(
    samples: &[Complex64],
    constellation: &Constellation,
    trellis: &PhaseTrellis,
    start_phase: f64,
    end_phase: Option<f64>,
    sigma2: f64,
    delta: Option<f64>,
    keep_posteriors: bool,
) -> Result<BlockEstimate> {
    ForwardPass::run(samples, constellation, trellis, start_phase, sigma2, delta)?.smooth(end_phase, keep_posteriors)
}
