use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{invalid, Result};

/// Increments beyond this many standard deviations are dropped.
pub const PRUNE_SIGMAS: f64 = 4.0;

/// Quantized phase states relative to a block's start phase, with a banded
/// Toeplitz transition kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseTrellis {
    phi_max: f64,
    levels: Vec<f64>,
    /// `increment_pmf[j + half_width]` is the unnormalized weight of a move by `j` levels.
    increment_pmf: Vec<f64>,
    half_width: usize,
    /// Per-source-row normalizers so truncated edge rows still sum to one.
    row_norm: Vec<f64>,
    block_len: usize,
}

impl PhaseTrellis {
    /// Builds a trellis from explicit levels and a symmetric-support increment
    /// kernel of odd length.
    pub fn from_parts(levels: Vec<f64>, increment_pmf: Vec<f64>, block_len: usize) -> Result<Self> {
        if levels.is_empty() || increment_pmf.len() % 2 == 0 {
            return Err(invalid("trellis needs levels and an odd-length increment kernel"));
        }
        if increment_pmf.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(invalid("increment weights must be finite and non-negative"));
        }
        let half_width = increment_pmf.len() / 2;
        if increment_pmf[half_width] <= 0.0 {
            return Err(invalid("self-transition weight must be positive"));
        }
        let k = levels.len();
        let row_norm = (0..k)
            .map(|i| {
                let lo = i.saturating_sub(half_width);
                let hi = (i + half_width).min(k - 1);
                (lo..=hi).map(|j| increment_pmf[j + half_width - i]).sum::<f64>()
            })
            .collect();
        let phi_max = levels.iter().fold(0.0f64, |m, l| m.max(l.abs()));
        Ok(Self { phi_max, levels, increment_pmf, half_width, row_norm, block_len })
    }

    pub fn phi_max(&self) -> f64 {
        self.phi_max
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn spacing(&self) -> f64 {
        if self.levels.len() < 2 {
            0.0
        } else {
            self.levels[1] - self.levels[0]
        }
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    /// Normalized probability of moving from level `from` to level `to`.
    pub fn transition(&self, from: usize, to: usize) -> f64 {
        let j = to as isize - from as isize;
        if j.unsigned_abs() > self.half_width || to >= self.levels.len() {
            return 0.0;
        }
        self.increment_pmf[(j + self.half_width as isize) as usize] / self.row_norm[from]
    }

    /// Index of the level nearest to `offset`.
    pub fn nearest_level(&self, offset: f64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, l) in self.levels.iter().enumerate() {
            let d = (l - offset).abs();
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }

    /// `out[j] = Σ_i src[i]·T[i][j]`.
    pub(crate) fn forward_step(&self, src: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let k = self.levels.len();
        let w = self.half_width;
        for (i, &a) in src.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let scaled = a / self.row_norm[i];
            let lo = i.saturating_sub(w);
            let hi = (i + w).min(k - 1);
            for j in lo..=hi {
                out[j] += scaled * self.increment_pmf[j + w - i];
            }
        }
    }

    /// `out[i] = Σ_j T[i][j]·src[j]`.
    pub(crate) fn backward_step(&self, src: &[f64], out: &mut [f64]) {
        let k = self.levels.len();
        let w = self.half_width;
        for (i, o) in out.iter_mut().enumerate() {
            let lo = i.saturating_sub(w);
            let hi = (i + w).min(k - 1);
            let s: f64 = (lo..=hi).map(|j| self.increment_pmf[j + w - i] * src[j]).sum();
            *o = s / self.row_norm[i];
        }
    }
}

/// Phase trellis over `±span_factor·√(σψ²·d_pilot)` with `num_levels`
/// uniformly spaced states and Gaussian cell-integrated increments.
pub fn build_phase_trellis(sigma_psi2: f64, d_pilot: usize, num_levels: usize, span_factor: f64) -> Result<PhaseTrellis> {
    if num_levels < 3 || num_levels % 2 == 0 {
        return Err(invalid(format!("trellis needs an odd number of levels >= 3, got {num_levels}")));
    }
    if !(sigma_psi2 >= 0.0) || !sigma_psi2.is_finite() || d_pilot == 0 || !(span_factor > 0.0) {
        return Err(invalid("trellis parameters must be positive and finite"));
    }
    let phi_max = span_factor * (sigma_psi2 * d_pilot as f64).sqrt();
    if phi_max == 0.0 {
        return PhaseTrellis::from_parts(vec![0.0; num_levels], vec![1.0], d_pilot);
    }
    let centre = (num_levels / 2) as f64;
    let spacing = phi_max / centre;
    let levels = (0..num_levels).map(|i| (i as f64 - centre) * spacing).collect();
    let sigma = sigma_psi2.sqrt();
    let half_width = (((PRUNE_SIGMAS * sigma) / spacing).floor() as usize).min(num_levels - 1);
    let cdf = |x: f64| 0.5 * (1.0 + erf(x / (sigma * std::f64::consts::SQRT_2)));
    let pmf = (-(half_width as isize)..=half_width as isize)
        .map(|j| {
            let c = j as f64 * spacing;
            cdf(c + 0.5 * spacing) - cdf(c - 0.5 * spacing)
        })
        .collect();
    PhaseTrellis::from_parts(levels, pmf, d_pilot)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn span_and_resolution_at_reference_noise() {
        let t = build_phase_trellis(7.7e-6, 50, 101, 3.5).unwrap();
        assert!((t.phi_max() - 0.0687).abs() < 1e-3, "{}", t.phi_max());
        assert!((t.spacing() - 1.4e-3).abs() < 0.05e-3, "{}", t.spacing());
        assert_eq!(t.levels()[50], 0.0);
        assert!((t.levels()[100] - t.phi_max()).abs() < 1e-15);
    }

    #[test]
    fn rows_sum_to_one() {
        let t = build_phase_trellis(7.7e-6, 50, 101, 3.5).unwrap();
        for i in 0..t.num_levels() {
            let s: f64 = (0..t.num_levels()).map(|j| t.transition(i, j)).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pruned_beyond_four_sigma() {
        let t = build_phase_trellis(7.7e-6, 50, 101, 3.5).unwrap();
        let sigma = 7.7e-6f64.sqrt();
        for j in 0..t.num_levels() {
            let step = (t.levels()[j] - t.levels()[50]).abs();
            if step > PRUNE_SIGMAS * sigma + 1e-15 {
                assert_eq!(t.transition(50, j), 0.0);
            }
        }
    }

    #[test]
    fn increments_follow_gaussian_cells() {
        let t = build_phase_trellis(7.7e-6, 50, 101, 3.5).unwrap();
        let mean: f64 = (0..101).map(|j| t.transition(50, j) * t.levels()[j]).sum();
        let var: f64 = (0..101).map(|j| t.transition(50, j) * t.levels()[j].powi(2)).sum();
        assert!(mean.abs() < 1e-15);
        // Uniform-cell quantization adds spacing²/12 to the variance.
        let expected = 7.7e-6 + t.spacing().powi(2) / 12.0;
        assert!((var - expected).abs() / expected < 0.03, "{var} vs {expected}");
    }

    #[test]
    fn zero_pn_is_identity() {
        let t = build_phase_trellis(0.0, 50, 11, 3.5).unwrap();
        for i in 0..11 {
            for j in 0..11 {
                assert_eq!(t.transition(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn steps_agree_with_transition() {
        let t = build_phase_trellis(1e-4, 10, 9, 2.0).unwrap();
        let src: Vec<f64> = (0..9).map(|i| 1.0 + i as f64).collect();
        let mut fwd = vec![0.0; 9];
        let mut bwd = vec![0.0; 9];
        t.forward_step(&src, &mut fwd);
        t.backward_step(&src, &mut bwd);
        for j in 0..9 {
            let f: f64 = (0..9).map(|i| src[i] * t.transition(i, j)).sum();
            let b: f64 = (0..9).map(|i| t.transition(j, i) * src[i]).sum();
            assert!((f - fwd[j]).abs() < 1e-12);
            assert!((b - bwd[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_even_levels() {
        assert!(build_phase_trellis(1e-5, 50, 100, 3.5).is_err());
    }
}
