use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::mask::SpectralMask;
use super::qp::{solve_constrained_qp, KktResiduals};
use super::rrc::FilterTaps;
use crate::error::{invalid, Error, Result};

/// Non-negative per-grid-point weights of the squared fitting error.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignWeights(Vec<f64>);

impl DesignWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(invalid(format!("design weight {w} must be finite and >= 0")));
        }
        Ok(Self(weights))
    }

    /// Piecewise-constant weights: grid point `f` takes the weight of the
    /// first band whose upper edge exceeds `f`; points beyond every edge take
    /// `beyond`. Bands are given as `(upper_edge, weight)`.
    pub fn banded(mask: &SpectralMask, bands: &[(f64, f64)], beyond: f64) -> Result<Self> {
        let w = mask
            .grid()
            .iter()
            .map(|&f| bands.iter().find(|(edge, _)| f < *edge).map_or(beyond, |b| b.1))
            .collect();
        Self::new(w)
    }

    /// Root weights 1 / 10 / 1000 below the fourth corner, up to the fifth
    /// corner and beyond it, i.e. w = 1, 100, 1e6.
    pub fn reference(mask: &SpectralMask) -> Result<Self> {
        let c = mask.corners();
        if c.len() < 5 {
            return Err(invalid("reference weights need a mask with at least five corners"));
        }
        Self::banded(mask, &[(c[3], 1.0), (c[4], 100.0)], 1e6)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `K × (M_half + 1)` matrix with rows `[1, 2cos(2πi/K), …, 2cos(2πiM_half/K)]`.
pub fn cosine_basis(k: usize, m_half: usize) -> Result<DMatrix<f64>> {
    if k < m_half + 1 {
        return Err(invalid(format!("grid of {k} points cannot resolve {m_half} half-taps")));
    }
    let freqs: Vec<f64> = (0..k).map(|i| i as f64 / k as f64).collect();
    Ok(cosine_matrix(&freqs, m_half))
}

/// Zero-phase response matrix for arbitrary frequencies: `H(f) = V·h_half`.
pub fn cosine_matrix(freqs: &[f64], m_half: usize) -> DMatrix<f64> {
    DMatrix::from_fn(freqs.len(), m_half + 1, |i, m| {
        if m == 0 {
            1.0
        } else {
            2.0 * (2.0 * PI * freqs[i] * m as f64).cos()
        }
    })
}

#[derive(Clone, Debug)]
pub struct SsfDesign {
    /// Full symmetric filter, tagged as running at 2 samples per symbol.
    pub taps: FilterTaps,
    /// `[h_center, h_1, …, h_M]`.
    pub half: Vec<f64>,
    /// Weighted squared error Σ wᵢ (D(fᵢ) − H(fᵢ))².
    pub objective: f64,
    pub iterations: usize,
    pub kkt: KktResiduals,
}

/// Weighted least-squares fit of a zero-phase FIR to the mask, subject to
/// |H(fᵢ)| ≤ D(fᵢ) on every design grid point.
pub fn design_ssf(mask: &SpectralMask, weights: &DesignWeights, num_taps: usize) -> Result<SsfDesign> {
    if num_taps % 2 == 0 {
        return Err(invalid(format!("SSF design needs an odd tap count, got {num_taps}")));
    }
    let grid = mask.grid();
    if weights.len() != grid.len() {
        return Err(Error::LengthMismatch { expected: grid.len(), got: weights.len() });
    }
    let m_half = num_taps / 2;
    if grid.len() < m_half + 1 {
        return Err(invalid("design grid is coarser than the filter length"));
    }
    let d = DVector::from_vec(mask.desired_response());
    let v = cosine_matrix(&grid, m_half);
    let w = weights.as_slice();
    let scale = w.iter().cloned().fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(invalid("all design weights are zero"));
    }
    let wv = DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * w[i] / scale);
    let p = v.transpose() * &wv * 2.0;
    let wd = DVector::from_fn(d.len(), |i, _| d[i] * w[i] / scale);
    let q = -(v.transpose() * wd) * 2.0;
    let sol = solve_constrained_qp(&p, &q, &v, &(-&d), &d)?;
    let half: Vec<f64> = sol.x.iter().cloned().collect();
    let resid = &v * &sol.x - &d;
    let objective = (0..resid.len()).map(|i| w[i] * resid[i] * resid[i]).sum();
    Ok(SsfDesign {
        taps: FilterTaps::from_half(&half, 2)?,
        half,
        objective,
        iterations: sol.iterations,
        kkt: sol.kkt,
    })
}
