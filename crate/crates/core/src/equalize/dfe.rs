use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::wiener::conv_matrix;
use crate::error::{invalid, Error, Result};

/// MMSE decision-feedback equalizer under the correct-past-decisions model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DfeSolution {
    pub fff: Vec<Complex64>,
    /// Strictly causal feedback taps `b₁ … b_Nb`: the FFF-output cascade at
    /// the `Nb` taps after the cursor.
    pub fbf: Vec<Complex64>,
    pub delay: usize,
    pub mse: f64,
    /// Cascade value at the decision delay (`1 − mse` at the optimum).
    pub cursor: Complex64,
}

impl DfeSolution {
    /// Unbiased decision SNR `1/mse − 1`.
    pub fn unbiased_snr(&self) -> f64 {
        1.0 / self.mse - 1.0
    }
}

/// MMSE-DFE at a fixed decision delay.
///
/// With `H` the convolution matrix, the rows `D+1 … D+Nb` are cancelled by
/// the feedback filter, so the FFF solves
/// `(HᴴH − H_fbᴴ H_fb + σ²I) w = H_Dᴴ` and `mse = 1 − H_D w`.
pub fn mmse_dfe_at_delay(
    h: &[Complex64],
    sigma2: f64,
    ff_len: usize,
    fb_len: usize,
    delay: usize,
) -> Result<DfeSolution> {
    let hm = check(h, sigma2, ff_len)?;
    if delay >= hm.nrows() {
        return Err(invalid(format!("delay {delay} outside [0, {}]", hm.nrows() - 1)));
    }
    let full = gram(&hm, sigma2);
    solve_at(&hm, &full, ff_len, fb_len, delay)
}

/// MMSE-DFE at the delay with the smallest MSE (ties to the smaller delay).
pub fn mmse_dfe(h: &[Complex64], sigma2: f64, ff_len: usize, fb_len: usize) -> Result<DfeSolution> {
    let hm = check(h, sigma2, ff_len)?;
    let full = gram(&hm, sigma2);
    let mut best: Option<DfeSolution> = None;
    for d in 0..hm.nrows() {
        let s = match solve_at(&hm, &full, ff_len, fb_len, d) {
            Ok(s) => s,
            Err(Error::Singular(_)) => continue,
            Err(e) => return Err(e),
        };
        if best.as_ref().is_none_or(|b| s.mse < b.mse - 1e-13) {
            best = Some(s);
        }
    }
    best.ok_or_else(|| Error::Singular("no delay gives a solvable DFE".into()))
}

fn check(h: &[Complex64], sigma2: f64, ff_len: usize) -> Result<DMatrix<Complex64>> {
    if h.is_empty() || ff_len == 0 {
        return Err(invalid("DFE needs a non-empty response and at least one FFF tap"));
    }
    if !(sigma2 >= 0.0) || !sigma2.is_finite() {
        return Err(invalid(format!("noise variance {sigma2} must be finite and >= 0")));
    }
    Ok(conv_matrix(h, ff_len))
}

fn gram(hm: &DMatrix<Complex64>, sigma2: f64) -> DMatrix<Complex64> {
    let mut g = hm.adjoint() * hm;
    for i in 0..g.nrows() {
        g[(i, i)] += Complex64::new(sigma2, 0.0);
    }
    g
}

fn solve_at(
    hm: &DMatrix<Complex64>,
    full: &DMatrix<Complex64>,
    ff_len: usize,
    fb_len: usize,
    delay: usize,
) -> Result<DfeSolution> {
    let rows = hm.nrows();
    let fb_end = (delay + fb_len).min(rows - 1);
    let mut g = full.clone();
    for r in delay + 1..=fb_end {
        let row = hm.row(r);
        // g -= rowᴴ row
        for i in 0..ff_len {
            let ci = row[i].conj();
            if ci == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..ff_len {
                g[(i, j)] -= ci * row[j];
            }
        }
    }
    let rhs: DVector<Complex64> = hm.row(delay).adjoint();
    let chol = g
        .cholesky()
        .ok_or_else(|| Error::Singular(format!("DFE normal matrix singular at delay {delay}")))?;
    let w = chol.solve(&rhs);
    let cascade = hm * &w;
    let cursor = cascade[delay];
    let mse = (1.0 - cursor.re).max(0.0);
    let fbf = (1..=fb_len)
        .map(|i| cascade.get(delay + i).copied().unwrap_or(Complex64::new(0.0, 0.0)))
        .collect();
    Ok(DfeSolution { fff: w.iter().cloned().collect(), fbf, delay, mse, cursor })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equalize::wiener::mmse_le_best_delay;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn identity_channel_needs_no_feedback() {
        let s = mmse_dfe(&[c(1.0)], 1e-9, 3, 2).unwrap();
        assert_eq!(s.delay, 0);
        assert!((s.fff[0] - c(1.0)).norm() < 1e-8);
        assert!(s.fff[1..].iter().all(|v| v.norm() < 1e-12));
        assert!(s.fbf.iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn beats_linear_equalizer() {
        let h = [c(1.0), c(0.9)];
        let dfe = mmse_dfe(&h, 1e-4, 8, 2).unwrap();
        let le = mmse_le_best_delay(&h, 1e-4, 8).unwrap();
        assert!(dfe.mse < le.mse, "{} vs {}", dfe.mse, le.mse);
    }

    #[test]
    fn matches_brute_force_feedback_search() {
        // For a fixed feedback b the optimal FFF targets e_D + Σ bᵢ e_{D+i};
        // search b on a grid, then refine by coordinate descent.
        let h = [c(0.5), c(1.0), c(-0.6)];
        let s2 = 0.01;
        let (nf, nb) = (3, 2);
        let dfe = mmse_dfe(&h, s2, nf, nb).unwrap();
        let hm = DMatrix::from_fn(h.len() + nf - 1, nf, |r, j| {
            if r >= j && r - j < h.len() { h[r - j].re } else { 0.0 }
        });
        let rows = hm.nrows();
        let r = hm.transpose() * &hm + DMatrix::identity(nf, nf) * s2;
        let cost = |b: &[f64]| -> f64 {
            (0..rows)
                .map(|d| {
                    let mut t = DVector::zeros(rows);
                    t[d] = 1.0;
                    for i in 0..nb {
                        if d + 1 + i < rows {
                            t[d + 1 + i] = b[i];
                        }
                    }
                    let p = hm.transpose() * &t;
                    let w = r.clone().lu().solve(&p).unwrap();
                    t.norm_squared() - p.dot(&w)
                })
                .fold(f64::MAX, f64::min)
        };
        let mut best = (f64::MAX, [0.0, 0.0]);
        let steps = 80;
        for i in 0..=steps {
            for j in 0..=steps {
                let b = [-2.0 + 4.0 * i as f64 / steps as f64, -2.0 + 4.0 * j as f64 / steps as f64];
                let v = cost(&b);
                if v < best.0 {
                    best = (v, b);
                }
            }
        }
        let mut b = best.1;
        let mut step = 0.05;
        while step > 1e-7 {
            let mut improved = false;
            for k in 0..2 {
                for dir in [-1.0, 1.0] {
                    let mut t = b;
                    t[k] += dir * step;
                    if cost(&t) < cost(&b) {
                        b = t;
                        improved = true;
                    }
                }
            }
            if !improved {
                step /= 2.0;
            }
        }
        assert!((cost(&b) - dfe.mse).abs() < 1e-4, "oracle {} vs {}", cost(&b), dfe.mse);
    }

    #[test]
    fn fbf_is_post_cursor_cascade() {
        let h = [c(1.0), c(0.7), c(0.3)];
        let s = mmse_dfe(&h, 1e-3, 6, 2).unwrap();
        let hm = conv_matrix(&h, 6);
        let casc = hm * DVector::from_vec(s.fff.clone());
        assert!((casc[s.delay + 1] - s.fbf[0]).norm() < 1e-12);
        assert!((s.cursor.re - (1.0 - s.mse)).abs() < 1e-9);
    }
}
