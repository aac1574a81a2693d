use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Symbol-spaced FIR equalizer with its decision delay and design MSE.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearEqualizer {
    pub taps: Vec<Complex64>,
    pub delay: usize,
    pub mse: f64,
}

/// Convolution matrix with `h.len() + num_taps − 1` rows; `(H w)_r = Σ_j h[r−j] w_j`.
pub fn conv_matrix(h: &[Complex64], num_taps: usize) -> DMatrix<Complex64> {
    let rows = h.len() + num_taps - 1;
    DMatrix::from_fn(rows, num_taps, |r, j| {
        if r >= j && r - j < h.len() {
            h[r - j]
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

struct Normal {
    h: DMatrix<Complex64>,
    chol: nalgebra::Cholesky<Complex64, nalgebra::Dyn>,
}

fn regularized(h: &[Complex64], sigma2: f64, num_taps: usize) -> Result<Normal> {
    if h.is_empty() {
        return Err(invalid("impulse response is empty"));
    }
    if num_taps == 0 {
        return Err(invalid("equalizer needs at least one tap"));
    }
    if !(sigma2 >= 0.0) || !sigma2.is_finite() {
        return Err(invalid(format!("noise variance {sigma2} must be finite and >= 0")));
    }
    let hm = conv_matrix(h, num_taps);
    let mut r = hm.adjoint() * &hm;
    for i in 0..num_taps {
        r[(i, i)] += Complex64::new(sigma2, 0.0);
    }
    let chol = r
        .cholesky()
        .ok_or_else(|| Error::Singular("regularized autocorrelation is not positive definite".into()))?;
    Ok(Normal { h: hm, chol })
}

impl Normal {
    /// Wiener taps and MSE for a desired cascade `target` (padded with zeros).
    fn solve(&self, target: &DVector<Complex64>) -> (DVector<Complex64>, f64) {
        let p = self.h.adjoint() * target;
        let w = self.chol.solve(&p);
        let mse = target.norm_squared() - p.dotc(&w).re;
        (w, mse.max(0.0))
    }
}

/// MMSE-LE for decision delay `delay`: `(HᴴH + σ²I) w = Hᴴ e_delay`.
pub fn mmse_le(h: &[Complex64], sigma2: f64, num_taps: usize, delay: usize) -> Result<LinearEqualizer> {
    let n = regularized(h, sigma2, num_taps)?;
    let rows = n.h.nrows();
    if delay >= rows {
        return Err(invalid(format!("delay {delay} outside [0, {}]", rows - 1)));
    }
    let mut t = DVector::zeros(rows);
    t[delay] = Complex64::new(1.0, 0.0);
    let (w, mse) = n.solve(&t);
    Ok(LinearEqualizer { taps: w.iter().cloned().collect(), delay, mse })
}

/// MMSE-LE at the delay with the smallest MSE (ties to the smaller delay).
pub fn mmse_le_best_delay(h: &[Complex64], sigma2: f64, num_taps: usize) -> Result<LinearEqualizer> {
    let reference = [Complex64::new(1.0, 0.0)];
    mmse_target_best_delay(h, &reference, sigma2, num_taps)
}

/// Equalizer that shapes `h` into a delayed copy of `reference`: the target
/// cascade is `reference` shifted by the chosen delay.
pub fn mmse_target_best_delay(
    h: &[Complex64],
    reference: &[Complex64],
    sigma2: f64,
    num_taps: usize,
) -> Result<LinearEqualizer> {
    if reference.is_empty() {
        return Err(invalid("reference response is empty"));
    }
    let n = regularized(h, sigma2, num_taps)?;
    let rows = n.h.nrows();
    if reference.len() > rows {
        return Err(invalid("reference response longer than the equalized cascade"));
    }
    let mut best: Option<LinearEqualizer> = None;
    for d in 0..=rows - reference.len() {
        let mut t = DVector::zeros(rows);
        for (i, &v) in reference.iter().enumerate() {
            t[d + i] = v;
        }
        let (w, mse) = n.solve(&t);
        if best.as_ref().is_none_or(|b| mse < b.mse) {
            best = Some(LinearEqualizer { taps: w.iter().cloned().collect(), delay: d, mse });
        }
    }
    Ok(best.expect("at least one delay"))
}
