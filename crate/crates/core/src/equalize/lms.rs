use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

/// Tap magnitude treated as divergence.
const DIVERGENCE_LIMIT: f64 = 1e6;

/// LMS-trained linear equalizer with the decision delay at the centre tap.
///
/// `received[k]` and `training[k]` are aligned: the equalizer output at time
/// `k` estimates `training[k − delay]`.
pub fn adaptive_le_train(
    received: &[Complex64],
    training: &[Complex64],
    num_taps: usize,
    step: f64,
) -> Result<Vec<Complex64>> {
    adaptive_le_train_with(received, training, num_taps, step, num_taps / 2, 1)
}

pub fn adaptive_le_train_with(
    received: &[Complex64],
    training: &[Complex64],
    num_taps: usize,
    step: f64,
    delay: usize,
    passes: usize,
) -> Result<Vec<Complex64>> {
    if num_taps == 0 {
        return Err(invalid("equalizer needs at least one tap"));
    }
    if training.len() < 10 * num_taps {
        return Err(invalid(format!(
            "{} training symbols is less than 10x the {num_taps} taps",
            training.len()
        )));
    }
    if received.len() < training.len() {
        return Err(Error::LengthMismatch { expected: training.len(), got: received.len() });
    }
    if !(step >= 0.0) {
        return Err(invalid(format!("step size {step} must be >= 0")));
    }
    let mut w = vec![Complex64::new(0.0, 0.0); num_taps];
    if step == 0.0 {
        return Ok(w);
    }
    let mut updates = 0;
    for _ in 0..passes.max(1) {
        for k in (num_taps - 1).max(delay)..training.len() {
            let z: Complex64 = (0..num_taps).map(|j| w[j] * received[k - j]).sum();
            let e = training[k - delay] - z;
            for j in 0..num_taps {
                w[j] += step * e * received[k - j].conj();
            }
            updates += 1;
            if !e.norm().is_finite() || w.iter().any(|t| !(t.norm() < DIVERGENCE_LIMIT)) {
                return Err(Error::Diverged(updates));
            }
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::complex_gaussian;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn qpsk<R: Rng>(rng: &mut R, n: usize) -> Vec<Complex64> {
        let s = 0.5f64.sqrt();
        (0..n)
            .map(|_| Complex64::new(if rng.random() { s } else { -s }, if rng.random() { s } else { -s }))
            .collect()
    }

    #[test]
    fn flat_channel_converges_to_delta() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = qpsk(&mut rng, 5000);
        let y: Vec<Complex64> = a.iter().map(|&s| s + complex_gaussian(&mut rng, 1e-5)).collect();
        let w = adaptive_le_train(&y, &a, 11, 0.02).unwrap();
        // Output estimates a[k − 5]: y[k − j] = a[k − j] so the delta sits at j = 5.
        let mut target = vec![Complex64::new(0.0, 0.0); 11];
        target[5] = Complex64::new(1.0, 0.0);
        let err: f64 = w.iter().zip(&target).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        assert!(err < 1e-2, "{err}");
    }

    #[test]
    fn zero_step_keeps_taps() {
        let a = vec![Complex64::new(1.0, 0.0); 100];
        let w = adaptive_le_train(&a, &a, 5, 0.0).unwrap();
        assert!(w.iter().all(|t| *t == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn large_step_diverges() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = qpsk(&mut rng, 1000);
        assert!(matches!(adaptive_le_train(&a, &a, 21, 5.0), Err(Error::Diverged(_))));
    }

    #[test]
    fn short_training_is_rejected() {
        let a = vec![Complex64::new(1.0, 0.0); 50];
        assert!(adaptive_le_train(&a, &a, 11, 0.01).is_err());
    }
}
