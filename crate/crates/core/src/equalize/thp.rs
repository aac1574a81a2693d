use num_complex::Complex64;

use crate::error::{invalid, Result};

fn fold(v: f64, delta: f64) -> (f64, f64) {
    // Rounding toward the lower neighbour at exact ties keeps the result in
    // (−Δ/2, Δ/2].
    let n = (v / delta - 0.5).ceil();
    (v - n * delta, n)
}

/// Componentwise reduction of `x` into (−Δ/2, Δ/2] × (−Δ/2, Δ/2].
pub fn modulo(x: Complex64, delta: f64) -> Complex64 {
    Complex64::new(fold(x.re, delta).0, fold(x.im, delta).0)
}

/// Lattice displacement `d` with `modulo(x) = x + d`.
pub fn modulo_displacement(x: Complex64, delta: f64) -> Complex64 {
    Complex64::new(-fold(x.re, delta).1 * delta, -fold(x.im, delta).1 * delta)
}

/// Streaming Tomlinson-Harashima precoder with strictly causal feedback
/// `[b₁, b₂, …]`.
#[derive(Clone, Debug)]
pub struct ThpPrecoder<'a> {
    feedback: &'a [Complex64],
    delta: f64,
    /// Most recent output first.
    past: std::collections::VecDeque<Complex64>,
}

impl<'a> ThpPrecoder<'a> {
    pub fn new(feedback: &'a [Complex64], delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(invalid(format!("modulo constant {delta} must be positive")));
        }
        Ok(Self { feedback, delta, past: std::collections::VecDeque::with_capacity(feedback.len() + 1) })
    }

    /// Precodes one symbol, returning `(x_k, d_k)`.
    pub fn push(&mut self, a: Complex64) -> (Complex64, Complex64) {
        let isi: Complex64 = self.feedback.iter().zip(&self.past).map(|(b, x)| b * x).sum();
        let v = a - isi;
        let disp = modulo_displacement(v, self.delta);
        let x = v + disp;
        if !self.feedback.is_empty() {
            if self.past.len() == self.feedback.len() {
                self.past.pop_back();
            }
            self.past.push_front(x);
        }
        (x, disp)
    }
}

/// Tomlinson-Harashima precoding with strictly causal feedback
/// `feedback = [b₁, b₂, …]`:
/// `x_k = MOD(a_k − Σₙ bₙ x_{k−n})`. Returns `x` and the displacements
/// `d_k` such that `u_k = x_k + Σₙ bₙ x_{k−n} = a_k + d_k`.
pub fn thp_precode(
    symbols: &[Complex64],
    feedback: &[Complex64],
    delta: f64,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let mut pre = ThpPrecoder::new(feedback, delta)?;
    Ok(symbols.iter().map(|&a| pre.push(a)).unzip())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::Constellation;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn inside_range_unchanged() {
        let z = Complex64::new(0.3, -0.49);
        assert_eq!(modulo(z, 1.0), z);
    }

    #[test]
    fn one_period_folds_to_zero() {
        assert_eq!(modulo(Complex64::new(2.5, 0.0), 2.5), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn direct_formula_example() {
        let d = 1.7;
        let x = Complex64::new(0.75 * d, -1.25 * d);
        let expect = Complex64::new(x.re - d * (x.re / d).round(), x.im - d * (x.im / d).round());
        let got = modulo(x, d);
        assert!((got - expect).norm() < 1e-15);
        assert!((got - Complex64::new(-0.25 * d, -0.25 * d)).norm() < 1e-15);
    }

    #[test]
    fn ties_stay_in_half_open_range() {
        let d = 2.0;
        assert_eq!(modulo(Complex64::new(1.0, -1.0), d), Complex64::new(1.0, 1.0));
    }

    #[test]
    fn zero_feedback_is_plain_mapping() {
        let a = vec![Complex64::new(0.1, 0.2), Complex64::new(-0.3, 0.4)];
        let (x, d) = thp_precode(&a, &[], 4.0).unwrap();
        assert_eq!(x, a);
        assert!(d.iter().all(|v| *v == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn precoded_symbols_are_bounded() {
        let c = Constellation::new(1024).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a: Vec<Complex64> = (0..5000).map(|_| c.point(rng.random_range(0..1024))).collect();
        let b: Vec<Complex64> = (0..8).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let (x, _) = thp_precode(&a, &b, c.delta()).unwrap();
        let h = c.delta() / 2.0;
        assert!(x.iter().all(|v| v.re > -h && v.re <= h && v.im > -h && v.im <= h));
    }

    #[test]
    fn noiseless_loopback_recovers_data() {
        // Monic causal channel 1 + Σ bₙ z⁻ⁿ seen by the receiver after its FFF.
        let c = Constellation::new(1024).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let labels: Vec<u32> = (0..10_000).map(|_| rng.random_range(0..1024)).collect();
        let a: Vec<Complex64> = labels.iter().map(|&l| c.point(l)).collect();
        let b = [Complex64::new(0.9, 0.1), Complex64::new(-0.4, 0.2), Complex64::new(0.15, 0.0)];
        let (x, _) = thp_precode(&a, &b, c.delta()).unwrap();
        for k in 0..x.len() {
            let mut u = x[k];
            for (n, &bn) in b.iter().enumerate() {
                if k > n {
                    u += bn * x[k - n - 1];
                }
            }
            assert_eq!(c.slice(modulo(u, c.delta())), labels[k], "symbol {k}");
        }
    }
}
