use num_complex::Complex64;

use crate::error::{invalid, Result};

/// Square M-QAM with unit average energy and Gray labels.
///
/// Points are stored indexed by their bit label. The label of the point at
/// in-phase level `i` and quadrature level `q` (both counted from the most
/// negative level) is `gray(i) << (m/2) | gray(q)`, so horizontal and
/// vertical neighbours differ in exactly one bit.
#[derive(Clone, Debug)]
pub struct Constellation {
    order: usize,
    bits: u32,
    side: usize,
    scale: f64,
    points: Vec<Complex64>,
    /// Level index → label contribution, for the separable slicer.
    gray_of_level: Vec<u32>,
}

fn gray(i: u32) -> u32 {
    i ^ (i >> 1)
}

impl Constellation {
    pub fn new(order: usize) -> Result<Self> {
        if order < 4 || !order.is_power_of_two() || order.trailing_zeros() % 2 != 0 {
            return Err(invalid(format!("{order}-QAM is not a square power-of-four constellation")));
        }
        if order > 1 << 20 {
            return Err(invalid(format!("{order}-QAM exceeds the supported 2^20 points")));
        }
        let bits = order.trailing_zeros();
        let side = 1usize << (bits / 2);
        let scale = (2.0 * (order as f64 - 1.0) / 3.0).sqrt();
        let gray_of_level: Vec<u32> = (0..side as u32).map(gray).collect();
        let mut points = vec![Complex64::new(0.0, 0.0); order];
        for i in 0..side {
            for q in 0..side {
                let label = (gray_of_level[i] << (bits / 2)) | gray_of_level[q];
                points[label as usize] = Complex64::new(
                    (2.0 * i as f64 - (side as f64 - 1.0)) / scale,
                    (2.0 * q as f64 - (side as f64 - 1.0)) / scale,
                );
            }
        }
        Ok(Self { order, bits, side, scale, points, gray_of_level })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.bits
    }

    /// Number of amplitude levels per dimension (√M).
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, label: u32) -> Complex64 {
        self.points[label as usize]
    }

    /// Minimum distance between points, `2/√(2(M−1)/3)`.
    pub fn d_min(&self) -> f64 {
        2.0 / self.scale
    }

    /// Modulo constant `Δ = √M · d_min`.
    pub fn delta(&self) -> f64 {
        self.side as f64 * self.d_min()
    }

    /// Amplitude of PAM level `i` in one dimension.
    pub fn level(&self, i: usize) -> f64 {
        (2.0 * i as f64 - (self.side as f64 - 1.0)) / self.scale
    }

    /// Gray code contributed by PAM level `i`.
    pub fn level_gray(&self, i: usize) -> u32 {
        self.gray_of_level[i]
    }

    fn nearest_level(&self, x: f64) -> usize {
        let idx = ((x * self.scale + self.side as f64 - 1.0) / 2.0).round();
        idx.clamp(0.0, self.side as f64 - 1.0) as usize
    }

    /// Label of the nearest constellation point.
    pub fn slice(&self, z: Complex64) -> u32 {
        let i = self.nearest_level(z.re);
        let q = self.nearest_level(z.im);
        (self.gray_of_level[i] << (self.bits / 2)) | self.gray_of_level[q]
    }

    /// Nearest constellation point.
    pub fn slice_point(&self, z: Complex64) -> Complex64 {
        Complex64::new(self.level(self.nearest_level(z.re)), self.level(self.nearest_level(z.im)))
    }

    /// Bit `i` (0 = most significant) of `label`.
    pub fn bit(&self, label: u32, i: u32) -> u8 {
        ((label >> (self.bits - 1 - i)) & 1) as u8
    }

    /// Default pilot: outer ring, one level in from the top-left corner,
    /// `(−(√M−1) + j(√M−3)) / scale`.
    pub fn outer_pilot(&self) -> Complex64 {
        let s = self.side as f64;
        let im = if self.side > 2 { s - 3.0 } else { s - 1.0 };
        Complex64::new(-(s - 1.0), im) / self.scale
    }
}

/// Peak data rate `R · log2 M` in bit/s.
pub fn max_data_rate(symbol_rate: f64, order: usize) -> f64 {
    symbol_rate * (order as f64).log2()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_energy_everywhere() {
        for k in [2, 3, 4, 5, 6, 7, 8] {
            let c = Constellation::new(1 << (2 * k)).unwrap();
            let e: f64 = c.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / c.order() as f64;
            assert!((e - 1.0).abs() < 1e-12, "M = {}", c.order());
        }
    }

    #[test]
    fn qpsk_points() {
        let c = Constellation::new(4).unwrap();
        let s = 0.5f64.sqrt();
        for p in c.points() {
            assert!((p.re.abs() - s).abs() < 1e-15 && (p.im.abs() - s).abs() < 1e-15);
        }
    }

    #[test]
    fn contains_reference_pilot() {
        let c = Constellation::new(1024).unwrap();
        let target = Complex64::new(-31.0, 29.0) / 682f64.sqrt();
        assert!(c.points().iter().any(|p| (p - target).norm() < 1e-12));
        assert!((c.outer_pilot() - target).norm() < 1e-12);
    }

    #[test]
    fn d_min_matches_brute_force() {
        let c = Constellation::new(256).unwrap();
        assert!((c.d_min() - (6.0f64 / 255.0).sqrt()).abs() < 1e-12);
        let pts = c.points();
        let mut best = f64::MAX;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                best = best.min((pts[i] - pts[j]).norm());
            }
        }
        assert!((best - c.d_min()).abs() < 1e-12);
        assert!((c.delta() - 16.0 * c.d_min()).abs() < 1e-15);
    }

    #[test]
    fn gray_neighbours_differ_in_one_bit() {
        let c = Constellation::new(64).unwrap();
        let d = c.d_min();
        let pts = c.points();
        for a in 0..pts.len() {
            for b in 0..pts.len() {
                if ((pts[a] - pts[b]).norm() - d).abs() < 1e-9 {
                    assert_eq!((a ^ b).count_ones(), 1);
                }
            }
        }
    }

    #[test]
    fn slicer_matches_exhaustive_search() {
        let c = Constellation::new(64).unwrap();
        let mut state = 12345u64;
        for _ in 0..2000 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let re = ((state >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 3.0;
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let im = ((state >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 3.0;
            let z = Complex64::new(re, im);
            let best = (0..c.order())
                .min_by(|&a, &b| {
                    (z - c.points()[a]).norm().partial_cmp(&(z - c.points()[b]).norm()).unwrap()
                })
                .unwrap();
            assert_eq!(c.slice(z), best as u32);
            assert_eq!(c.slice_point(z), c.points()[best]);
        }
    }

    #[test]
    fn rejects_non_square() {
        assert!(Constellation::new(32).is_err());
        assert!(Constellation::new(100).is_err());
        assert!(Constellation::new(2).is_err());
    }

    #[test]
    fn table_one_rates() {
        assert_eq!(max_data_rate(51.2e6, 1 << 10), 512e6);
        assert_eq!(max_data_rate(25.6e6, 1 << 20), 512e6);
    }
}
