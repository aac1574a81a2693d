use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::constellation::Constellation;
use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SymbolRole {
    /// Known preamble symbols.
    Training,
    Pilot,
    Data,
    /// Unscored random symbols that flush filter memories at the end.
    Guard,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameLayout {
    pub training_len: usize,
    /// Distance between pilots; every block holds one pilot followed by
    /// `period − 1` data symbols, and a closing pilot ends the last block.
    pub pilot_period: Option<usize>,
    /// Minimum number of data symbols; rounded up to whole blocks.
    pub data_len: usize,
    pub guard_len: usize,
}

impl FrameLayout {
    pub fn validate(&self) -> Result<()> {
        if let Some(p) = self.pilot_period {
            if p < 2 {
                return Err(invalid(format!("pilot period {p} must be >= 2")));
            }
        }
        if self.data_len == 0 {
            return Err(invalid("frame needs at least one data symbol"));
        }
        Ok(())
    }

    pub fn roles(&self) -> Result<Vec<SymbolRole>> {
        self.validate()?;
        let mut roles = vec![SymbolRole::Training; self.training_len];
        match self.pilot_period {
            None => roles.extend(std::iter::repeat_n(SymbolRole::Data, self.data_len)),
            Some(p) => {
                let blocks = self.data_len.div_ceil(p - 1);
                for _ in 0..blocks {
                    roles.push(SymbolRole::Pilot);
                    roles.extend(std::iter::repeat_n(SymbolRole::Data, p - 1));
                }
                roles.push(SymbolRole::Pilot);
            }
        }
        roles.extend(std::iter::repeat_n(SymbolRole::Guard, self.guard_len));
        Ok(roles)
    }
}

/// Symbols of one transmission burst with their roles.
#[derive(Clone, Debug)]
pub struct SymbolFrame {
    pub labels: Vec<u32>,
    pub symbols: Vec<Complex64>,
    pub roles: Vec<SymbolRole>,
    pub pilot_label: u32,
    pub pilot_period: Option<usize>,
    pub samples_per_symbol: u32,
}

impl SymbolFrame {
    /// Uniform random data and training; pilots are the constellation's
    /// outer-ring reference point.
    pub fn random<R: Rng + ?Sized>(
        constellation: &Constellation,
        layout: &FrameLayout,
        samples_per_symbol: u32,
        rng: &mut R,
    ) -> Result<Self> {
        let roles = layout.roles()?;
        let pilot_label = constellation.slice(constellation.outer_pilot());
        let m = constellation.order() as u32;
        let labels: Vec<u32> = roles
            .iter()
            .map(|r| match r {
                SymbolRole::Pilot => pilot_label,
                _ => rng.random_range(0..m),
            })
            .collect();
        let symbols = labels.iter().map(|&l| constellation.point(l)).collect();
        Ok(Self {
            labels,
            symbols,
            roles,
            pilot_label,
            pilot_period: layout.pilot_period,
            samples_per_symbol,
        })
    }

    /// Wraps explicit symbols, all tagged as data.
    pub fn from_symbols(symbols: Vec<Complex64>, samples_per_symbol: u32) -> Self {
        let n = symbols.len();
        Self {
            labels: vec![0; n],
            symbols,
            roles: vec![SymbolRole::Data; n],
            pilot_label: 0,
            pilot_period: None,
            samples_per_symbol,
        }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn indices(&self, role: SymbolRole) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.roles[k] == role).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn layout_places_pilots_periodically() {
        let layout = FrameLayout { training_len: 10, pilot_period: Some(5), data_len: 10, guard_len: 3 };
        let roles = layout.roles().unwrap();
        assert_eq!(roles.len(), 10 + 3 * 5 + 1 + 3);
        let pilots: Vec<usize> = (0..roles.len()).filter(|&k| roles[k] == SymbolRole::Pilot).collect();
        assert_eq!(pilots, vec![10, 15, 20, 25]);
        assert_eq!(roles.iter().filter(|r| **r == SymbolRole::Data).count(), 12);
    }

    #[test]
    fn rejects_short_period() {
        let layout = FrameLayout { training_len: 0, pilot_period: Some(1), data_len: 10, guard_len: 0 };
        assert!(layout.roles().is_err());
    }

    #[test]
    fn pilots_are_outer_ring() {
        let c = Constellation::new(256).unwrap();
        let layout = FrameLayout { training_len: 4, pilot_period: Some(50), data_len: 200, guard_len: 0 };
        let f = SymbolFrame::random(&c, &layout, 2, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let outer = c.level(c.side() - 1);
        for k in f.indices(SymbolRole::Pilot) {
            let p = f.symbols[k];
            assert!((p.re.abs() - outer).abs() < 1e-12 || (p.im.abs() - outer).abs() < 1e-12);
        }
    }
}
