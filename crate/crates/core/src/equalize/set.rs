use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::dfe::mmse_dfe;
use crate::error::Result;

/// Filters of one receiver configuration, serializable for reproducibility.
///
/// `w_ht` and `b_ht` are stored unbiased: the FFF output is scaled so the
/// cursor is one and `b_ht` is the matching monic post-cursor tail, ready for
/// the transmit-side precoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EqualizerSet {
    /// Channel equalizer applied first; `[1]` when absent.
    pub w_hc: Vec<Complex64>,
    pub channel_delay: usize,
    pub w_ht: Vec<Complex64>,
    /// Strictly causal feedback `b₁ … b_Nb`.
    pub b_ht: Vec<Complex64>,
    pub decision_delay: usize,
    pub sigma2_used: f64,
    /// Biased design MSE of the FFF/FBF pair.
    pub mse: f64,
}

impl EqualizerSet {
    /// Unbiased post-equalization noise variance `mse / (1 − mse)`.
    pub fn unbiased_noise(&self) -> f64 {
        self.mse / (1.0 - self.mse)
    }

    pub fn total_delay(&self) -> usize {
        self.channel_delay + self.decision_delay
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// THP filters for `h`: the MMSE-DFE solution with FFF at the receiver and
/// FBF at the transmitter, both rescaled to a unit cursor.
pub fn thp_filters_for(h: &[Complex64], sigma2: f64, ff_len: usize, fb_len: usize) -> Result<EqualizerSet> {
    let dfe = mmse_dfe(h, sigma2, ff_len, fb_len)?;
    let g = dfe.cursor;
    Ok(EqualizerSet {
        w_hc: vec![Complex64::new(1.0, 0.0)],
        channel_delay: 0,
        w_ht: dfe.fff.iter().map(|w| w / g).collect(),
        b_ht: dfe.fbf.iter().map(|b| b / g).collect(),
        decision_delay: dfe.delay,
        sigma2_used: sigma2,
        mse: dfe.mse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_channel_degenerates() {
        let s = thp_filters_for(&[Complex64::new(1.0, 0.0)], 1e-6, 5, 3).unwrap();
        assert_eq!(s.decision_delay, 0);
        assert!((s.w_ht[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!(s.b_ht.iter().all(|b| b.norm() < 1e-12));
    }

    #[test]
    fn json_round_trip() {
        let s = thp_filters_for(&[Complex64::new(1.0, 0.0), Complex64::new(0.5, 0.1)], 1e-3, 4, 2).unwrap();
        let back = EqualizerSet::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(s, back);
    }
}
