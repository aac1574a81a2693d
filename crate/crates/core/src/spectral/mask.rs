use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ratio between the verification grid and the design grid.
pub const VERIFY_OVERSAMPLING: usize = 4;

/// Serialized mask: `{"corners": [...], "levels_db": [...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskDefinition {
    pub corners: Vec<f64>,
    pub levels_db: Vec<f64>,
}

impl MaskDefinition {
    /// The 17-30 GHz seven-segment envelope used throughout the simulator,
    /// expressed at 102.4 MHz sampling.
    pub fn reference() -> Self {
        Self {
            corners: vec![0.11, 0.14, 0.15, 0.16, 0.39, 0.46, 0.5],
            levels_db: vec![0.0, -5.0, -32.0, -35.0, -45.0, -60.0, -60.0],
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Piecewise-linear (in dB) upper envelope for the permitted transmit PSD.
///
/// Frequencies are normalized to the sample rate (0.5 is Nyquist). The level
/// is held at `levels_db[0]` below the first corner, interpolated linearly in
/// dB between corners and held at the last level beyond the final corner.
/// The grid has `grid_segments + 1` equally spaced points covering [0, 0.5]
/// including both ends.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralMask {
    corners: Vec<f64>,
    levels_db: Vec<f64>,
    grid_segments: usize,
}

impl SpectralMask {
    pub fn new(corners: Vec<f64>, levels_db: Vec<f64>, grid_segments: usize) -> Result<Self> {
        if corners.is_empty() {
            return Err(Error::InvalidMask("at least one corner is required".into()));
        }
        if corners.len() != levels_db.len() {
            return Err(Error::InvalidMask(format!(
                "{} corners but {} levels",
                corners.len(),
                levels_db.len()
            )));
        }
        if grid_segments == 0 {
            return Err(Error::InvalidMask("grid must have at least one segment".into()));
        }
        for (i, &f) in corners.iter().enumerate() {
            if !f.is_finite() || !(0.0..=0.5).contains(&f) {
                return Err(Error::InvalidMask(format!("corner {i} = {f} outside [0, 0.5]")));
            }
            if i > 0 && f <= corners[i - 1] {
                return Err(Error::InvalidMask(format!(
                    "corners must be strictly increasing ({} then {f})",
                    corners[i - 1]
                )));
            }
        }
        if let Some(l) = levels_db.iter().find(|l| !l.is_finite() || **l > 0.0) {
            return Err(Error::InvalidMask(format!("level {l} dB is not a finite value <= 0")));
        }
        if levels_db[0] != 0.0 {
            return Err(Error::InvalidMask(format!(
                "level at f = 0 must be 0 dB, got {}",
                levels_db[0]
            )));
        }
        Ok(Self { corners, levels_db, grid_segments })
    }

    pub fn from_definition(def: &MaskDefinition, grid_segments: usize) -> Result<Self> {
        Self::new(def.corners.clone(), def.levels_db.clone(), grid_segments)
    }

    pub fn reference(grid_segments: usize) -> Self {
        Self::from_definition(&MaskDefinition::reference(), grid_segments)
            .expect("reference mask is valid")
    }

    pub fn definition(&self) -> MaskDefinition {
        MaskDefinition { corners: self.corners.clone(), levels_db: self.levels_db.clone() }
    }

    pub fn corners(&self) -> &[f64] {
        &self.corners
    }

    pub fn levels_db(&self) -> &[f64] {
        &self.levels_db
    }

    pub fn grid_segments(&self) -> usize {
        self.grid_segments
    }

    /// Number of design grid points (segments + 1).
    pub fn grid_len(&self) -> usize {
        self.grid_segments + 1
    }

    pub fn level_db(&self, f: f64) -> f64 {
        let c = &self.corners;
        let l = &self.levels_db;
        if f <= c[0] {
            return l[0];
        }
        match c.iter().position(|&ci| ci >= f) {
            None => *l.last().unwrap(),
            Some(i) => {
                let t = (f - c[i - 1]) / (c[i] - c[i - 1]);
                l[i - 1] + t * (l[i] - l[i - 1])
            }
        }
    }

    /// Linear amplitude bound `10^(level/20)`.
    pub fn amplitude(&self, f: f64) -> f64 {
        10f64.powf(self.level_db(f) / 20.0)
    }

    pub fn grid(&self) -> Vec<f64> {
        uniform_grid(self.grid_segments)
    }

    pub fn verification_grid(&self) -> Vec<f64> {
        uniform_grid(self.grid_segments * VERIFY_OVERSAMPLING)
    }

    /// Desired response on the design grid: the mask in linear magnitude.
    pub fn desired_response(&self) -> Vec<f64> {
        self.grid().iter().map(|&f| self.amplitude(f)).collect()
    }
}

/// Seven-corner mask; rejects any other corner count.
pub fn seven_segment_mask(
    corners: &[f64],
    levels_db: &[f64],
    grid_segments: usize,
) -> Result<SpectralMask> {
    if corners.len() != 7 {
        return Err(Error::InvalidMask(format!(
            "seven-segment mask needs 7 corners, got {}",
            corners.len()
        )));
    }
    SpectralMask::new(corners.to_vec(), levels_db.to_vec(), grid_segments)
}

fn uniform_grid(segments: usize) -> Vec<f64> {
    (0..=segments).map(|i| 0.5 * i as f64 / segments as f64).collect()
}
