use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::link::{Constellation, RummlerStats};
use crate::phasesync::{BcjrConfig, DpllConfig, MIN_PRIOR_DRAWS};
use crate::spectral::MaskDefinition;

pub const RRC_SYMBOL_RATE: f64 = 25.6e6;
pub const SSF_SYMBOL_RATE: f64 = 51.2e6;
/// Smallest per-point symbol budget accepted for SER estimates near 1e-2.
pub const MIN_SYMBOLS_PER_POINT: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Nyquist RRC at 25.6 Msym/s.
    Rrc,
    /// Mask-filling designed pulse at 51.2 Msym/s.
    Ssf,
    /// 16-tap truncated RRC at 51.2 Msym/s, scaled to the mask.
    RrcWide,
}

impl Scheme {
    pub fn samples_per_symbol(self) -> u32 {
        match self {
            Scheme::Rrc => 4,
            Scheme::Ssf | Scheme::RrcWide => 2,
        }
    }

    pub fn symbol_rate(self) -> f64 {
        match self {
            Scheme::Rrc => RRC_SYMBOL_RATE,
            Scheme::Ssf | Scheme::RrcWide => SSF_SYMBOL_RATE,
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            Scheme::Rrc => "rrc",
            Scheme::Ssf => "ssf",
            Scheme::RrcWide => "rrc-wide",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EqualizerKind {
    Le,
    Dfe,
    /// Precoder for the pulse, linear equalizer for the channel.
    Thp,
    /// Precoder for pulse and channel together.
    ThpJoint,
}

impl EqualizerKind {
    pub fn id(self) -> &'static str {
        match self {
            EqualizerKind::Le => "le",
            EqualizerKind::Dfe => "dfe",
            EqualizerKind::Thp => "thp",
            EqualizerKind::ThpJoint => "thp-joint",
        }
    }

    pub fn is_precoded(self) -> bool {
        matches!(self, EqualizerKind::Thp | EqualizerKind::ThpJoint)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PnComp {
    None,
    Dpll,
    Bcjr,
}

impl PnComp {
    pub fn id(self) -> &'static str {
        match self {
            PnComp::None => "none",
            PnComp::Dpll => "dpll",
            PnComp::Bcjr => "bcjr",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PilotMode {
    Estimated,
    /// Receiver is handed the true effective pilots.
    Known,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelModel {
    Flat,
    Rummler {
        #[serde(default)]
        stats: RummlerStats,
    },
    /// One fixed notch for every draw.
    Fixed { depth_db: f64, notch_freq_hz: f64 },
}

impl Default for ChannelModel {
    fn default() -> Self {
        ChannelModel::Rummler { stats: RummlerStats::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseNoiseSpec {
    pub level_dbc_hz: f64,
    pub offset_hz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelEqualizer {
    /// Closed-form MMSE target equalizer from the known channel.
    Mmse,
    /// LMS trained on the preamble.
    Lms { step: f64, passes: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub rrc_beta: f64,
    /// RRC span in symbols for the baseline pulse and the receive filter.
    pub rrc_span: usize,
    pub ssf_taps: usize,
    pub wide_taps: usize,
    pub grid_segments: usize,
    pub mask: Option<MaskDefinition>,
    /// FFF / LE length; defaults to 129 for wideband schemes and 1 for RRC.
    pub ff_len: Option<usize>,
    pub fb_len: usize,
    pub channel_le_len: usize,
    pub channel_equalizer: ChannelEqualizer,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            rrc_beta: 0.15,
            rrc_span: 64,
            ssf_taps: 257,
            wide_taps: 16,
            grid_segments: 1000,
            mask: None,
            ff_len: None,
            fb_len: 64,
            channel_le_len: 31,
            channel_equalizer: ChannelEqualizer::Mmse,
        }
    }
}

impl FilterConfig {
    pub fn ff_len_for(&self, scheme: Scheme) -> usize {
        self.ff_len.unwrap_or(match scheme {
            Scheme::Rrc => 1,
            Scheme::Ssf | Scheme::RrcWide => 129,
        })
    }
}

fn default_orders() -> Vec<usize> {
    vec![1024]
}
fn default_snr() -> Vec<f64> {
    vec![50.0]
}
fn default_n_symbols() -> usize {
    100_000
}
fn default_channels() -> usize {
    100
}
fn default_d_pilot() -> usize {
    50
}
fn default_training() -> usize {
    400
}
fn default_prior_draws() -> usize {
    MIN_PRIOR_DRAWS
}

/// One sweep: a transmission scheme with its receiver over a grid of
/// constellations and SNRs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Overrides the scheme identifier written to the results.
    #[serde(default)]
    pub label: Option<String>,
    pub scheme: Scheme,
    pub equalizer: EqualizerKind,
    #[serde(default = "default_pn_comp")]
    pub pn_comp: PnComp,
    #[serde(default = "default_pilot_mode")]
    pub pilots: PilotMode,
    #[serde(rename = "M", default = "default_orders")]
    pub orders: Vec<usize>,
    #[serde(default = "default_snr")]
    pub snr_db: Vec<f64>,
    /// Scored data symbols per sweep point, split over the channel draws.
    #[serde(default = "default_n_symbols")]
    pub n_symbols: usize,
    #[serde(default = "default_channels")]
    pub n_channels: usize,
    #[serde(default)]
    pub channel: ChannelModel,
    #[serde(default = "default_d_pilot")]
    pub d_pilot: usize,
    #[serde(default = "default_training")]
    pub training_len: usize,
    #[serde(default)]
    pub phase_noise: Option<PhaseNoiseSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub filters: FilterConfig,
    #[serde(default)]
    pub dpll: DpllConfig,
    #[serde(default)]
    pub bcjr: BcjrConfig,
    #[serde(default = "default_prior_draws")]
    pub prior_draws: usize,
}

fn default_pn_comp() -> PnComp {
    PnComp::None
}
fn default_pilot_mode() -> PilotMode {
    PilotMode::Estimated
}

impl ScenarioConfig {
    pub fn new(scheme: Scheme, equalizer: EqualizerKind, pn_comp: PnComp) -> Self {
        Self {
            label: None,
            scheme,
            equalizer,
            pn_comp,
            pilots: PilotMode::Estimated,
            orders: default_orders(),
            snr_db: default_snr(),
            n_symbols: default_n_symbols(),
            n_channels: default_channels(),
            channel: ChannelModel::default(),
            d_pilot: default_d_pilot(),
            training_len: default_training(),
            phase_noise: None,
            seed: 0,
            filters: FilterConfig::default(),
            dpll: DpllConfig::default(),
            bcjr: BcjrConfig::default(),
            prior_draws: default_prior_draws(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Identifier written to the `scheme` column.
    pub fn scheme_id(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        let mut id = format!("{}-{}", self.scheme.id(), self.equalizer.id());
        if self.pn_comp != PnComp::None {
            id.push('-');
            id.push_str(self.pn_comp.id());
            if self.pilots == PilotMode::Known {
                id.push_str("-known");
            }
        }
        id
    }

    pub fn uses_pilots(&self) -> bool {
        self.pn_comp != PnComp::None
    }

    pub fn validate(&self) -> Result<()> {
        if self.orders.is_empty() || self.snr_db.is_empty() {
            return Err(invalid("scenario needs at least one constellation and one SNR"));
        }
        for &m in &self.orders {
            Constellation::new(m)?;
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(invalid("SNR values must be finite"));
        }
        if self.n_symbols < MIN_SYMBOLS_PER_POINT {
            return Err(invalid(format!(
                "n_symbols {} below the {MIN_SYMBOLS_PER_POINT} needed per sweep point",
                self.n_symbols
            )));
        }
        if self.n_channels == 0 {
            return Err(invalid("n_channels must be >= 1"));
        }
        if self.uses_pilots() && self.d_pilot < 2 {
            return Err(invalid("pilot period must be >= 2"));
        }
        if self.pn_comp != PnComp::None && self.training_len == 0 {
            return Err(invalid("phase tracking needs a training preamble"));
        }
        if self.equalizer == EqualizerKind::Dfe && self.pn_comp != PnComp::None {
            return Err(invalid("phase tracking is not combined with the receiver-side DFE"));
        }
        if let Some(pn) = self.phase_noise {
            if !(pn.offset_hz > 0.0) || !pn.level_dbc_hz.is_finite() {
                return Err(invalid("phase-noise offset must be positive and the level finite"));
            }
        }
        match &self.channel {
            ChannelModel::Rummler { stats } => stats.validate()?,
            ChannelModel::Fixed { depth_db, .. } if *depth_db > 0.0 => {
                return Err(invalid("notch depth must be <= 0 dB"));
            }
            _ => {}
        }
        if self.filters.ssf_taps % 2 == 0 || self.filters.rrc_span % 2 == 1 {
            return Err(invalid("SSF length must be odd and the RRC span even"));
        }
        if self.filters.channel_le_len == 0 || self.filters.ff_len_for(self.scheme) == 0 {
            return Err(invalid("equalizer lengths must be >= 1"));
        }
        if let ChannelEqualizer::Lms { step, .. } = self.filters.channel_equalizer {
            if !(step > 0.0) {
                return Err(invalid("LMS step must be positive"));
            }
            if self.training_len < 10 * self.filters.channel_le_len {
                return Err(invalid("LMS training needs at least 10x the channel equalizer length"));
            }
        }
        if self.pn_comp == PnComp::Bcjr && self.prior_draws < MIN_PRIOR_DRAWS {
            return Err(invalid(format!("prior_draws must be >= {MIN_PRIOR_DRAWS}")));
        }
        Ok(())
    }

    pub fn sigma_psi2(&self) -> f64 {
        match self.phase_noise {
            Some(pn) => crate::link::pn_variance_from_dbc(pn.level_dbc_hz, pn.offset_hz, 1.0 / self.scheme.symbol_rate()),
            None => 0.0,
        }
    }
}
