//! Monte-Carlo sweeps over constellations, SNRs and channel draws.

mod config;
mod emit;
mod run;

pub use config::{
    ChannelEqualizer, ChannelModel, EqualizerKind, FilterConfig, PhaseNoiseSpec, PilotMode, PnComp,
    ScenarioConfig, Scheme, MIN_SYMBOLS_PER_POINT, RRC_SYMBOL_RATE, SSF_SYMBOL_RATE,
};
pub use emit::{
    config_from_document, emit_results, envelope, results_csv, RunManifest, ENVELOPE_FILE, MANIFEST_FILE, RESULTS_FILE,
};
pub use run::{mask_fit_gain, run_scenario, stream_rng, PointSummary, ScenarioOutput, SchemeFilters, StreamPurpose, ANY};
