//! Carrier phase recovery on the equalized symbol stream.

mod bcjr;
mod dpll;
mod pilot;
mod track;
mod trellis;

pub use bcjr::{bcjr_block, branch_distance, BlockEstimate, ForwardPass};
pub use dpll::{
    dpll_error, dpll_update, run_thp_dpll, thp_dpll_pilot_decide, DpllConfig, DpllState, TrackInput,
};
pub use pilot::{
    effective_pilot_prior, pilot_phase_estimate, pilot_phase_full_search, EffectivePilotPrior, PilotEstimate,
    MIN_PRIOR_DRAWS, PRIOR_TRUNCATION,
};
pub use track::{run_thp_bcjr, training_phase, BcjrConfig, PhaseTrack};
pub use trellis::{build_phase_trellis, PhaseTrellis, PRUNE_SIGMAS};
