//! Spectral masks, Nyquist pulses and the mask-constrained SSF pulse design.

mod design;
mod mask;
mod qp;
mod response;
mod rrc;

pub use design::{cosine_basis, cosine_matrix, design_ssf, DesignWeights, SsfDesign};
pub use mask::{seven_segment_mask, MaskDefinition, SpectralMask, VERIFY_OVERSAMPLING};
pub use qp::{
    solve_constrained_qp, solve_constrained_qp_with, KktResiduals, QpSettings, QpSolution,
};
pub use response::{
    check_mask, freq_response, freq_response_db, transmit_psd_db, MaskReport, DB_FLOOR,
};
pub use rrc::{rrc_taps, truncated_rrc_taps, FilterTaps, DEFAULT_RRC_SPAN};
