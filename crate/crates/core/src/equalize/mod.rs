//! MMSE linear, decision-feedback and Tomlinson-Harashima equalization.

mod dfe;
mod lms;
mod set;
mod thp;
mod wiener;

pub use dfe::{mmse_dfe, mmse_dfe_at_delay, DfeSolution};
pub use lms::{adaptive_le_train, adaptive_le_train_with};
pub use set::{thp_filters_for, EqualizerSet};
pub use thp::{modulo, modulo_displacement, thp_precode, ThpPrecoder};
pub use wiener::{conv_matrix, mmse_le, mmse_le_best_delay, mmse_target_best_delay, LinearEqualizer};
