//! Rank-`k` subspace tracking by cached power iteration and Newton–Schulz
//! orthogonalization.

mod bootstrap;
pub mod cost_model;
mod newton_schulz;
mod power_iter;

pub use bootstrap::{bootstrap_lowrank_svd, BootstrapOutput};
pub use newton_schulz::{
    newton_schulz, newton_schulz_with, round_bf16, NsConfig, NsPrecision, NS_DEFAULT_STEPS, NS_QUINTIC,
};
pub use power_iter::{power_iteration_svd, PowerIterConfig, PowerIterOutput, SubspaceCache, COLUMN_COLLAPSE_TOLERANCE};
