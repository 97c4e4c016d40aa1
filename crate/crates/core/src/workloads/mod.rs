//! Desk-scale workloads with controllable spectral anisotropy.

mod profile;
mod quadratic;
mod stream;
mod zipf;

pub use profile::{paper_profile, ProfileConfig};
pub use quadratic::{QuadraticTask, QuadraticTaskConfig};
pub use stream::{SpikedStream, SpikedStreamConfig, COEFFICIENT_JITTER};
pub use zipf::{freq_weights, zipf_probabilities, ZipfBatch, ZipfTask, ZipfTaskConfig};
