//! Spectral measurements on gradients, moments and optimizer outputs.

mod alignment;
mod decomposition;
mod relvar;
mod spectrum;
mod subspace;

pub use alignment::{max_abs_overlap, ns_alignment, ns_alignment_with, AlignmentReport};
pub use decomposition::{spike_tail_split, tail_suppression, tail_suppression_parts, TailSuppression};
pub use relvar::{loglog_slope, relvar, spearman, unbiased_variance, RelVarEntry, RelVarReport};
pub use spectrum::{cumulative_energy, largest_log_gap, spectrum_report, SpectrumReport, DEFAULT_SPIKE_RATIO};
pub use subspace::{canonical_correlations, mean_canonical_correlation, subspace_similarity, ORTHONORMAL_TOLERANCE};

pub use decomposition::median;
