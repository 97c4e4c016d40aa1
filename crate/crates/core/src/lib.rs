#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` deliberately rejects NaN

pub mod checkpoint;
pub mod diagnostics;
pub mod error;
pub mod matrix;
pub mod optim;
pub mod seed;
pub mod spectral;
pub mod theory;
pub mod workloads;

pub use checkpoint::Checkpoint;
pub use error::{Result, SpectraError};
pub use matrix::{exact_svd, matmul, thin_qr, DenseMatrix, FlopCounter, SvdFactors};
