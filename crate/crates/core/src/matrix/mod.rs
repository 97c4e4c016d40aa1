//! Dense real matrices, products with FLOP accounting, Householder QR and
//! exact decompositions used as test oracles.

mod dense;
mod eigen;
mod flops;
pub mod io;
mod ops;
mod qr;
mod random;
mod svd;

pub use dense::DenseMatrix;
pub use eigen::{sym_eigen, SymEigen};
pub use flops::FlopCounter;
pub use ops::{gemm, low_rank_product, matmul, mul, mul_nt, mul_tn};
pub use qr::{thin_qr, thin_qr_flops, QrFactors, RANK_TOLERANCE};
pub use random::{gaussian_from_rng, random_gaussian, random_orthonormal};
pub use svd::{exact_svd, SvdFactors, MAX_DIMENSION, OFF_DIAGONAL_TOLERANCE};
