use serde::{Deserialize, Serialize};

use crate::error::{Result, SpectraError};
use crate::matrix::{gemm, matmul, DenseMatrix, FlopCounter};

/// Quintic coefficients `(a, b, c)` for `X <- aX + b(XX^T)X + c(XX^T)^2 X`.
pub const NS_QUINTIC: [f64; 3] = [3.4445, -4.7750, 2.0315];
pub const NS_DEFAULT_STEPS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NsPrecision {
    #[default]
    F64,
    /// Round every intermediate to bfloat16, as accelerator kernels do.
    Bf16,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NsConfig {
    pub coefficients: [f64; 3],
    pub steps: usize,
    pub precision: NsPrecision,
}

impl Default for NsConfig {
    fn default() -> Self {
        Self { coefficients: NS_QUINTIC, steps: NS_DEFAULT_STEPS, precision: NsPrecision::F64 }
    }
}

/// Round to the nearest bfloat16 value (ties to even), returned as `f64`.
pub fn round_bf16(x: f64) -> f64 {
    let f = x as f32;
    if !f.is_finite() {
        return f as f64;
    }
    let bits = f.to_bits();
    let rounded = bits.wrapping_add(0x7FFF + ((bits >> 16) & 1)) & 0xFFFF_0000;
    f32::from_bits(rounded) as f64
}

fn quantize(m: &mut DenseMatrix, precision: NsPrecision) {
    if precision == NsPrecision::Bf16 {
        m.data_mut().iter_mut().for_each(|x| *x = round_bf16(*x));
    }
}

/// Newton–Schulz orthogonalization with the default quintic and 64-bit
/// arithmetic.
pub fn newton_schulz(g: &DenseMatrix, steps: usize, flops: &FlopCounter) -> Result<DenseMatrix> {
    newton_schulz_with(g, &NsConfig { steps, ..NsConfig::default() }, flops)
}

/// Newton–Schulz orthogonalization. The input is scaled by `1/||G||_F` and
/// the polynomial is evaluated on the smaller Gram side.
pub fn newton_schulz_with(g: &DenseMatrix, cfg: &NsConfig, flops: &FlopCounter) -> Result<DenseMatrix> {
    if cfg.steps == 0 {
        return Err(SpectraError::InvalidArgument("newton_schulz needs at least one step".into()));
    }
    if !g.is_finite() {
        return Err(SpectraError::NonFinite("newton_schulz"));
    }
    let norm = g.frobenius_norm();
    if norm == 0.0 {
        return Err(SpectraError::Degenerate("newton_schulz of a zero matrix is undefined".into()));
    }
    let tall = g.rows() > g.cols();
    let mut x = if tall { g.transpose() } else { g.clone() };
    x.scale(1.0 / norm);
    quantize(&mut x, cfg.precision);
    let [a, b, c] = cfg.coefficients;
    for _ in 0..cfg.steps {
        let mut gram = matmul(&x, &x, false, true, flops)?;
        quantize(&mut gram, cfg.precision);
        // poly = b*A + c*A^2
        let mut poly = gram.scaled(b);
        gemm(c, &gram, false, &gram, false, 1.0, &mut poly, flops)?;
        quantize(&mut poly, cfg.precision);
        // x = a*x + poly*x
        let prev = x.clone();
        gemm(1.0, &poly, false, &prev, false, a, &mut x, flops)?;
        quantize(&mut x, cfg.precision);
    }
    Ok(if tall { x.transpose() } else { x })
}
