//! Low-precision ADC path: uniform quantizer, Bussgang linearization of the
//! quantized covariance, and a surrogate model the unmodified solver can
//! minimize.
//!
//! A `b`-bit uniform quantizer with step `s` has thresholds
//! `r_z = (z − 2^{b−1})·s` for `z = 1..2^b−1`; an input in the bin
//! `(r_{z−1}, r_z]` reproduces as `r_z − s/2`, and inputs above the top
//! threshold clip to `r_top + s/2`. Real and imaginary parts are quantized
//! separately. Writing `ρ` for the distortion factor `2^{−2b}`, the
//! linearized output covariance is `(1−ρ)²Σ + ρ(1−ρ)·Diag(Σ)`; a
//! `paper-literal` mode with `ρ²Σ + ρ(1−ρ)·Diag(Σ)` is kept for comparison.
//! The solver-facing surrogate folds the diagonal distortion into a scalar
//! noise floor so coordinate updates stay rank-one.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{hermitianize, ReceivedSignal, SampleCovariance, SequenceMatrix};

/// Which second-moment formula backs the linearization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormulaMode {
    /// `(1−ρ)²Σ + ρ(1−ρ)·Diag(Σ)` — lossless at infinite resolution.
    StandardBussgang,
    /// `ρ²Σ + ρ(1−ρ)·Diag(Σ)` with scalar `ρ`; kept for comparison.
    PaperLiteral,
}

/// Uniform-quantizer configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizerConfig {
    /// Bit resolution `b` (uniform across antennas).
    pub bits: u32,
    /// Quantization step.
    pub step: f64,
    pub formula_mode: FormulaMode,
}

const MAX_BITS: u32 = 24;

impl QuantizerConfig {
    pub fn new(bits: u32, step: f64, formula_mode: FormulaMode) -> Result<Self> {
        if bits == 0 || bits > MAX_BITS {
            return Err(Error::Config(format!(
                "quantizer bits must be in [1, {MAX_BITS}], got {bits}"
            )));
        }
        if !(step > 0.0) {
            return Err(Error::Config(format!(
                "quantizer step must be positive, got {step}"
            )));
        }
        Ok(QuantizerConfig {
            bits,
            step,
            formula_mode,
        })
    }

    /// Per-antenna resolutions must be uniform; the column-covariance model
    /// has no room for antenna-dependent distortion factors.
    pub fn from_per_antenna(bits: &[u32], step: f64, formula_mode: FormulaMode) -> Result<Self> {
        let Some(&first) = bits.first() else {
            return Err(Error::Config("empty per-antenna bit list".into()));
        };
        if bits.iter().any(|&b| b != first) {
            return Err(Error::Config(
                "non-uniform per-antenna ADC resolutions are not supported; \
                 all antennas must share one bit depth"
                    .into(),
            ));
        }
        Self::new(first, step, formula_mode)
    }

    /// Distortion factor `ρ = 2^{−2b}`.
    pub fn rho(&self) -> f64 {
        2f64.powi(-2 * self.bits as i32)
    }
}

/// Quantize one real value.
pub fn quantize_real(x: f64, cfg: &QuantizerConfig) -> f64 {
    let half_levels = (1u64 << (cfg.bits - 1)) as f64; // 2^{b−1}
    let top = (1u64 << cfg.bits) as f64 - 1.0; // index of the last threshold
    let z = (x / cfg.step + half_levels).ceil();
    if z > top {
        // Upper clip bin.
        (top - half_levels) * cfg.step + cfg.step / 2.0
    } else {
        let z = z.max(1.0);
        (z - half_levels) * cfg.step - cfg.step / 2.0
    }
}

/// Quantize real and imaginary parts of every entry separately.
pub fn quantize_complex_matrix(y: &ReceivedSignal, cfg: &QuantizerConfig) -> ReceivedSignal {
    let m = y
        .as_matrix()
        .map(|z| Complex64::new(quantize_real(z.re, cfg), quantize_real(z.im, cfg)));
    ReceivedSignal::from_matrix(m)
}

/// Linearized covariance of the quantizer output for a given input
/// covariance.
pub fn bussgang_covariance(
    sigma: &DMatrix<Complex64>,
    cfg: &QuantizerConfig,
) -> DMatrix<Complex64> {
    let rho = cfg.rho();
    let signal_scale = match cfg.formula_mode {
        FormulaMode::StandardBussgang => (1.0 - rho) * (1.0 - rho),
        FormulaMode::PaperLiteral => rho * rho,
    };
    let diag_scale = rho * (1.0 - rho);
    let mut out = sigma * Complex64::new(signal_scale, 0.0);
    for i in 0..sigma.nrows() {
        out[(i, i)] += Complex64::new(diag_scale * sigma[(i, i)].re, 0.0);
    }
    hermitianize(&mut out);
    out
}

/// Solver-facing surrogate: sequence scale and scalar noise floor.
///
/// The model `Σ'(γ) = scale²·QΓQ^H + σ_eff²·I` is minimized by the ordinary
/// rank-one machinery after rescaling the sequence columns by `scale`. The
/// diagonal distortion term is folded into `σ_eff²` using the mean diagonal
/// of the quantized sample covariance (diagonal entries concentrate for
/// i.i.d. sequences).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizedSurrogate {
    /// Multiplier applied to every sequence column.
    pub seq_scale: f64,
    /// Effective noise floor `σ_eff²`.
    pub noise_floor: f64,
}

pub fn quantized_surrogate(
    noise_var: f64,
    sigma_hat_q: &SampleCovariance,
    cfg: &QuantizerConfig,
) -> QuantizedSurrogate {
    let rho = cfg.rho();
    let seq_scale = match cfg.formula_mode {
        FormulaMode::StandardBussgang => 1.0 - rho,
        FormulaMode::PaperLiteral => rho,
    };
    let noise_floor =
        seq_scale * seq_scale * noise_var + rho * (1.0 - rho) * sigma_hat_q.mean_diag();
    QuantizedSurrogate {
        seq_scale,
        noise_floor,
    }
}

/// Dense surrogate covariance `Σ'(γ)` for validation paths.
pub fn surrogate_covariance(
    q: &SequenceMatrix,
    gamma: &[f64],
    noise_var: f64,
    sigma_hat_q: &SampleCovariance,
    cfg: &QuantizerConfig,
) -> DMatrix<Complex64> {
    let s = quantized_surrogate(noise_var, sigma_hat_q, cfg);
    let scaled = q.scaled(s.seq_scale);
    let l = q.seq_len();
    let mut sigma = DMatrix::identity(l, l) * Complex64::new(s.noise_floor, 0.0);
    for (k, &g) in gamma.iter().enumerate() {
        if g != 0.0 {
            let col = scaled.column(k);
            sigma.gerc(Complex64::new(g, 0.0), &col, &col, Complex64::new(1.0, 0.0));
        }
    }
    hermitianize(&mut sigma);
    sigma
}
