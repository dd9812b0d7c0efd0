//! Functional model of a text-to-image diffusion accelerator.
//!
//! * [`fixedpoint`]: integer formats, quantization, the 12-bit bit slicer,
//!   GELU and group normalization.
//! * [`pssa`]: lossless attention-score compression by pruning, horizontal
//!   patch XOR and patch-local CSR, plus RLE / global-CSR baselines.
//! * [`tips`]: cross-attention CLS scores, important-pixel spotting and the
//!   INT12/INT6 activation plan.
//! * [`dbsc`]: bit-exact bit-slice GEMM, stationary dataflow counters and
//!   CSR-skipping attention.
//! * [`emamodel`]: external-memory byte and energy ledger.
//! * [`synth`]: seeded synthetic score generator.
//!
//! Real-valued code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which is what the command-line tool uses.

pub mod dbsc;
pub mod emamodel;
pub mod error;
pub mod fixedpoint;
pub mod pssa;
mod scalar;
pub mod synth;
pub mod tips;

pub use error::{Error, Result};
pub use scalar::Real;

pub type QTensorF64 = fixedpoint::QTensor<f64>;
pub type QTensorF32 = fixedpoint::QTensor<f32>;
pub type AttentionScoresF64 = tips::AttentionScores<f64>;
pub type AttentionScoresF32 = tips::AttentionScores<f32>;
pub type MixedQTensorF64 = tips::MixedQTensor<f64>;
pub type MixedQTensorF32 = tips::MixedQTensor<f32>;
pub type EnergyCoefficientsF64 = emamodel::EnergyCoefficients<f64>;
