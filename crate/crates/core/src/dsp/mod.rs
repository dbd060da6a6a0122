//! Preprocessing: zero-phase high-pass and notch filtering, analysis-window
//! extraction and splitting, and the db4 discrete wavelet transform.

mod dwt;
mod filter;
mod window;

use thiserror::Error;

pub use dwt::{dwt_coeff_len, dwt_db4, dwt_step, BoundaryMode, DwtResult, DB4_DEC_HI, DB4_DEC_LO};
pub use filter::{
    design_highpass, design_notch, preprocess, Biquad, BiquadCascade, FilterDesign, Preprocessor,
};
pub use window::{analysis_window, split_windows};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DspError {
    #[error("cutoff {cutoff_hz} Hz must lie strictly inside (0, {sample_rate}/2)")]
    InvalidCutoff { cutoff_hz: f64, sample_rate: f64 },
    #[error("notch center {center_hz} Hz must lie strictly inside (0, {sample_rate}/2)")]
    InvalidCenter { center_hz: f64, sample_rate: f64 },
    #[error("notch Q must be > 0, got {0}")]
    InvalidQ(f64),
    #[error("filter order must be >= 1, got {0}")]
    InvalidOrder(usize),
    #[error("section {section} is unstable (pole radius {radius})")]
    Unstable { section: usize, radius: f64 },
    #[error("signal too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("length mismatch: expected {expected} samples, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}
