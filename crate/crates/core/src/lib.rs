//! Surface-EMG silent speech decoding.
//!
//! The pipeline runs from 24-bit acquisition frames ([`ingest`]) through
//! zero-phase filtering and the db4 wavelet transform ([`dsp`]), per-window
//! feature extraction ([`features`]), a random forest classifier with the
//! session-specific, global stratified and leave-one-session-out evaluation
//! schemes ([`learn`]), and a synthetic session generator ([`synth`]) for
//! end-to-end testing.
//!
//! The numeric modules are generic over [`Scalar`] (`f32` or `f64`). Stored
//! samples are `f32` microvolts; the analysis path runs in `f64`. The aliases
//! at the crate root name the concrete types used by the pipeline.

pub mod cli;
pub mod dsp;
pub mod error;
pub mod features;
pub mod ingest;
pub mod learn;
pub mod model;
pub mod scalar;
pub mod seed;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Stored sample matrix (f32 microvolts, as written to batch files).
pub type StoredRecording = model::Recording<f32>;
/// Analysis-precision sample matrix.
pub type Recording64 = model::Recording<f64>;
pub type Recording32 = model::Recording<f32>;
pub type BiquadCascade64 = dsp::BiquadCascade<f64>;
pub type BiquadCascade32 = dsp::BiquadCascade<f32>;
pub type DwtResult64 = dsp::DwtResult<f64>;
pub type FeatureVector64 = features::FeatureVector<f64>;
pub type FeatureVector32 = features::FeatureVector<f32>;
pub type Psd64 = features::Psd<f64>;
pub type ForestModel64 = learn::ForestModel<f64>;
pub type ForestModel32 = learn::ForestModel<f32>;
