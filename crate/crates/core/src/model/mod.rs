//! Domain types, protocol and pipeline configuration, and the on-disk
//! session store.

mod dataset;
mod recording;
pub mod store;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dataset::{validate_dataset, Dataset, Utterance, Violation, ViolationKind};
pub use recording::Recording;
pub use store::StoreError;

pub const N_WORDS: usize = 8;

/// Number of time-domain statistics per window.
pub const TIME_FEATURES: usize = 9;
/// Number of wavelet statistics per window.
pub const WAVELET_FEATURES: usize = 2;
/// Frequency features that do not depend on the band layout.
pub const SPECTRAL_SCALAR_FEATURES: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

pub(crate) fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

/// One of the eight prompted words. Codes 0..8 follow declaration order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Word {
    Up = 0,
    Down = 1,
    Left = 2,
    Right = 3,
    Forward = 4,
    Backward = 5,
    Go = 6,
    Stop = 7,
}

impl Word {
    pub const ALL: [Word; N_WORDS] = [
        Word::Up,
        Word::Down,
        Word::Left,
        Word::Right,
        Word::Forward,
        Word::Backward,
        Word::Go,
        Word::Stop,
    ];

    #[inline]
    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Word> {
        Word::ALL.get(code).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Word::Up => "UP",
            Word::Down => "DOWN",
            Word::Left => "LEFT",
            Word::Right => "RIGHT",
            Word::Forward => "FORWARD",
            Word::Backward => "BACKWARD",
            Word::Go => "GO",
            Word::Stop => "STOP",
        }
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Word {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Word::ALL
            .iter()
            .copied()
            .find(|w| w.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| invalid(format!("unknown word {s:?}")))
    }
}

/// Articulation condition of a recording campaign.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "UPPERCASE")]
pub enum Condition {
    #[default]
    Vocalized,
    Silent,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::Vocalized => "VOCALIZED",
            Condition::Silent => "SILENT",
        })
    }
}

/// Front-end acquisition parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcquisitionConfig {
    /// Samples per second.
    pub sample_rate: f64,
    /// Programmable amplifier gain.
    pub gain: f64,
    /// ADC reference voltage in volts.
    pub vref: f64,
    pub n_channels_recorded: usize,
    /// Indices into the recorded channels, in output order.
    pub active_channels: Vec<usize>,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            sample_rate: 500.0,
            gain: 12.0,
            vref: 2.4,
            n_channels_recorded: 16,
            active_channels: (0..14).collect(),
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(invalid(format!("sample_rate must be > 0, got {}", self.sample_rate)));
        }
        if !(self.gain > 0.0 && self.gain.is_finite()) {
            return Err(invalid(format!("gain must be > 0, got {}", self.gain)));
        }
        if !(self.vref > 0.0 && self.vref.is_finite()) {
            return Err(invalid(format!("vref must be > 0, got {}", self.vref)));
        }
        if self.n_channels_recorded == 0 || self.n_channels_recorded > u16::MAX as usize {
            return Err(invalid("n_channels_recorded out of range"));
        }
        if self.active_channels.is_empty() {
            return Err(invalid("no active channels"));
        }
        let mut seen = vec![false; self.n_channels_recorded];
        for &c in &self.active_channels {
            if c >= self.n_channels_recorded {
                return Err(invalid(format!(
                    "active channel {c} >= n_channels_recorded {}",
                    self.n_channels_recorded
                )));
            }
            if std::mem::replace(&mut seen[c], true) {
                return Err(invalid(format!("active channel {c} listed twice")));
            }
        }
        Ok(())
    }

    pub fn n_active(&self) -> usize {
        self.active_channels.len()
    }

    /// Input-referred full scale in microvolts (vref / gain).
    pub fn full_scale_uv(&self) -> f64 {
        self.vref / self.gain * 1e6
    }
}

/// Shape of the prompting protocol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolConfig {
    pub n_words: usize,
    pub articulation_s: f64,
    pub rest_s: f64,
    pub reps_per_batch: usize,
    pub batches_per_session: usize,
    pub n_sessions: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            n_words: N_WORDS,
            articulation_s: 4.0,
            rest_s: 1.0,
            reps_per_batch: 20,
            batches_per_session: 7,
            n_sessions: 3,
        }
    }
}

impl ProtocolConfig {
    /// Same protocol with `reps_per_batch` repetitions instead of 20.
    pub fn with_reps(reps_per_batch: usize) -> Self {
        Self {
            reps_per_batch,
            ..Self::default()
        }
    }

    /// One quarter of the default repetitions (5 per batch, 840 utterances).
    pub fn quarter_scale() -> Self {
        Self::with_reps(5)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_words != N_WORDS {
            return Err(invalid(format!("n_words must be {N_WORDS}, got {}", self.n_words)));
        }
        if !(self.articulation_s > 0.0 && self.articulation_s.is_finite()) {
            return Err(invalid("articulation_s must be > 0"));
        }
        if !(self.rest_s >= 0.0 && self.rest_s.is_finite()) {
            return Err(invalid("rest_s must be >= 0"));
        }
        if self.reps_per_batch == 0 || self.batches_per_session == 0 || self.n_sessions == 0 {
            return Err(invalid("protocol counts must be >= 1"));
        }
        Ok(())
    }

    pub fn utterances_per_batch(&self) -> usize {
        self.n_words * self.reps_per_batch
    }

    pub fn utterances_per_session(&self) -> usize {
        self.utterances_per_batch() * self.batches_per_session
    }

    pub fn total_utterances(&self) -> usize {
        self.utterances_per_session() * self.n_sessions
    }

    pub fn articulation_samples(&self, sample_rate: f64) -> usize {
        (self.articulation_s * sample_rate).round() as usize
    }

    /// Distance between consecutive prompt onsets (articulation + rest).
    pub fn prompt_stride_samples(&self, sample_rate: f64) -> usize {
        ((self.articulation_s + self.rest_s) * sample_rate).round() as usize
    }
}

/// Preprocessing and feature extraction parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub hp_order: usize,
    pub hp_cutoff_hz: f64,
    pub notch_hz: f64,
    pub notch_q: f64,
    pub analysis_s: f64,
    pub window_s: f64,
    pub n_windows: usize,
    pub wavelet: String,
    pub dwt_level: usize,
    pub band_edges_hz: Vec<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            hp_order: 4,
            hp_cutoff_hz: 20.0,
            notch_hz: 50.0,
            notch_q: 30.0,
            analysis_s: 1.4,
            window_s: 0.2,
            n_windows: 7,
            wavelet: "db4".to_string(),
            dwt_level: 3,
            band_edges_hz: vec![20.0, 60.0, 120.0, 200.0, 250.0],
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self, sample_rate: f64) -> Result<(), ConfigError> {
        if self.hp_order == 0 {
            return Err(invalid("hp_order must be >= 1"));
        }
        if self.wavelet != "db4" {
            return Err(invalid(format!("unsupported wavelet {:?}", self.wavelet)));
        }
        if self.dwt_level == 0 {
            return Err(invalid("dwt_level must be >= 1"));
        }
        if self.n_windows == 0 || self.window_s.is_nan() || self.window_s <= 0.0 {
            return Err(invalid("window layout must be non-empty"));
        }
        let span = self.n_windows as f64 * self.window_s;
        if (span - self.analysis_s).abs() > 1e-9 {
            return Err(invalid(format!(
                "n_windows x window_s = {span} differs from analysis_s = {}",
                self.analysis_s
            )));
        }
        if self.window_samples(sample_rate) * self.n_windows != self.analysis_samples(sample_rate) {
            return Err(invalid("windows do not tile the analysis span in whole samples"));
        }
        if self.band_edges_hz.len() < 2 {
            return Err(invalid("need at least two band edges"));
        }
        if self.band_edges_hz.windows(2).any(|w| w[0].is_nan() || w[1].is_nan() || w[0] >= w[1]) {
            return Err(invalid("band edges must be strictly increasing"));
        }
        let nyquist = sample_rate / 2.0;
        if *self.band_edges_hz.last().unwrap() > nyquist + 1e-12 {
            return Err(invalid(format!("band edge above Nyquist {nyquist}")));
        }
        Ok(())
    }

    pub fn analysis_samples(&self, sample_rate: f64) -> usize {
        (self.analysis_s * sample_rate).round() as usize
    }

    pub fn window_samples(&self, sample_rate: f64) -> usize {
        (self.window_s * sample_rate).round() as usize
    }

    pub fn n_bands(&self) -> usize {
        self.band_edges_hz.len() - 1
    }

    /// Values emitted per (channel, window): 21 with the default bands.
    pub fn features_per_window(&self) -> usize {
        TIME_FEATURES + WAVELET_FEATURES + SPECTRAL_SCALAR_FEATURES + self.n_bands()
    }

    pub fn feature_dim(&self, n_channels: usize) -> usize {
        n_channels * self.n_windows * self.features_per_window()
    }

    /// Per-window feature names in emission order.
    pub fn window_feature_names(&self) -> Vec<String> {
        let mut names: Vec<String> = [
            "rms", "max", "min", "std", "var", "mean", "p25", "p75", "zcr", "d3_mean", "d3_std",
            "mean_freq_hz", "peak_freq_hz", "total_power", "mean_power", "sm2", "sm3",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        names.extend((1..=self.n_bands()).map(|i| format!("band_ratio_{i}")));
        names
    }

    /// Column names of a full feature vector (channel-major, then window).
    pub fn feature_names(&self, n_channels: usize) -> Vec<String> {
        let per_window = self.window_feature_names();
        let mut out = Vec::with_capacity(self.feature_dim(n_channels));
        for c in 0..n_channels {
            for w in 0..self.n_windows {
                for name in &per_window {
                    out.push(format!("ch{c:02}_w{w}_{name}"));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_codes_are_a_bijection() {
        for (i, w) in Word::ALL.iter().enumerate() {
            assert_eq!(w.code(), i);
            assert_eq!(Word::from_code(i), Some(*w));
            assert_eq!(w.name().parse::<Word>().unwrap(), *w);
        }
        assert_eq!(Word::from_code(8), None);
        assert!("jump".parse::<Word>().is_err());
    }

    #[test]
    fn default_protocol_counts() {
        let p = ProtocolConfig::default();
        assert_eq!(p.utterances_per_batch(), 160);
        assert_eq!(p.utterances_per_session(), 1120);
        assert_eq!(p.total_utterances(), 3360);
        assert_eq!(p.articulation_samples(500.0), 2000);
        assert_eq!(p.prompt_stride_samples(500.0), 2500);
    }

    #[test]
    fn default_feature_layout() {
        let p = PipelineConfig::default();
        p.validate(500.0).unwrap();
        assert_eq!(p.features_per_window(), 21);
        assert_eq!(p.feature_dim(14), 2058);
        assert_eq!(p.analysis_samples(500.0), 700);
        assert_eq!(p.window_samples(500.0), 100);
        assert_eq!(p.feature_names(14).len(), 2058);
        assert_eq!(p.feature_names(14)[20], "ch00_w0_band_ratio_4");
    }

    #[test]
    fn acquisition_validation() {
        let a = AcquisitionConfig::default();
        a.validate().unwrap();
        assert_eq!(a.n_active(), 14);
        assert!((a.full_scale_uv() - 200_000.0).abs() < 1e-9);

        let dup = AcquisitionConfig {
            active_channels: vec![0, 1, 1],
            ..a.clone()
        };
        assert!(dup.validate().is_err());
        let oob = AcquisitionConfig {
            active_channels: vec![16],
            ..a.clone()
        };
        assert!(oob.validate().is_err());
        let bad_gain = AcquisitionConfig { gain: 0.0, ..a };
        assert!(bad_gain.validate().is_err());
    }

    #[test]
    fn pipeline_validation_rejects_bad_layouts() {
        let p = PipelineConfig {
            n_windows: 6,
            ..PipelineConfig::default()
        };
        assert!(p.validate(500.0).is_err());
        let p = PipelineConfig {
            band_edges_hz: vec![20.0, 10.0],
            ..PipelineConfig::default()
        };
        assert!(p.validate(500.0).is_err());
        let p = PipelineConfig {
            band_edges_hz: vec![20.0, 300.0],
            ..PipelineConfig::default()
        };
        assert!(p.validate(500.0).is_err());
        let p = PipelineConfig {
            wavelet: "haar".into(),
            ..PipelineConfig::default()
        };
        assert!(p.validate(500.0).is_err());
    }
}
