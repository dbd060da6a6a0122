//! Per-window feature extraction and per-utterance feature vectors.
//!
//! Each (channel, window) contributes, in order:
//!
//! | group    | values                                                   |
//! |----------|----------------------------------------------------------|
//! | time     | rms, max, min, std, var, mean, p25, p75, zcr             |
//! | wavelet  | mean and std of the deepest db4 detail coefficients      |
//! | spectral | mean freq, peak freq, total power, mean power, sm2, sm3, |
//! |          | one power ratio per frequency band                       |
//!
//! Vectors are laid out channel-major, then window, then feature.

mod spectral;
mod time;

use serde::{Deserialize, Serialize};

pub use spectral::{freq_features, periodogram, Periodogram, Psd};
pub use time::{idx as time_idx, time_features, zero_crossing_rate};

use crate::dsp::{analysis_window, dwt_db4, split_windows, DspError, Preprocessor};
use crate::model::{PipelineConfig, Recording, Utterance};
use crate::{Result, Scalar};

/// Mean and population std of the level-`level` detail coefficients.
pub fn wavelet_features<T: Scalar>(x: &[T], level: usize) -> Result<[T; 2], DspError> {
    let dwt = dwt_db4(x, level)?;
    let d = dwt.detail(level);
    let n = T::from_count(d.len());
    let mean = d.iter().copied().sum::<T>() / n;
    let var = d.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
    Ok([mean, var.sqrt()])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowFeatures<T> {
    pub time: [T; 9],
    pub wavelet: [T; 2],
    /// Six spectral scalars followed by the band ratios.
    pub freq: Vec<T>,
}

impl<T: Scalar> WindowFeatures<T> {
    pub fn len(&self) -> usize {
        self.time.len() + self.wavelet.len() + self.freq.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn iter(&self) -> impl Iterator<Item = T> + '_ {
        self.time
            .iter()
            .chain(&self.wavelet)
            .chain(&self.freq)
            .copied()
    }
}

/// Fixed-length concatenation of window features for one utterance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector<T> {
    values: Vec<T>,
}

impl<T: Scalar> FeatureVector<T> {
    pub fn new(values: Vec<T>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// The `n_windows x features_per_window` block of one channel.
    pub fn channel_block(&self, channel: usize, cfg: &PipelineConfig) -> &[T] {
        let block = cfg.n_windows * cfg.features_per_window();
        &self.values[channel * block..(channel + 1) * block]
    }
}

/// Window-level feature extractor with cached FFT plan.
#[derive(Clone)]
pub struct WindowFeaturizer<T: Scalar> {
    psd: Periodogram<T>,
    dwt_level: usize,
    band_edges_hz: Vec<f64>,
}

impl<T: Scalar> WindowFeaturizer<T> {
    pub fn new(cfg: &PipelineConfig, sample_rate: f64) -> Self {
        Self {
            psd: Periodogram::new(cfg.window_samples(sample_rate), sample_rate),
            dwt_level: cfg.dwt_level,
            band_edges_hz: cfg.band_edges_hz.clone(),
        }
    }

    pub fn window(&self, x: &[T]) -> Result<WindowFeatures<T>, DspError> {
        Ok(WindowFeatures {
            time: time_features(x)?,
            wavelet: wavelet_features(x, self.dwt_level)?,
            freq: freq_features(&self.psd.compute(x)?, &self.band_edges_hz),
        })
    }

    /// Features of an already-preprocessed recording.
    pub fn recording(&self, r: &Recording<T>, cfg: &PipelineConfig) -> Result<FeatureVector<T>, DspError> {
        let windows = split_windows(&analysis_window(r, cfg)?, cfg)?;
        let mut values = Vec::with_capacity(cfg.feature_dim(r.n_channels()));
        for c in 0..r.n_channels() {
            for w in &windows {
                values.extend(self.window(w.channel(c))?.iter());
            }
        }
        Ok(FeatureVector::new(values))
    }
}

/// Features of a preprocessed recording. Output length is
/// `channels x n_windows x features_per_window`.
pub fn featurize_utterance<T: Scalar>(
    r: &Recording<T>,
    cfg: &PipelineConfig,
) -> Result<FeatureVector<T>, DspError> {
    WindowFeaturizer::new(cfg, r.sample_rate()).recording(r, cfg)
}

/// Raw utterance to feature vector: cast, preprocess, window, extract.
#[derive(Clone)]
pub struct Featurizer<T: Scalar> {
    cfg: PipelineConfig,
    pre: Preprocessor<T>,
    windows: WindowFeaturizer<T>,
}

impl<T: Scalar> Featurizer<T> {
    pub fn new(cfg: &PipelineConfig, sample_rate: f64) -> Result<Self> {
        cfg.validate(sample_rate)?;
        Ok(Self {
            cfg: cfg.clone(),
            pre: Preprocessor::new(cfg, sample_rate)?,
            windows: WindowFeaturizer::new(cfg, sample_rate),
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn featurize(&self, u: &Utterance) -> Result<FeatureVector<T>> {
        let filtered = self.pre.apply(&u.recording.cast::<T>())?;
        Ok(self.windows.recording(&filtered, &self.cfg)?)
    }
}
