use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{invalid, ConfigError};
use crate::Scalar;

/// Channels x samples matrix of microvolt values at a fixed rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recording<T> {
    samples: Vec<Vec<T>>,
    sample_rate: f64,
}

impl<T: Scalar> Recording<T> {
    /// Rows must share a length and hold finite values.
    pub fn new(samples: Vec<Vec<T>>, sample_rate: f64) -> Result<Self, ConfigError> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(invalid(format!("sample_rate must be > 0, got {sample_rate}")));
        }
        if let Some(first) = samples.first() {
            let len = first.len();
            for (c, row) in samples.iter().enumerate() {
                if row.len() != len {
                    return Err(invalid(format!(
                        "channel {c} has {} samples, channel 0 has {len}",
                        row.len()
                    )));
                }
                if let Some(i) = row.iter().position(|v| !v.is_finite()) {
                    return Err(invalid(format!("non-finite sample at channel {c}, index {i}")));
                }
            }
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn zeros(n_channels: usize, len: usize, sample_rate: f64) -> Self {
        Self {
            samples: vec![vec![T::zero(); len]; n_channels],
            sample_rate,
        }
    }

    pub fn empty(n_channels: usize, sample_rate: f64) -> Self {
        Self::zeros(n_channels, 0, sample_rate)
    }

    pub fn n_channels(&self) -> usize {
        self.samples.len()
    }

    pub fn len(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn channel(&self, c: usize) -> &[T] {
        &self.samples[c]
    }

    pub fn channels(&self) -> impl Iterator<Item = &[T]> {
        self.samples.iter().map(Vec::as_slice)
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.samples
    }

    pub fn into_rows(self) -> Vec<Vec<T>> {
        self.samples
    }

    /// Element-wise conversion between scalar types.
    pub fn cast<U: Scalar>(&self) -> Recording<U> {
        Recording {
            samples: self
                .samples
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|&v| U::from(v).expect("finite value fits target scalar"))
                        .collect()
                })
                .collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Samples in `range` of the listed channels, in the listed order.
    pub fn extract(&self, channels: &[usize], range: Range<usize>) -> Recording<T> {
        Recording {
            samples: channels
                .iter()
                .map(|&c| self.samples[c][range.clone()].to_vec())
                .collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// All channels, samples in `range`.
    pub fn slice(&self, range: Range<usize>) -> Recording<T> {
        Recording {
            samples: self
                .samples
                .iter()
                .map(|row| row[range.clone()].to_vec())
                .collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Applies `f` to every channel, which must preserve the length.
    pub fn try_map_channels<E>(
        &self,
        mut f: impl FnMut(&[T]) -> Result<Vec<T>, E>,
    ) -> Result<Recording<T>, E> {
        let samples = self
            .samples
            .iter()
            .map(|row| f(row))
            .collect::<Result<Vec<_>, E>>()?;
        debug_assert!(samples.iter().all(|r| r.len() == self.len()));
        Ok(Recording {
            samples,
            sample_rate: self.sample_rate,
        })
    }

    pub(crate) fn rows_mut(&mut self) -> &mut [Vec<T>] {
        &mut self.samples
    }
}
