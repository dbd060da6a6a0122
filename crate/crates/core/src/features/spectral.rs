use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::dsp::DspError;
use crate::Scalar;

/// One-sided power spectral density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Psd<T> {
    /// Bin centres, 0 to Nyquist.
    pub freqs_hz: Vec<T>,
    pub power: Vec<T>,
    /// Bin spacing in Hz.
    pub df: T,
}

impl<T: Scalar> Psd<T> {
    /// Integrated power, `sum(P) * df`.
    pub fn total_power(&self) -> T {
        self.power.iter().copied().sum::<T>() * self.df
    }
}

/// Rectangular-window periodogram with a reusable FFT plan.
#[derive(Clone)]
pub struct Periodogram<T: Scalar> {
    fft: Arc<dyn Fft<T>>,
    len: usize,
    sample_rate: f64,
}

impl<T: Scalar> Periodogram<T> {
    pub fn new(len: usize, sample_rate: f64) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(len.max(1));
        Self {
            fft,
            len,
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `P[k] = c_k |X[k]|^2 / (N fs)`, `c_k = 1` at DC and Nyquist, else 2.
    pub fn compute(&self, x: &[T]) -> Result<Psd<T>, DspError> {
        if x.len() != self.len || self.len < 2 {
            return Err(DspError::LengthMismatch {
                expected: self.len.max(2),
                got: x.len(),
            });
        }
        let n = self.len;
        let mut buf: Vec<Complex<T>> = x.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.fft.process(&mut buf);

        let fs = T::lit(self.sample_rate);
        let denom = T::from_count(n) * fs;
        let n_bins = n / 2 + 1;
        let two = T::lit(2.0);
        let power = (0..n_bins)
            .map(|k| {
                let edge = k == 0 || (n.is_multiple_of(2) && k == n / 2);
                let c = if edge { T::one() } else { two };
                c * buf[k].norm_sqr() / denom
            })
            .collect();
        let df = fs / T::from_count(n);
        Ok(Psd {
            freqs_hz: (0..n_bins).map(|k| T::from_count(k) * df).collect(),
            power,
            df,
        })
    }
}

/// One-shot periodogram of `x`.
pub fn periodogram<T: Scalar>(x: &[T], sample_rate: f64) -> Result<Psd<T>, DspError> {
    Periodogram::new(x.len(), sample_rate).compute(x)
}

/// `[mean_freq, peak_freq, total_power, mean_power, sm2, sm3, band ratios...]`.
///
/// Moments are normalized raw spectral moments `sum(f^n P) / sum(P)`. Band
/// `i` integrates bins in `[edge_i, edge_{i+1})`; the last band also keeps
/// its upper edge. A spectrum with zero total power maps to all zeros.
pub fn freq_features<T: Scalar>(p: &Psd<T>, band_edges_hz: &[f64]) -> Vec<T> {
    let n_bands = band_edges_hz.len().saturating_sub(1);
    let mut out = vec![T::zero(); 6 + n_bands];
    let sum: T = p.power.iter().copied().sum();

    let total = sum * p.df;
    out[2] = total;
    out[3] = total / T::from_count(p.power.len().max(1));

    // argmax, lowest frequency wins ties
    let mut peak = 0;
    for (k, &v) in p.power.iter().enumerate() {
        if v > p.power[peak] {
            peak = k;
        }
    }
    out[1] = p.freqs_hz.get(peak).copied().unwrap_or_else(T::zero);

    if sum <= T::zero() {
        out[1] = T::zero();
        return out;
    }

    let moment = |order: i32| {
        p.freqs_hz
            .iter()
            .zip(&p.power)
            .map(|(&f, &v)| f.powi(order) * v)
            .sum::<T>()
            / sum
    };
    out[0] = moment(1);
    out[4] = moment(2);
    out[5] = moment(3);

    for b in 0..n_bands {
        let lo = T::lit(band_edges_hz[b]);
        let hi = T::lit(band_edges_hz[b + 1]);
        let last = b + 1 == n_bands;
        let band: T = p
            .freqs_hz
            .iter()
            .zip(&p.power)
            .filter(|(&f, _)| f >= lo && (f < hi || (last && f == hi)))
            .map(|(_, &v)| v)
            .sum();
        out[6 + b] = band * p.df / total;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const EDGES: [f64; 5] = [20.0, 60.0, 120.0, 200.0, 250.0];

    fn tone(freq: f64, amp: f64) -> Vec<f64> {
        (0..100)
            .map(|i| amp * (2.0 * PI * freq * i as f64 / 500.0).sin())
            .collect()
    }

    #[test]
    fn bins_cover_zero_to_nyquist() {
        let p = periodogram(&[0.0f64; 100], 500.0).unwrap();
        assert_eq!(p.freqs_hz.len(), 51);
        assert_eq!(p.freqs_hz[50], 250.0);
        assert_eq!(p.df, 5.0);
        assert!(p.power.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn on_bin_tone() {
        let p = periodogram(&tone(100.0, 1.0), 500.0).unwrap();
        assert!((p.total_power() - 0.5).abs() < 1e-9);
        let off: f64 = p
            .power
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != 20)
            .map(|(_, v)| v)
            .sum();
        assert!(off < 1e-20);

        let f = freq_features(&p, &EDGES);
        assert!((f[0] - 100.0).abs() < 1e-9);
        assert_eq!(f[1], 100.0);
        assert!((f[4] - 1e4).abs() < 1e-6);
        assert!((f[5] - 1e6).abs() < 1e-4);
        let ratios = &f[6..];
        assert!((ratios[1] - 1.0).abs() < 1e-12);
        assert!(ratios[0].abs() < 1e-12 && ratios[2].abs() < 1e-12 && ratios[3].abs() < 1e-12);
    }

    #[test]
    fn zero_power_convention() {
        let p = periodogram(&[0.0f64; 100], 500.0).unwrap();
        assert!(freq_features(&p, &EDGES).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn equal_tones_tie_to_lower_bin() {
        let mut power = vec![0.0f64; 51];
        power[10] = 0.25 / 5.0;
        power[30] = 0.25 / 5.0;
        let p = Psd {
            freqs_hz: (0..51).map(|k| k as f64 * 5.0).collect(),
            power,
            df: 5.0,
        };
        let f = freq_features(&p, &EDGES);
        assert_eq!(f[1], 50.0);
        assert_eq!(f[0], 100.0);
        assert_eq!(&f[6..], &[0.5, 0.0, 0.5, 0.0]);
    }

    #[test]
    fn two_tone_signal() {
        let x: Vec<f64> = tone(50.0, 1.0)
            .iter()
            .zip(tone(150.0, 1.0))
            .map(|(a, b)| a + b)
            .collect();
        let f = freq_features(&periodogram(&x, 500.0).unwrap(), &EDGES);
        assert!((f[0] - 100.0).abs() < 1e-9);
        assert!(f[1] == 50.0 || f[1] == 150.0);
        assert!((f[6] - 0.5).abs() < 1e-9 && (f[8] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn nyquist_belongs_to_last_band() {
        let x: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let f = freq_features(&periodogram(&x, 500.0).unwrap(), &EDGES);
        assert_eq!(f[1], 250.0);
        assert!((f[9] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wrong_length() {
        let plan = Periodogram::<f64>::new(100, 500.0);
        assert!(matches!(
            plan.compute(&[0.0; 99]),
            Err(DspError::LengthMismatch { expected: 100, got: 99 })
        ));
    }
}
