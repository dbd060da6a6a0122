use crate::dsp::DspError;
use crate::Scalar;

/// Index of each time-domain statistic in the output of [`time_features`].
pub mod idx {
    pub const RMS: usize = 0;
    pub const MAX: usize = 1;
    pub const MIN: usize = 2;
    pub const STD: usize = 3;
    pub const VAR: usize = 4;
    pub const MEAN: usize = 5;
    pub const P25: usize = 6;
    pub const P75: usize = 7;
    pub const ZCR: usize = 8;
}

/// `[rms, max, min, std, var, mean, p25, p75, zcr]`.
///
/// Variance is the population variance. Percentiles interpolate linearly
/// between order statistics at position `p * (N - 1)`.
pub fn time_features<T: Scalar>(x: &[T]) -> Result<[T; 9], DspError> {
    let n = x.len();
    if n < 2 {
        return Err(DspError::TooShort { needed: 2, got: n });
    }
    let nf = T::from_count(n);
    let mean = x.iter().copied().sum::<T>() / nf;
    let mean_sq = x.iter().map(|&v| v * v).sum::<T>() / nf;
    let var = x.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / nf;

    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));

    Ok([
        mean_sq.sqrt(),
        sorted[n - 1],
        sorted[0],
        var.sqrt(),
        var,
        mean,
        percentile_sorted(&sorted, 0.25),
        percentile_sorted(&sorted, 0.75),
        zero_crossing_rate(x),
    ])
}

pub(crate) fn percentile_sorted<T: Scalar>(sorted: &[T], p: f64) -> T {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = T::lit(pos - lo as f64);
    match sorted.get(lo + 1) {
        Some(&hi) if frac > T::zero() => sorted[lo] + (hi - sorted[lo]) * frac,
        _ => sorted[lo],
    }
}

/// Sign changes between consecutive samples over `N - 1`. Zero samples
/// carry the sign of the last non-zero sample.
pub fn zero_crossing_rate<T: Scalar>(x: &[T]) -> T {
    if x.len() < 2 {
        return T::zero();
    }
    let mut prev: Option<bool> = None;
    let mut crossings = 0usize;
    for &v in x {
        if v == T::zero() {
            continue;
        }
        let positive = v > T::zero();
        if prev.is_some_and(|p| p != positive) {
            crossings += 1;
        }
        prev = Some(positive);
    }
    T::from_count(crossings) / T::from_count(x.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_window() {
        let f = time_features(&[3.0f64; 100]).unwrap();
        assert_eq!(f, [3.0, 3.0, 3.0, 0.0, 0.0, 3.0, 3.0, 3.0, 0.0]);
    }

    #[test]
    fn alternating_window() {
        let x: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let f = time_features(&x).unwrap();
        assert_eq!(f[idx::ZCR], 1.0);
        assert_eq!(f[idx::MEAN], 0.0);
        assert_eq!(f[idx::RMS], 1.0);
    }

    #[test]
    fn powerline_sine_window() {
        let x: Vec<f64> = (0..100).map(|i| (2.0 * PI * 50.0 * i as f64 / 500.0).sin()).collect();
        let f = time_features(&x).unwrap();
        assert!((f[idx::RMS] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-3);
        // First sample is exactly zero and carries no sign, so 10 cycles
        // give 19 sign changes.
        assert_eq!(f[idx::ZCR], 19.0 / 99.0);
    }

    #[test]
    fn zeros_inherit_previous_sign() {
        assert_eq!(zero_crossing_rate(&[1.0f64, 0.0, 0.0, 1.0]), 0.0);
        assert_eq!(zero_crossing_rate(&[1.0f64, 0.0, -1.0, 0.0, 1.0]), 0.5);
        assert_eq!(zero_crossing_rate(&[0.0f64, 0.0, -1.0]), 0.0);
    }

    #[test]
    fn percentiles_interpolate() {
        let s = [1.0f64, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile_sorted(&s, 0.25), 2.0);
        let s = [1.0f64, 2.0, 3.0, 4.0];
        assert_eq!(percentile_sorted(&s, 0.25), 1.75);
        assert_eq!(percentile_sorted(&s, 0.75), 3.25);
    }

    #[test]
    fn too_short() {
        assert!(time_features(&[1.0f64]).is_err());
    }
}
