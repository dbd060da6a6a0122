use super::DspError;
use crate::model::{PipelineConfig, Recording};
use crate::Scalar;

/// The leading `analysis_s` seconds of every channel.
pub fn analysis_window<T: Scalar>(
    r: &Recording<T>,
    cfg: &PipelineConfig,
) -> Result<Recording<T>, DspError> {
    let n = cfg.analysis_samples(r.sample_rate());
    if r.len() < n {
        return Err(DspError::TooShort {
            needed: n,
            got: r.len(),
        });
    }
    Ok(r.slice(0..n))
}

/// Splits an analysis window into `n_windows` contiguous, non-overlapping
/// windows. Window k covers samples `[k*len, (k+1)*len)`.
pub fn split_windows<T: Scalar>(
    r: &Recording<T>,
    cfg: &PipelineConfig,
) -> Result<Vec<Recording<T>>, DspError> {
    let len = cfg.window_samples(r.sample_rate());
    let expected = len * cfg.n_windows;
    if r.len() != expected {
        return Err(DspError::LengthMismatch {
            expected,
            got: r.len(),
        });
    }
    Ok((0..cfg.n_windows)
        .map(|k| r.slice(k * len..(k + 1) * len))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(len: usize) -> Recording<f64> {
        let rows = (0..2)
            .map(|c| (0..len).map(|i| (i * 2 + c) as f64 * 0.37).collect())
            .collect();
        Recording::new(rows, 500.0).unwrap()
    }

    #[test]
    fn analysis_window_keeps_leading_span() {
        let cfg = PipelineConfig::default();
        let r = ramp(2000);
        let w = analysis_window(&r, &cfg).unwrap();
        assert_eq!(w.len(), 700);
        assert_eq!(w.channel(1), &r.channel(1)[..700]);

        let exact = ramp(700);
        assert_eq!(analysis_window(&exact, &cfg).unwrap(), exact);
        assert_eq!(
            analysis_window(&ramp(699), &cfg),
            Err(DspError::TooShort { needed: 700, got: 699 })
        );
    }

    #[test]
    fn split_partitions_exactly() {
        let cfg = PipelineConfig::default();
        let r = ramp(700);
        let windows = split_windows(&r, &cfg).unwrap();
        assert_eq!(windows.len(), 7);
        assert!(windows.iter().all(|w| w.len() == 100));
        for c in 0..2 {
            let joined: Vec<f64> = windows.iter().flat_map(|w| w.channel(c).to_vec()).collect();
            assert_eq!(
                joined.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                r.channel(c).iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
        }
        assert_eq!(windows[3].channel(0)[0], r.channel(0)[300]);
        assert_eq!(
            split_windows(&ramp(701), &cfg),
            Err(DspError::LengthMismatch { expected: 700, got: 701 })
        );
    }
}
