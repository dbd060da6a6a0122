//! Butterworth high-pass and notch designs as second-order sections, plus
//! causal and zero-phase (forward-backward) filtering.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::DspError;
use crate::model::{PipelineConfig, Recording};
use crate::Scalar;

/// Normalized second-order section (a0 = 1).
///
/// `y[n] = b0 x[n] + b1 x[n-1] + b2 x[n-2] - a1 y[n-1] - a2 y[n-2]`
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Biquad<T> {
    pub b0: T,
    pub b1: T,
    pub b2: T,
    pub a1: T,
    pub a2: T,
}

impl<T: Scalar> Biquad<T> {
    fn from_f64(c: [f64; 5]) -> Self {
        Self {
            b0: T::lit(c[0]),
            b1: T::lit(c[1]),
            b2: T::lit(c[2]),
            a1: T::lit(c[3]),
            a2: T::lit(c[4]),
        }
    }

    fn coeffs_f64(&self) -> [f64; 5] {
        [
            self.b0.as_f64(),
            self.b1.as_f64(),
            self.b2.as_f64(),
            self.a1.as_f64(),
            self.a2.as_f64(),
        ]
    }

    /// Largest pole magnitude.
    pub fn pole_radius(&self) -> f64 {
        let [_, _, _, a1, a2] = self.coeffs_f64();
        // roots of z^2 + a1 z + a2
        let disc = a1 * a1 - 4.0 * a2;
        if disc >= 0.0 {
            let s = disc.sqrt();
            ((-a1 + s) / 2.0).abs().max(((-a1 - s) / 2.0).abs())
        } else {
            a2.abs().sqrt()
        }
    }

    pub fn response(&self, z_inv: Complex64) -> Complex64 {
        let [b0, b1, b2, a1, a2] = self.coeffs_f64();
        let z2 = z_inv * z_inv;
        (b0 + z_inv * b1 + z2 * b2) / (1.0 + z_inv * a1 + z2 * a2)
    }

    /// Transposed direct form II state at steady state for a unit step.
    fn step_state(&self) -> [T; 2] {
        let one = T::one();
        let dc = (self.b0 + self.b1 + self.b2) / (one + self.a1 + self.a2);
        let z2 = self.b2 - self.a2 * dc;
        let z1 = self.b1 - self.a1 * dc + z2;
        [z1, z2]
    }

    fn dc_gain(&self) -> T {
        (self.b0 + self.b1 + self.b2) / (T::one() + self.a1 + self.a2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FilterDesign {
    ButterworthHighpass { order: usize, cutoff_hz: f64 },
    Notch { center_hz: f64, q: f64 },
}

/// Cascade of second-order sections with its design metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiquadCascade<T> {
    sections: Vec<Biquad<T>>,
    design: FilterDesign,
    sample_rate: f64,
}

impl<T: Scalar> BiquadCascade<T> {
    fn new(sections: Vec<Biquad<T>>, design: FilterDesign, sample_rate: f64) -> Result<Self, DspError> {
        for (i, s) in sections.iter().enumerate() {
            let radius = s.pole_radius();
            if radius.is_nan() || radius >= 1.0 {
                return Err(DspError::Unstable { section: i, radius });
            }
        }
        Ok(Self {
            sections,
            design,
            sample_rate,
        })
    }

    pub fn sections(&self) -> &[Biquad<T>] {
        &self.sections
    }

    pub fn design(&self) -> FilterDesign {
        self.design
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn pole_radii(&self) -> Vec<f64> {
        self.sections.iter().map(Biquad::pole_radius).collect()
    }

    pub fn is_stable(&self) -> bool {
        self.pole_radii().iter().all(|&r| r < 1.0)
    }

    /// Complex single-pass response at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / self.sample_rate;
        let z_inv = Complex64::from_polar(1.0, -w);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
    }

    pub fn magnitude(&self, freq_hz: f64) -> f64 {
        self.response(freq_hz).norm()
    }

    pub fn magnitude_db(&self, freq_hz: f64) -> f64 {
        20.0 * self.magnitude(freq_hz).log10()
    }

    /// Edge extension used by [`filt_zero_phase`](Self::filt_zero_phase).
    pub fn pad_len(&self) -> usize {
        3 * (2 * self.sections.len() + 1)
    }

    /// Per-section initial states for a unit step, scaled by the DC gain
    /// of the preceding sections.
    fn step_states(&self) -> Vec<[T; 2]> {
        let mut scale = T::one();
        self.sections
            .iter()
            .map(|s| {
                let [z1, z2] = s.step_state();
                let st = [z1 * scale, z2 * scale];
                scale *= s.dc_gain();
                st
            })
            .collect()
    }

    /// Causal filtering with zero initial state.
    pub fn filter(&self, x: &[T]) -> Vec<T> {
        let mut y = x.to_vec();
        let mut state = vec![[T::zero(); 2]; self.sections.len()];
        self.run_in_place(&mut y, &mut state);
        y
    }

    fn run_in_place(&self, y: &mut [T], state: &mut [[T; 2]]) {
        for (s, st) in self.sections.iter().zip(state.iter_mut()) {
            let [mut z1, mut z2] = *st;
            for v in y.iter_mut() {
                let x = *v;
                let out = s.b0 * x + z1;
                z1 = s.b1 * x - s.a1 * out + z2;
                z2 = s.b2 * x - s.a2 * out;
                *v = out;
            }
            *st = [z1, z2];
        }
    }

    /// Forward-backward filtering with odd extension at both ends and
    /// steady-state initial conditions. Output has the input's length,
    /// magnitude |H|^2 and zero phase.
    pub fn filt_zero_phase(&self, x: &[T]) -> Result<Vec<T>, DspError> {
        let pad = self.pad_len();
        let n = x.len();
        if n <= pad {
            return Err(DspError::TooShort {
                needed: pad + 1,
                got: n,
            });
        }
        let two = T::lit(2.0);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| two * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| two * x[n - 1] - x[n - 1 - i]));

        let zi = self.step_states();
        let scaled = |v: T| zi.iter().map(|[a, b]| [*a * v, *b * v]).collect::<Vec<_>>();

        let mut state = scaled(ext[0]);
        self.run_in_place(&mut ext, &mut state);
        ext.reverse();
        let mut state = scaled(ext[0]);
        self.run_in_place(&mut ext, &mut state);
        ext.reverse();

        Ok(ext[pad..pad + n].to_vec())
    }
}

fn check_band(freq: f64, sample_rate: f64) -> bool {
    freq.is_finite() && sample_rate.is_finite() && freq > 0.0 && freq < sample_rate / 2.0
}

/// Butterworth high-pass via the bilinear transform with pre-warping.
/// Each section has unit gain at Nyquist.
pub fn design_highpass<T: Scalar>(
    order: usize,
    cutoff_hz: f64,
    sample_rate: f64,
) -> Result<BiquadCascade<T>, DspError> {
    if !check_band(cutoff_hz, sample_rate) {
        return Err(DspError::InvalidCutoff {
            cutoff_hz,
            sample_rate,
        });
    }
    if order == 0 {
        return Err(DspError::InvalidOrder(order));
    }
    let k = (PI * cutoff_hz / sample_rate).tan();
    let k2 = k * k;
    let mut sections = Vec::with_capacity(order.div_ceil(2));
    for i in 0..order / 2 {
        let theta = PI * (2 * i + 1) as f64 / (2 * order) as f64;
        let q = 1.0 / (2.0 * theta.sin());
        let norm = 1.0 / (1.0 + k / q + k2);
        sections.push(Biquad::from_f64([
            norm,
            -2.0 * norm,
            norm,
            2.0 * (k2 - 1.0) * norm,
            (1.0 - k / q + k2) * norm,
        ]));
    }
    if order % 2 == 1 {
        let norm = 1.0 / (1.0 + k);
        sections.push(Biquad::from_f64([norm, -norm, 0.0, (k - 1.0) * norm, 0.0]));
    }
    BiquadCascade::new(
        sections,
        FilterDesign::ButterworthHighpass { order, cutoff_hz },
        sample_rate,
    )
}

/// Second-order notch with -3 dB bandwidth `center_hz / q`.
pub fn design_notch<T: Scalar>(
    center_hz: f64,
    q: f64,
    sample_rate: f64,
) -> Result<BiquadCascade<T>, DspError> {
    if !check_band(center_hz, sample_rate) {
        return Err(DspError::InvalidCenter {
            center_hz,
            sample_rate,
        });
    }
    if !(q > 0.0 && q.is_finite()) {
        return Err(DspError::InvalidQ(q));
    }
    let w0 = 2.0 * PI * center_hz / sample_rate;
    let bw = w0 / q;
    let gain = 1.0 / (1.0 + (bw / 2.0).tan());
    let c = w0.cos();
    let section = Biquad::from_f64([gain, -2.0 * gain * c, gain, -2.0 * gain * c, 2.0 * gain - 1.0]);
    BiquadCascade::new(vec![section], FilterDesign::Notch { center_hz, q }, sample_rate)
}

/// High-pass then notch, both zero-phase, applied per channel.
#[derive(Clone, Debug)]
pub struct Preprocessor<T> {
    pub highpass: BiquadCascade<T>,
    pub notch: BiquadCascade<T>,
}

impl<T: Scalar> Preprocessor<T> {
    pub fn new(cfg: &PipelineConfig, sample_rate: f64) -> Result<Self, DspError> {
        Ok(Self {
            highpass: design_highpass(cfg.hp_order, cfg.hp_cutoff_hz, sample_rate)?,
            notch: design_notch(cfg.notch_hz, cfg.notch_q, sample_rate)?,
        })
    }

    pub fn apply_channel(&self, x: &[T]) -> Result<Vec<T>, DspError> {
        let y = self.highpass.filt_zero_phase(x)?;
        self.notch.filt_zero_phase(&y)
    }

    pub fn apply(&self, r: &Recording<T>) -> Result<Recording<T>, DspError> {
        r.try_map_channels(|x| self.apply_channel(x))
    }
}

/// Zero-phase high-pass followed by zero-phase notch on every channel.
pub fn preprocess<T: Scalar>(r: &Recording<T>, cfg: &PipelineConfig) -> Result<Recording<T>, DspError> {
    Preprocessor::new(cfg, r.sample_rate())?.apply(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FS: f64 = 500.0;

    fn sine(freq: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| (2.0 * PI * freq * i as f64 / FS).cos())
            .collect()
    }

    /// Peak over the middle half, clear of the notch's ~100-sample edge transient.
    fn central_peak(y: &[f64]) -> f64 {
        let n = y.len();
        y[n / 4..n - n / 4].iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    #[test]
    fn highpass_matches_reference_coefficients() {
        // Pole polynomials of a 4th-order 20 Hz high-pass at 500 SPS
        // (independently designed; the higher-Q pair comes first here).
        let hp = design_highpass::<f64>(4, 20.0, FS).unwrap();
        let s = hp.sections();
        assert_eq!(s.len(), 2);
        assert!((s[1].a1 - -1.575_239_98).abs() < 1e-8);
        assert!((s[1].a2 - 0.626_334_26).abs() < 1e-8);
        assert!((s[0].a1 - -1.768_827_86).abs() < 1e-8);
        assert!((s[0].a2 - 0.826_201_33).abs() < 1e-8);
    }

    #[test]
    fn highpass_magnitude_reference_points() {
        let hp = design_highpass::<f64>(4, 20.0, FS).unwrap();
        assert!((hp.magnitude_db(20.0) - -3.010_299_956_639_812).abs() < 0.01);
        assert!(hp.magnitude(0.0) < 1e-12);
        // 1/sqrt(1 + (tan(pi fc/fs)/tan(pi f/fs))^8) at f = 10 Hz.
        assert!((hp.magnitude_db(10.0) - -24.236_600_218).abs() < 1e-6);
        assert!((hp.magnitude(250.0) - 1.0).abs() < 1e-12);
        assert!(hp.is_stable());
    }

    #[test]
    fn odd_order_highpass() {
        let hp = design_highpass::<f64>(3, 20.0, FS).unwrap();
        assert_eq!(hp.sections().len(), 2);
        assert!((hp.magnitude_db(20.0) + 3.0103).abs() < 0.01);
    }

    #[test]
    fn notch_magnitude_reference_points() {
        let n = design_notch::<f64>(50.0, 30.0, FS).unwrap();
        assert!(n.magnitude_db(50.0) <= -40.0);
        assert!(n.magnitude_db(0.0).abs() < 0.1);
        assert!(n.magnitude_db(250.0).abs() < 0.1);
        // Matches an independent design: b0 = 0.98963618, a2 = 0.97927235.
        let s = n.sections()[0];
        assert!((s.b0 - 0.989_636_18).abs() < 1e-8);
        assert!((s.a2 - 0.979_272_35).abs() < 1e-8);
    }

    #[test]
    fn notch_bandwidth_by_sweep() {
        let n = design_notch::<f64>(50.0, 30.0, FS).unwrap();
        let half = 1.0 / 2f64.sqrt();
        let step = 1e-4;
        let mut lo = 50.0;
        while n.magnitude(lo) < half {
            lo -= step;
        }
        let mut hi = 50.0;
        while n.magnitude(hi) < half {
            hi += step;
        }
        let bw = hi - lo;
        assert!((bw - 50.0 / 30.0).abs() < 0.1 * 50.0 / 30.0, "bandwidth {bw}");
    }

    #[test]
    fn invalid_designs() {
        assert!(matches!(
            design_highpass::<f64>(4, 250.0, FS),
            Err(DspError::InvalidCutoff { .. })
        ));
        assert!(matches!(
            design_highpass::<f64>(4, 0.0, FS),
            Err(DspError::InvalidCutoff { .. })
        ));
        assert!(matches!(
            design_notch::<f64>(300.0, 30.0, FS),
            Err(DspError::InvalidCenter { .. })
        ));
        assert!(matches!(
            design_notch::<f64>(50.0, 0.0, FS),
            Err(DspError::InvalidQ(_))
        ));
    }

    #[test]
    fn zero_phase_rejects_short_input() {
        let hp = design_highpass::<f64>(4, 20.0, FS).unwrap();
        assert_eq!(hp.pad_len(), 15);
        assert!(matches!(
            hp.filt_zero_phase(&[0.0; 15]),
            Err(DspError::TooShort { needed: 16, got: 15 })
        ));
        assert_eq!(hp.filt_zero_phase(&[0.0; 16]).unwrap().len(), 16);
    }

    #[test]
    fn constant_is_rejected_by_highpass() {
        let hp = design_highpass::<f64>(4, 20.0, FS).unwrap();
        let c = 123.0;
        let y = hp.filt_zero_phase(&vec![c; 2000]).unwrap();
        assert!(y.iter().all(|v| v.abs() <= 1e-6 * c));
    }

    #[test]
    fn passband_sine_survives_highpass() {
        let hp = design_highpass::<f64>(4, 20.0, FS).unwrap();
        let expected = hp.magnitude(100.0).powi(2);
        assert!((expected - 1.0).abs() < 1e-3);
        let y = hp.filt_zero_phase(&sine(100.0, 2000)).unwrap();
        let peak = central_peak(&y);
        assert!((peak - 1.0).abs() < 0.01, "peak {peak}");
    }

    #[test]
    fn notch_removes_powerline() {
        let n = design_notch::<f64>(50.0, 30.0, FS).unwrap();
        let y = n.filt_zero_phase(&sine(50.0, 2000)).unwrap();
        let p = central_peak(&y);
        assert!(p <= 1e-2, "residual {p}");
    }

    #[test]
    fn preprocess_keeps_only_passband_tone() {
        let cfg = PipelineConfig::default();
        let pre = Preprocessor::<f64>::new(&cfg, FS).unwrap();
        let hundred = sine(100.0, 2000);
        for interferer in [5.0, 50.0] {
            let other = sine(interferer, 2000);
            let x: Vec<f64> = hundred.iter().zip(&other).map(|(a, b)| a + b).collect();
            let y = pre.apply_channel(&x).unwrap();
            let clean = pre.apply_channel(&hundred).unwrap();
            let residual: Vec<f64> = y.iter().zip(&clean).map(|(a, b)| a - b).collect();
            assert!(central_peak(&residual) <= 0.02, "{interferer} Hz residual");
            assert!((central_peak(&y) - 1.0).abs() < 0.02);
        }
        let zero = Recording::<f64>::zeros(3, 2000, FS);
        assert_eq!(pre.apply(&zero).unwrap(), zero);
    }

    #[test]
    fn f32_designs_agree_with_f64() {
        let a = design_highpass::<f32>(4, 20.0, FS).unwrap();
        let b = design_highpass::<f64>(4, 20.0, FS).unwrap();
        assert!((a.magnitude_db(20.0) - b.magnitude_db(20.0)).abs() < 1e-3);
        let x: Vec<f32> = sine(100.0, 500).iter().map(|&v| v as f32).collect();
        let y = a.filt_zero_phase(&x).unwrap();
        assert_eq!(y.len(), 500);
    }
}
