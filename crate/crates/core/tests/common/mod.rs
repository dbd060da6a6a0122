//! Brute-force reference implementations shared by the integration and
//! acceptance tests. Nothing here calls into the library's numeric code.
#![allow(dead_code)]

use std::f64::consts::PI;

/// db4 decomposition low-pass taps, typed in independently of the library.
pub const DB4_LO: [f64; 8] = [
    -0.010597401785069032,
    0.0328830116668852,
    0.030841381835560764,
    -0.18703481171909309,
    -0.027983769416859854,
    0.6308807679298589,
    0.7148465705529157,
    0.2303778133088965,
];

/// Quadrature mirror: `hi[k] = (-1)^(k+1) lo[7-k]`.
pub fn db4_hi() -> [f64; 8] {
    let mut hi = [0.0; 8];
    for k in 0..8 {
        let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
        hi[k] = sign * DB4_LO[7 - k];
    }
    hi
}

/// Half-sample symmetric padding by `f - 1` on each side, full linear
/// convolution, then every second output starting at index `f`.
pub fn dwt_level_oracle(x: &[f64], h: &[f64; 8]) -> Vec<f64> {
    let n = x.len() as isize;
    let f = h.len() as isize;
    let at = |mut i: isize| loop {
        if i < 0 {
            i = -1 - i;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return x[i as usize];
        }
    };
    let padded: Vec<f64> = (-(f - 1)..n + f - 1).map(at).collect();
    let mut full = vec![0.0; padded.len() + h.len() - 1];
    for (i, &p) in padded.iter().enumerate() {
        for (j, &c) in h.iter().enumerate() {
            full[i + j] += p * c;
        }
    }
    let out_len = ((n + f - 1) / 2) as usize;
    (0..out_len).map(|k| full[2 * k + f as usize]).collect()
}

/// (approximation, details by level starting at 1).
pub fn dwt_oracle(x: &[f64], levels: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let hi = db4_hi();
    let mut a = x.to_vec();
    let mut details = Vec::new();
    for _ in 0..levels {
        details.push(dwt_level_oracle(&a, &hi));
        a = dwt_level_oracle(&a, &DB4_LO);
    }
    (a, details)
}

/// Explicit O(N^2) one-sided periodogram: (freqs, power, df).
pub fn periodogram_oracle(x: &[f64], fs: f64) -> (Vec<f64>, Vec<f64>, f64) {
    let n = x.len();
    let mut freqs = Vec::new();
    let mut power = Vec::new();
    for k in 0..=n / 2 {
        let (mut re, mut im) = (0.0, 0.0);
        for (t, &v) in x.iter().enumerate() {
            let ang = 2.0 * PI * ((k * t) % n) as f64 / n as f64;
            re += v * ang.cos();
            im -= v * ang.sin();
        }
        let c = if k == 0 || (n.is_multiple_of(2) && k == n / 2) { 1.0 } else { 2.0 };
        power.push(c * (re * re + im * im) / (n as f64 * fs));
        freqs.push(k as f64 * fs / n as f64);
    }
    (freqs, power, fs / n as f64)
}

fn percentile(x: &[f64], p: f64) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = p * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
}

fn zcr(x: &[f64]) -> f64 {
    let mut prev_sign = 0i8;
    let mut crossings = 0;
    for &v in x {
        let s = if v > 0.0 {
            1
        } else if v < 0.0 {
            -1
        } else {
            prev_sign
        };
        if s != 0 && prev_sign != 0 && s != prev_sign {
            crossings += 1;
        }
        if s != 0 {
            prev_sign = s;
        }
    }
    crossings as f64 / (x.len() - 1) as f64
}

/// All 21 per-window features by direct definition.
pub fn window_features_oracle(x: &[f64], fs: f64, edges: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut out = vec![
        rms,
        max,
        min,
        var.sqrt(),
        var,
        mean,
        percentile(x, 0.25),
        percentile(x, 0.75),
        zcr(x),
    ];

    let (_, details) = dwt_oracle(x, 3);
    let d3 = &details[2];
    let dm = d3.iter().sum::<f64>() / d3.len() as f64;
    let dv = d3.iter().map(|v| (v - dm).powi(2)).sum::<f64>() / d3.len() as f64;
    out.push(dm);
    out.push(dv.sqrt());

    let (f, p, df) = periodogram_oracle(x, fs);
    let sum: f64 = p.iter().sum();
    let total = sum * df;
    let mut peak = 0;
    for k in 1..p.len() {
        if p[k] > p[peak] {
            peak = k;
        }
    }
    if sum == 0.0 {
        out.extend([0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        out.extend(std::iter::repeat_n(0.0, edges.len() - 1));
        return out;
    }
    let m = |order: i32| f.iter().zip(&p).map(|(fk, pk)| fk.powi(order) * pk).sum::<f64>() / sum;
    out.extend([m(1), f[peak], total, total / p.len() as f64, m(2), m(3)]);
    for b in 0..edges.len() - 1 {
        let last = b + 2 == edges.len();
        let band: f64 = f
            .iter()
            .zip(&p)
            .filter(|(fk, _)| **fk >= edges[b] && (**fk < edges[b + 1] || (last && **fk == edges[b + 1])))
            .map(|(_, pk)| pk)
            .sum();
        out.push(band * df / total);
    }
    out
}

/// Natural magnitude of each feature for a window with peak `amp`, used as
/// the relative-error floor when a feature is itself near zero.
pub fn feature_scales(amp: f64, fs: f64) -> [f64; 21] {
    let a2 = amp * amp;
    let ny = fs / 2.0;
    [
        amp, amp, amp, amp, a2, amp, amp, amp, 1.0, // time
        amp, amp, // wavelet
        ny, ny, a2, a2 / 51.0, ny * ny, ny * ny * ny, 1.0, 1.0, 1.0, 1.0,
    ]
}

/// `|got - want| / max(|want|, scale)`.
pub fn rel_err(got: f64, want: f64, scale: f64) -> f64 {
    (got - want).abs() / want.abs().max(scale)
}
