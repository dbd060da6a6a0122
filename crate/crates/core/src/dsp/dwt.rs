//! Multi-level db4 analysis filter bank.
//!
//! Coefficient `k` of a level is `sum_j h[j] * x[2k + 1 - j]`, with `x`
//! extended by half-sample symmetric reflection (`x[-1] = x[0]`,
//! `x[N] = x[N-1]`), giving `floor((N + 7) / 2)` coefficients per level.

use serde::{Deserialize, Serialize};

use super::DspError;
use crate::Scalar;

/// db4 decomposition low-pass taps.
pub const DB4_DEC_LO: [f64; 8] = [
    -0.010_597_401_785_069_032,
    0.032_883_011_666_885_2,
    0.030_841_381_835_560_764,
    -0.187_034_811_719_093_09,
    -0.027_983_769_416_859_854,
    0.630_880_767_929_858_9,
    0.714_846_570_552_915_7,
    0.230_377_813_308_896_5,
];

/// db4 decomposition high-pass taps (quadrature mirror of the low-pass).
pub const DB4_DEC_HI: [f64; 8] = [
    -0.230_377_813_308_896_5,
    0.714_846_570_552_915_7,
    -0.630_880_767_929_858_9,
    -0.027_983_769_416_859_854,
    0.187_034_811_719_093_09,
    0.030_841_381_835_560_764,
    -0.032_883_011_666_885_2,
    -0.010_597_401_785_069_032,
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    /// Half-sample symmetric extension.
    Symmetric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DwtResult<T> {
    /// Approximation at the deepest level.
    pub approx: Vec<T>,
    /// `details[0]` is level 1, `details[levels - 1]` the deepest.
    pub details: Vec<Vec<T>>,
    pub mode: BoundaryMode,
}

impl<T> DwtResult<T> {
    pub fn levels(&self) -> usize {
        self.details.len()
    }

    /// Detail coefficients at `level` (1-based).
    pub fn detail(&self, level: usize) -> &[T] {
        &self.details[level - 1]
    }
}

#[inline]
pub fn dwt_coeff_len(n: usize) -> usize {
    (n + DB4_DEC_LO.len() - 1) / 2
}

/// Maps any integer index onto `[0, n)` by half-sample symmetric reflection.
#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

/// One analysis level: (approximation, detail).
pub fn dwt_step<T: Scalar>(x: &[T]) -> (Vec<T>, Vec<T>) {
    let lo = DB4_DEC_LO.map(T::lit);
    let hi = DB4_DEC_HI.map(T::lit);
    let n = x.len();
    let out_len = dwt_coeff_len(n);
    let mut approx = Vec::with_capacity(out_len);
    let mut detail = Vec::with_capacity(out_len);
    for k in 0..out_len {
        let centre = 2 * k as isize + 1;
        let (mut a, mut d) = (T::zero(), T::zero());
        for j in 0..lo.len() {
            let v = x[reflect(centre - j as isize, n)];
            a += lo[j] * v;
            d += hi[j] * v;
        }
        approx.push(a);
        detail.push(d);
    }
    (approx, detail)
}

/// `levels`-deep db4 decomposition.
pub fn dwt_db4<T: Scalar>(x: &[T], levels: usize) -> Result<DwtResult<T>, DspError> {
    let needed = 1usize.checked_shl(levels as u32).unwrap_or(usize::MAX);
    if levels == 0 || x.len() < needed {
        return Err(DspError::TooShort {
            needed: needed.max(2),
            got: x.len(),
        });
    }
    let mut approx = x.to_vec();
    let mut details = Vec::with_capacity(levels);
    for _ in 0..levels {
        let (a, d) = dwt_step(&approx);
        details.push(d);
        approx = a;
    }
    Ok(DwtResult {
        approx,
        details,
        mode: BoundaryMode::Symmetric,
    })
}
