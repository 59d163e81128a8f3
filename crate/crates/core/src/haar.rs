//! The Haar system on `[0, 1]` and its unit translate on `[-1, 0]`.
//!
//! Index `n = 0` is the constant scaling function. Every `n >= 1` splits as
//! `n = 2^j + k` with `0 <= k < 2^j`; the wavelet is `2^{j/2} H(2^j s - k)`,
//! supported on `[k/2^j, (k+1)/2^j)`, where the right endpoint is included
//! when it equals 1.

use crate::error::{check_unit, Error, Result};

/// Deepest supported level. Dyadic endpoints `k / 2^j` stay exact in `f64`.
pub const MAX_LEVEL: u32 = 40;

/// Flat Haar index decomposed into level and shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WaveletIndex {
    Scaling,
    Wavelet { n: usize, level: u32, shift: usize },
}

impl WaveletIndex {
    pub fn n(&self) -> usize {
        match *self {
            WaveletIndex::Scaling => 0,
            WaveletIndex::Wavelet { n, .. } => n,
        }
    }

    /// Support of a wavelet; `None` for the scaling function.
    pub fn interval(&self) -> Option<DyadicInterval> {
        match *self {
            WaveletIndex::Scaling => None,
            WaveletIndex::Wavelet { level, shift, .. } => Some(DyadicInterval::new(level, shift)),
        }
    }
}

/// `[k/2^j, (k+1)/2^j]` with its midpoint, all exact dyadic rationals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DyadicInterval {
    pub level: u32,
    pub shift: usize,
    pub a: f64,
    pub m: f64,
    pub b: f64,
}

impl DyadicInterval {
    pub fn new(level: u32, shift: usize) -> Self {
        let width = libm::ldexp(1.0, -(level as i32));
        let a = shift as f64 * width;
        DyadicInterval {
            level,
            shift,
            a,
            m: a + 0.5 * width,
            b: a + width,
        }
    }

    /// `2^{j/2}`, the wavelet amplitude at this level.
    pub fn amplitude(&self) -> f64 {
        level_amplitude(self.level)
    }

    /// Half-width `2^{-(j+1)}`.
    pub fn half_width(&self) -> f64 {
        libm::ldexp(1.0, -(self.level as i32) - 1)
    }
}

pub(crate) fn level_amplitude(level: u32) -> f64 {
    let base = libm::ldexp(1.0, (level / 2) as i32);
    if level % 2 == 1 {
        base * std::f64::consts::SQRT_2
    } else {
        base
    }
}

/// Splits a flat index into `(level, shift)`.
pub fn split_index(n: usize) -> WaveletIndex {
    if n == 0 {
        return WaveletIndex::Scaling;
    }
    let level = usize::BITS - 1 - n.leading_zeros();
    WaveletIndex::Wavelet {
        n,
        level,
        shift: n - (1usize << level),
    }
}

pub(crate) fn checked_interval(n: usize) -> Result<Option<DyadicInterval>> {
    let idx = split_index(n);
    if let WaveletIndex::Wavelet { level, .. } = idx {
        if level > MAX_LEVEL {
            return Err(Error::Precondition(format!(
                "index {n} is at level {level}, beyond the supported maximum {MAX_LEVEL}"
            )));
        }
    }
    Ok(idx.interval())
}

/// Value of a wavelet on its support, given the point is already known to lie in `[0, 1]`.
pub(crate) fn eval_on(iv: &DyadicInterval, s: f64) -> f64 {
    if s < iv.a || s > iv.b {
        return 0.0;
    }
    if s == iv.b {
        // half-open support, except at the right end of [0, 1]
        return if iv.b == 1.0 { -iv.amplitude() } else { 0.0 };
    }
    if s < iv.m {
        iv.amplitude()
    } else {
        -iv.amplitude()
    }
}

/// `H_n(s)` for `s` in `[0, 1]`.
pub fn haar_eval(n: usize, s: f64) -> Result<f64> {
    check_unit("s", s)?;
    Ok(match checked_interval(n)? {
        None => 1.0,
        Some(iv) => eval_on(&iv, s),
    })
}

/// The basis on `[-1, 0]` obtained by translating `[0, 1]` one unit left.
pub fn haar_eval_shifted(n: usize, s: f64) -> Result<f64> {
    if !(-1.0..=0.0).contains(&s) {
        return Err(Error::Domain {
            what: "s",
            value: s,
            domain: "[-1, 0]",
        });
    }
    haar_eval(n, s + 1.0)
}

pub(crate) fn tent_on(iv: &DyadicInterval, x: f64) -> f64 {
    if x <= iv.a || x >= iv.b {
        0.0
    } else if x <= iv.m {
        iv.amplitude() * (x - iv.a)
    } else {
        iv.amplitude() * (iv.b - x)
    }
}

/// `∫_0^x H_n(y) dy`: `x` for the scaling function, a tent of height
/// `2^{-j/2 - 1}` over the support otherwise.
pub fn haar_antiderivative(n: usize, x: f64) -> Result<f64> {
    check_unit("x", x)?;
    Ok(match checked_interval(n)? {
        None => x,
        Some(iv) => tent_on(&iv, x),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    #[test]
    fn split_examples() {
        assert_eq!(split_index(0), WaveletIndex::Scaling);
        assert_eq!(
            split_index(1),
            WaveletIndex::Wavelet {
                n: 1,
                level: 0,
                shift: 0
            }
        );
        assert_eq!(
            split_index(5),
            WaveletIndex::Wavelet {
                n: 5,
                level: 2,
                shift: 1
            }
        );
        for n in 1..5000usize {
            if let WaveletIndex::Wavelet { level, shift, .. } = split_index(n) {
                assert_eq!((1usize << level) + shift, n);
                assert!(shift < (1usize << level));
            } else {
                panic!("scaling for n = {n}");
            }
        }
    }

    #[test]
    fn eval_examples() {
        assert_eq!(haar_eval(0, 0.3).unwrap(), 1.0);
        assert_eq!(haar_eval(1, 0.25).unwrap(), 1.0);
        assert_eq!(haar_eval(1, 0.75).unwrap(), -1.0);
        assert!((haar_eval(2, 0.2).unwrap() - SQRT2).abs() < 1e-15);
        assert_eq!(haar_eval(1, 1.0).unwrap(), -1.0);
        assert_eq!(haar_eval(2, 0.5).unwrap(), 0.0);
        assert!(haar_eval(1, 1.5).is_err());
        assert!(haar_eval(1, -0.1).is_err());
        assert!(haar_eval(1 << 41, 0.5).is_err());
    }

    #[test]
    fn shifted_examples() {
        assert_eq!(haar_eval_shifted(0, -0.5).unwrap(), 1.0);
        assert_eq!(haar_eval_shifted(1, -0.75).unwrap(), 1.0);
        // s + 1 = 0.7 sits in [0.5, 0.75), the positive half of n = 3
        let pointwise = haar_eval(3, 0.7).unwrap();
        assert!((haar_eval_shifted(3, -0.3).unwrap() - pointwise).abs() < 1e-15);
        assert!(haar_eval_shifted(0, 0.2).is_err());
    }

    #[test]
    fn tent_examples() {
        assert_eq!(haar_antiderivative(0, 0.4).unwrap(), 0.4);
        assert_eq!(haar_antiderivative(1, 0.5).unwrap(), 0.5);
        assert_eq!(haar_antiderivative(1, 1.0).unwrap(), 0.0);
        assert!(haar_antiderivative(3, 1.2).is_err());
    }

    #[test]
    fn amplitude_matches_sqrt() {
        for j in 0..=MAX_LEVEL {
            let exact = libm::ldexp(1.0, j as i32).sqrt();
            assert!((level_amplitude(j) - exact).abs() <= 1e-15 * exact);
        }
    }
}
