//! Closed-form inner products of the three kernels with the Haar system.
//!
//! * `F1`: `<(t - s)_+^{H-1/2}, H_n>` on `[0, 1]`;
//! * `F2`: `<(t + s)^{H-1/2} - s^{H-1/2}, H_n>` on `[0, 1]`, the `[-1, 0]`
//!   kernel folded onto `[0, 1]` by `s -> -s`;
//! * `G`: `g_n(t, H) = ∫_0^1 G_{t,H}(x) (∫_0^x H_n) dx` with
//!   `G_{t,H}(x) = ((t + 1/x)^{H-3/2} - (1/x)^{H-3/2}) x^{-3}`.
//!
//! Every formula is a signed sum of differences of neighbouring powers. The
//! differences go through [`pow_step`], which never subtracts two large
//! powers directly.

use serde::Serialize;

use crate::error::{check_unit, Error, Result};
use crate::haar::{checked_interval, DyadicInterval};

/// Hurst index together with the constants the closed forms need.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HurstParams {
    pub h: f64,
    /// `1 / Γ(H + 1/2)`.
    pub c_h: f64,
    /// `H + 1/2`.
    pub hph: f64,
    /// `H - 1/2`.
    pub hmh: f64,
    pub is_half: bool,
    /// `sqrt(Γ(2H + 1) sin(πH))`. Multiplying `c_h` by this gives the kernel
    /// constant for which `Var B_1 = 1`. Exactly 1 at `H = 1/2`.
    pub unit_scale: f64,
}

/// Distance from 1/2 below which `H` is treated as exactly one half.
pub const HALF_TOLERANCE: f64 = 1e-14;

impl HurstParams {
    pub fn new(h: f64) -> Result<Self> {
        if !(h > 0.0 && h < 1.0) {
            return Err(Error::Domain {
                what: "H",
                value: h,
                domain: "(0, 1)",
            });
        }
        let is_half = (h - 0.5).abs() < HALF_TOLERANCE;
        let (c_h, unit_scale) = if is_half {
            (1.0, 1.0)
        } else {
            let g = libm::tgamma(2.0 * h + 1.0) * (std::f64::consts::PI * h).sin();
            (1.0 / libm::tgamma(h + 0.5), g.sqrt())
        };
        Ok(HurstParams {
            h,
            c_h,
            hph: h + 0.5,
            hmh: h - 0.5,
            is_half,
            unit_scale,
        })
    }
}

/// Which coefficient family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum CoefficientKind {
    F1,
    F2,
    G,
}

impl CoefficientKind {
    pub const ALL: [CoefficientKind; 3] = [CoefficientKind::F1, CoefficientKind::F2, CoefficientKind::G];

    pub fn name(&self) -> &'static str {
        match self {
            CoefficientKind::F1 => "f1",
            CoefficientKind::F2 => "f2",
            CoefficientKind::G => "g",
        }
    }
}

/// `(x + h)^p - x^p` for `x >= 0`, `h > 0`.
pub(crate) fn pow_step(x: f64, h: f64, p: f64) -> f64 {
    if x == 0.0 {
        h.powf(p)
    } else {
        x.powf(p) * libm::expm1(p * libm::log1p(h / x))
    }
}

/// `∫_u^v (t - s)_+^{H-1/2} ds` for one half of a Haar support, `v - u = h`.
fn f1_half(t: f64, u: f64, v: f64, h: f64, p: f64) -> f64 {
    if t <= u {
        0.0
    } else if t >= v {
        pow_step(t - v, h, p) / p
    } else {
        (t - u).powf(p) / p
    }
}

fn f1_on(t: f64, p: &HurstParams, iv: &DyadicInterval) -> f64 {
    if t <= iv.a {
        return 0.0;
    }
    let h = iv.half_width();
    let left = f1_half(t, iv.a, iv.m, h, p.hph);
    let right = f1_half(t, iv.m, iv.b, h, p.hph);
    iv.amplitude() * (left - right)
}

/// `<f_t^{(1)}, H_n>`.
pub fn coeff_f1(t: f64, p: &HurstParams, n: usize) -> Result<f64> {
    check_unit("t", t)?;
    let iv = checked_interval(n)?;
    Ok(coeff_f1_unchecked(t, p, n, iv.as_ref()))
}

fn coeff_f1_unchecked(t: f64, p: &HurstParams, _n: usize, iv: Option<&DyadicInterval>) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    match iv {
        // kernel is the indicator of [0, t): the coefficient is the tent itself
        None if p.is_half => t,
        Some(iv) if p.is_half => crate::haar::tent_on(iv, t),
        None => t.powf(p.hph) / p.hph,
        Some(iv) => f1_on(t, p, iv),
    }
}

/// `<(c + s)^{H-1/2}, H_n>` on `[0, 1]`.
fn shifted_power_coeff(c: f64, p: &HurstParams, iv: Option<&DyadicInterval>) -> f64 {
    match iv {
        None => pow_step(c, 1.0, p.hph) / p.hph,
        Some(iv) => {
            let h = iv.half_width();
            let left = pow_step(c + iv.a, h, p.hph);
            let right = pow_step(c + iv.m, h, p.hph);
            iv.amplitude() * (left - right) / p.hph
        }
    }
}

/// `<f_t^{(2)}, H̃_n>`, evaluated as `<(t+s)^{H-1/2}, H_n> - <s^{H-1/2}, H_n>`.
pub fn coeff_f2(t: f64, p: &HurstParams, n: usize) -> Result<f64> {
    check_unit("t", t)?;
    let iv = checked_interval(n)?;
    Ok(coeff_f2_unchecked(t, p, iv.as_ref()))
}

fn coeff_f2_unchecked(t: f64, p: &HurstParams, iv: Option<&DyadicInterval>) -> f64 {
    if p.is_half || t == 0.0 {
        return 0.0;
    }
    shifted_power_coeff(t, p, iv) - shifted_power_coeff(0.0, p, iv)
}

/// `G_{t,H}(x) = ((t + 1/x)^{H-3/2} - (1/x)^{H-3/2}) x^{-3}`, computed as
/// `x^{-H-3/2} expm1((H - 3/2) ln(1 + t x))`.
pub fn big_g(t: f64, p: &HurstParams, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain {
            what: "x",
            value: x,
            domain: "(0, 1]",
        });
    }
    Ok(big_g_unchecked(t, p, x))
}

pub(crate) fn big_g_unchecked(t: f64, p: &HurstParams, x: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let beta = p.h - 1.5;
    x.powf(-p.h - 1.5) * libm::expm1(beta * libm::log1p(t * x))
}

/// `(t + y)^{H-1/2} - y^{H-1/2}`, zero in the limit `y -> ∞`.
fn phi(t: f64, alpha: f64, y: f64) -> f64 {
    if y.is_infinite() {
        0.0
    } else {
        y.powf(alpha) * libm::expm1(alpha * libm::log1p(t / y))
    }
}

/// `∫_a^b G(x) x dx = (1/(H-1/2)) [y^{H-1/2} - (t+y)^{H-1/2}]_{y=1/a}^{y=1/b}`; `a` may be 0.
fn moment_one(t: f64, p: &HurstParams, a: f64, b: f64) -> f64 {
    let alpha = p.hmh;
    (phi(t, alpha, 1.0 / a) - phi(t, alpha, 1.0 / b)) / alpha
}

/// Antiderivative in `u = 1/x` of `((t+u)^{H-3/2} - u^{H-3/2}) u`. Equal to the
/// bracket of the closed form for `∫ G dx`, rewritten so the leading powers of
/// `u` never cancel:
/// `((t+u)^{H+1/2} - u^{H+1/2})/(H+1/2) - t (t+u)^{H-1/2}/(H-1/2)`.
fn moment_zero_antiderivative(t: f64, p: &HurstParams, u: f64) -> f64 {
    let lead = u.powf(p.hph) * libm::expm1(p.hph * libm::log1p(t / u)) / p.hph;
    lead - t * (t + u).powf(p.hmh) / p.hmh
}

/// `∫_a^b G(x) dx` for `0 < a < b`.
fn moment_zero(t: f64, p: &HurstParams, a: f64, b: f64) -> f64 {
    moment_zero_antiderivative(t, p, 1.0 / a) - moment_zero_antiderivative(t, p, 1.0 / b)
}

fn g_on(t: f64, p: &HurstParams, iv: &DyadicInterval) -> f64 {
    // Linear pieces of the tent: x - a on [a, m], b - x on [m, b].
    let rising_x = moment_one(t, p, iv.a, iv.m);
    let falling_x = moment_one(t, p, iv.m, iv.b);
    let rising_c = if iv.a == 0.0 {
        0.0
    } else {
        iv.a * moment_zero(t, p, iv.a, iv.m)
    };
    let falling_c = iv.b * moment_zero(t, p, iv.m, iv.b);
    iv.amplitude() * ((rising_x - falling_x) - (rising_c - falling_c))
}

/// `g_n(t, H)`. Undefined at `H = 1/2`; callers drop the whole series there.
pub fn coeff_g(t: f64, p: &HurstParams, n: usize) -> Result<f64> {
    check_unit("t", t)?;
    if p.is_half {
        return Err(Error::Precondition(
            "g_n has a pole at H = 1/2; the series is identically zero there".into(),
        ));
    }
    let iv = checked_interval(n)?;
    Ok(coeff_g_unchecked(t, p, iv.as_ref()))
}

fn coeff_g_unchecked(t: f64, p: &HurstParams, iv: Option<&DyadicInterval>) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    match iv {
        None => moment_one(t, p, 0.0, 1.0),
        Some(iv) => g_on(t, p, iv),
    }
}

/// Unchecked scalar coefficient: `t` in `[0, 1]`, `n` within the supported
/// levels, and `p` not one half for `G`.
pub(crate) fn coefficient_at(kind: CoefficientKind, t: f64, p: &HurstParams, n: usize) -> f64 {
    let iv = crate::haar::split_index(n).interval();
    match kind {
        CoefficientKind::F1 => coeff_f1_unchecked(t, p, n, iv.as_ref()),
        CoefficientKind::F2 => coeff_f2_unchecked(t, p, iv.as_ref()),
        CoefficientKind::G => coeff_g_unchecked(t, p, iv.as_ref()),
    }
}

/// Coefficients `n = 0..=N` of one family at a fixed `(t, H)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientVector {
    kind: CoefficientKind,
    t: f64,
    params: HurstParams,
    values: Vec<f64>,
}

impl CoefficientVector {
    pub fn kind(&self) -> CoefficientKind {
        self.kind
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn params(&self) -> &HurstParams {
        &self.params
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Highest index held.
    pub fn truncation(&self) -> usize {
        self.values.len() - 1
    }
}

/// Builds the vector `values[n]` for `n = 0..=N`. F2 and G are all zeros at `H = 1/2`.
pub fn coeff_vector(kind: CoefficientKind, t: f64, p: &HurstParams, n_max: usize) -> Result<CoefficientVector> {
    check_unit("t", t)?;
    checked_interval(n_max)?;
    let zero = t == 0.0 || (p.is_half && kind != CoefficientKind::F1);
    let values = if zero {
        vec![0.0; n_max + 1]
    } else {
        (0..=n_max).map(|n| coefficient_at(kind, t, p, n)).collect()
    };
    Ok(CoefficientVector {
        kind,
        t,
        params: *p,
        values,
    })
}
