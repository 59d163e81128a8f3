//! Independent references for the closed forms and for the process law.
//!
//! [`quad_coefficient`] integrates the defining inner products directly with
//! a globally adaptive Gauss-Kronrod 7/15 rule. The domain is first cut at
//! every Haar breakpoint. A piece that ends on a marked point with a power-law
//! singularity `|x - x0|^γ` is pulled back through `x - x0 = L w^q` with
//! `q = 2/(1+γ)`, which turns the integrand into `w` times a smooth function.
//!
//! [`cholesky_sample`] draws exact fBm vectors from the covariance matrix.

use std::collections::BinaryHeap;
use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::coefficients::{big_g_unchecked, CoefficientKind, HurstParams};
use crate::error::{check_unit, Error, Result};
use crate::expansion::{validate_times, Expansion, GeneratorConfig, PathSample};
use crate::haar::{checked_interval, eval_on, tent_on};
use crate::noise::standard_normals;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Stream id of the Cholesky sampler's normals; the bundle uses 1 to 4.
const STREAM_CHOLESKY: u64 = 5;

/// Largest grid the Cholesky sampler accepts.
pub const MAX_CHOLESKY_TIMES: usize = 2048;

/// Diagonal jitter tried once when the plain factorization fails.
pub const CHOLESKY_JITTER: f64 = 1e-12;

/// Accuracy and budget of the adaptive rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureSpec {
    /// Target for the summed error estimate of one integral.
    pub abs_tol: f64,
    /// Bisections allowed beyond the initial pieces.
    pub max_subdivisions: usize,
    /// Apply the endpoint substitutions of [`singular_endpoints`].
    pub use_singular_hints: bool,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            abs_tol: 1e-10,
            max_subdivisions: 4000,
            use_singular_hints: true,
        }
    }
}

/// A point where the integrand behaves like `|x - at|^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Singularity {
    pub at: f64,
    pub exponent: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub subdivisions: usize,
}

#[derive(Clone, Copy)]
enum Map {
    Plain,
    /// `x = a + L w^q`
    Left(f64),
    /// `x = b - L w^q`
    Right(f64),
}

struct Piece {
    a: f64,
    b: f64,
    map: Map,
}

impl Piece {
    /// Value of the pulled-back integrand at `w` in `[0, 1]`.
    fn eval(&self, f: &dyn Fn(f64) -> f64, w: f64) -> f64 {
        let len = self.b - self.a;
        match self.map {
            Map::Plain => len * f(self.a + len * w),
            Map::Left(q) => {
                if w == 0.0 {
                    return 0.0;
                }
                let wq = w.powf(q);
                len * q * (wq / w) * f(self.a + len * wq)
            }
            Map::Right(q) => {
                if w == 0.0 {
                    return 0.0;
                }
                let wq = w.powf(q);
                len * q * (wq / w) * f(self.b - len * wq)
            }
        }
    }
}

struct Segment {
    piece: usize,
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod(g: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let fc = g(c);
    let mut k = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let s = g(c - h * XGK[i]) + g(c + h * XGK[i]);
        k += WGK[i] * s;
        if i % 2 == 1 {
            gauss += WG[i / 2] * s;
        }
    }
    (k * h, ((k - gauss) * h).abs())
}

fn substitution_power(exponent: f64) -> f64 {
    2.0 / (1.0 + exponent)
}

/// `∫_a^b f` cut at `breaks`, substituting at the given singular points.
pub fn integrate(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    breaks: &[f64],
    singular: &[Singularity],
    spec: &QuadratureSpec,
) -> Result<QuadResult> {
    if !(spec.abs_tol > 0.0) {
        return Err(Error::Precondition("quadrature tolerance must be positive".into()));
    }
    if !(a < b) {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            subdivisions: 0,
        });
    }
    let mut cuts: Vec<f64> = breaks
        .iter()
        .chain(singular.iter().map(|s| &s.at))
        .copied()
        .filter(|&x| x > a && x < b)
        .collect();
    cuts.push(a);
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let hint = |x: f64| singular.iter().find(|s| s.at == x).map(|s| s.exponent);
    let mut pieces = Vec::new();
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        match (hint(lo), hint(hi)) {
            (Some(el), Some(er)) => {
                let mid = 0.5 * (lo + hi);
                pieces.push(Piece { a: lo, b: mid, map: Map::Left(substitution_power(el)) });
                pieces.push(Piece { a: mid, b: hi, map: Map::Right(substitution_power(er)) });
            }
            (Some(e), None) => pieces.push(Piece { a: lo, b: hi, map: Map::Left(substitution_power(e)) }),
            (None, Some(e)) => pieces.push(Piece { a: lo, b: hi, map: Map::Right(substitution_power(e)) }),
            (None, None) => pieces.push(Piece { a: lo, b: hi, map: Map::Plain }),
        }
    }

    let mut heap = BinaryHeap::new();
    let mut total_error = 0.0;
    for (i, p) in pieces.iter().enumerate() {
        let g = |w: f64| p.eval(f, w);
        let (value, error) = kronrod(&g, 0.0, 1.0);
        total_error += error;
        heap.push(Segment { piece: i, lo: 0.0, hi: 1.0, value, error });
    }

    let mut subdivisions = 0;
    while total_error > spec.abs_tol {
        if subdivisions >= spec.max_subdivisions {
            return Err(Error::NoConvergence {
                a,
                b,
                estimate: total_error,
                target: spec.abs_tol,
                subdivisions,
            });
        }
        let worst = heap.pop().expect("at least one segment");
        let p = &pieces[worst.piece];
        let g = |w: f64| p.eval(f, w);
        let mid = 0.5 * (worst.lo + worst.hi);
        if !(mid > worst.lo && mid < worst.hi) {
            return Err(Error::NoConvergence {
                a,
                b,
                estimate: total_error,
                target: spec.abs_tol,
                subdivisions,
            });
        }
        let (v1, e1) = kronrod(&g, worst.lo, mid);
        let (v2, e2) = kronrod(&g, mid, worst.hi);
        total_error += e1 + e2 - worst.error;
        heap.push(Segment { piece: worst.piece, lo: worst.lo, hi: mid, value: v1, error: e1 });
        heap.push(Segment { piece: worst.piece, lo: mid, hi: worst.hi, value: v2, error: e2 });
        subdivisions += 1;
    }

    let mut segments = heap.into_vec();
    segments.sort_by(|x, y| (x.piece, x.lo).partial_cmp(&(y.piece, y.lo)).unwrap_or(Ordering::Equal));
    let value = segments.iter().map(|s| s.value).collect::<crate::summation::CompensatedSum>().value();
    let error = segments.iter().map(|s| s.error).sum();
    Ok(QuadResult { value, error, subdivisions })
}

/// Marked points of the integrand [`quad_coefficient`] uses for `kind`:
/// distance `0` from `t` for F1, `s = 0` of the `s^{H-1/2}` part for F2,
/// and `x = 0` for the `g` integrand, whose envelope is `x^{1/2-H}`.
pub fn singular_endpoints(kind: CoefficientKind, p: &HurstParams) -> Vec<Singularity> {
    let exponent = match kind {
        CoefficientKind::F1 | CoefficientKind::F2 => p.hmh,
        CoefficientKind::G => -p.hmh,
    };
    if exponent == 0.0 {
        Vec::new()
    } else {
        vec![Singularity { at: 0.0, exponent }]
    }
}

fn haar_at(n: usize, s: f64) -> f64 {
    match crate::haar::split_index(n).interval() {
        None => 1.0,
        Some(iv) => eval_on(&iv, s),
    }
}

fn antiderivative_at(n: usize, x: f64) -> f64 {
    match crate::haar::split_index(n).interval() {
        None => x,
        Some(iv) => tent_on(&iv, x),
    }
}

/// The coefficient of `kind` by direct numerical integration.
pub fn quad_coefficient(kind: CoefficientKind, t: f64, p: &HurstParams, n: usize, spec: &QuadratureSpec) -> Result<f64> {
    check_unit("t", t)?;
    let iv = checked_interval(n)?;
    let breaks: Vec<f64> = match iv {
        None => Vec::new(),
        Some(iv) => vec![iv.a, iv.m, iv.b],
    };
    let hints = if spec.use_singular_hints {
        singular_endpoints(kind, p)
    } else {
        Vec::new()
    };
    let alpha = p.hmh;
    match kind {
        CoefficientKind::F1 => {
            if t == 0.0 {
                return Ok(0.0);
            }
            // integrate over d = t - s in [0, t]
            let f = |d: f64| d.powf(alpha) * haar_at(n, t - d);
            let dbreaks: Vec<f64> = breaks.iter().map(|&x| t - x).collect();
            Ok(integrate(&f, 0.0, t, &dbreaks, &hints, spec)?.value)
        }
        CoefficientKind::F2 => {
            let half = QuadratureSpec { abs_tol: 0.5 * spec.abs_tol, ..*spec };
            let shifted = |s: f64| (t + s).powf(alpha) * haar_at(n, s);
            let plain = |s: f64| s.powf(alpha) * haar_at(n, s);
            let first = if t == 0.0 {
                integrate(&shifted, 0.0, 1.0, &breaks, &hints, &half)?
            } else {
                integrate(&shifted, 0.0, 1.0, &breaks, &[], &half)?
            };
            let second = integrate(&plain, 0.0, 1.0, &breaks, &hints, &half)?;
            Ok(first.value - second.value)
        }
        CoefficientKind::G => {
            if t == 0.0 {
                return Ok(0.0);
            }
            let f = |x: f64| big_g_unchecked(t, p, x) * antiderivative_at(n, x);
            Ok(integrate(&f, 0.0, 1.0, &breaks, &hints, spec)?.value)
        }
    }
}

/// `(t1^{2H} + t2^{2H} - |t1 - t2|^{2H}) / 2`.
pub fn exact_covariance(t1: f64, t2: f64, h: f64) -> Result<f64> {
    check_unit("t1", t1)?;
    check_unit("t2", t2)?;
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::Domain { what: "H", value: h, domain: "(0, 1)" });
    }
    let e = 2.0 * h;
    Ok(0.5 * (t1.powf(e) + t2.powf(e) - (t1 - t2).abs().powf(e)))
}

/// fBm covariance over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    times: Vec<f64>,
    entries: DMatrix<f64>,
}

impl CovarianceMatrix {
    pub fn new(times: &[f64], h: f64) -> Result<Self> {
        validate_times(times)?;
        let m = times.len();
        let mut entries = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..=i {
                let c = exact_covariance(times[i], times[j], h)?;
                entries[(i, j)] = c;
                entries[(j, i)] = c;
            }
        }
        Ok(CovarianceMatrix { times: times.to_vec(), entries })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.entries.clone().symmetric_eigenvalues().min()
    }
}

/// Exact samples together with the jitter the factorization needed.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyEnsemble {
    pub paths: Vec<PathSample>,
    /// Diagonal jitter added before factorizing; 0 when none was needed.
    pub jitter: f64,
}

/// Exact fBm samples on `times` via the Cholesky factor of the covariance.
///
/// A leading `t = 0` is left out of the matrix and written back as 0. Path
/// `i` uses seed `seed + i`. The returned samples carry `n_trunc = 0` in
/// their config to mark them as exact.
pub fn cholesky_sample(times: &[f64], h: f64, seed: u64, n_paths: usize) -> Result<CholeskyEnsemble> {
    validate_times(times)?;
    if times.len() > MAX_CHOLESKY_TIMES {
        return Err(Error::Precondition(format!(
            "the Cholesky sampler takes at most {MAX_CHOLESKY_TIMES} times, got {}",
            times.len()
        )));
    }
    if n_paths == 0 {
        return Err(Error::Precondition("an ensemble needs at least one path".into()));
    }
    let params = HurstParams::new(h)?;
    let leading_zero = times[0] == 0.0;
    let inner = if leading_zero { &times[1..] } else { times };

    let (factor, jitter) = if inner.is_empty() {
        (DMatrix::zeros(0, 0), 0.0)
    } else {
        let cov = CovarianceMatrix::new(inner, h)?;
        match cov.entries.clone().cholesky() {
            Some(c) => (c.l(), 0.0),
            None => {
                let jittered = &cov.entries + DMatrix::identity(inner.len(), inner.len()) * CHOLESKY_JITTER;
                match jittered.cholesky() {
                    Some(c) => (c.l(), CHOLESKY_JITTER),
                    None => {
                        return Err(Error::NotPositiveDefinite {
                            min_eigenvalue: cov.min_eigenvalue(),
                        })
                    }
                }
            }
        }
    };

    let shared: std::sync::Arc<[f64]> = times.into();
    let m = inner.len();
    let paths = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let path_seed = seed.wrapping_add(i as u64);
            let z = DVector::from_vec(standard_normals(path_seed, STREAM_CHOLESKY, m));
            let x = &factor * z;
            let mut values = Vec::with_capacity(times.len());
            if leading_zero {
                values.push(0.0);
            }
            values.extend(x.iter().copied());
            let config = GeneratorConfig {
                expansion: Expansion::new(params),
                n_trunc: 0,
                seed: path_seed,
                workers: 0,
            };
            PathSample::new(shared.clone(), values, config)
        })
        .collect();
    Ok(CholeskyEnsemble { paths, jitter })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{coeff_f1, coeff_f2, coeff_g};

    fn hp(h: f64) -> HurstParams {
        HurstParams::new(h).unwrap()
    }

    #[test]
    fn integrates_power_singularities() {
        let spec = QuadratureSpec::default();
        let f = |x: f64| x.powf(-0.4);
        let r = integrate(&f, 0.0, 1.0, &[], &[Singularity { at: 0.0, exponent: -0.4 }], &spec).unwrap();
        assert!((r.value - 1.0 / 0.6).abs() < 1e-12, "{:?}", r);
        let f = |x: f64| (1.0 - x).powf(-0.3);
        let r = integrate(&f, 0.0, 1.0, &[0.5], &[Singularity { at: 1.0, exponent: -0.3 }], &spec).unwrap();
        assert!((r.value - 1.0 / 0.7).abs() < 1e-12);
        let r = integrate(&|x: f64| x.sin(), 0.0, 3.0, &[], &[], &spec).unwrap();
        assert!((r.value - (1.0 - 3f64.cos())).abs() < 1e-13);
    }

    #[test]
    fn reports_non_convergence() {
        let spec = QuadratureSpec {
            max_subdivisions: 3,
            use_singular_hints: false,
            ..QuadratureSpec::default()
        };
        let f = |x: f64| x.powf(-0.9);
        assert!(matches!(
            integrate(&f, 0.0, 1.0, &[], &[], &spec),
            Err(Error::NoConvergence { .. })
        ));
    }

    #[test]
    fn documented_examples() {
        let spec = QuadratureSpec::default();
        let q = quad_coefficient(CoefficientKind::F1, 1.0, &hp(0.5), 0, &spec).unwrap();
        assert!((q - 1.0).abs() < 1e-10);
        let q = quad_coefficient(CoefficientKind::F2, 1.0, &hp(0.25), 0, &spec).unwrap();
        assert!((q - (2f64.powf(0.75) - 2.0) / 0.75).abs() < 1e-8);
        let q = quad_coefficient(CoefficientKind::G, 0.0, &hp(0.3), 3, &spec).unwrap();
        assert!(q.abs() < 1e-10);
    }

    #[test]
    fn agrees_with_closed_forms() {
        let spec = QuadratureSpec::default();
        for h in [0.1, 0.35, 0.8] {
            let p = hp(h);
            for t in [0.137, 0.5, 1.0] {
                for n in [0, 1, 2, 5, 17, 100, 255] {
                    let f1 = quad_coefficient(CoefficientKind::F1, t, &p, n, &spec).unwrap();
                    assert!((f1 - coeff_f1(t, &p, n).unwrap()).abs() < 1e-9, "F1 {h} {t} {n}");
                    let f2 = quad_coefficient(CoefficientKind::F2, t, &p, n, &spec).unwrap();
                    assert!((f2 - coeff_f2(t, &p, n).unwrap()).abs() < 1e-9, "F2 {h} {t} {n}");
                    let g = quad_coefficient(CoefficientKind::G, t, &p, n, &spec).unwrap();
                    assert!((g - coeff_g(t, &p, n).unwrap()).abs() < 1e-9, "G {h} {t} {n}");
                }
            }
        }
    }

    #[test]
    fn halving_tolerance_is_stable() {
        let coarse = QuadratureSpec::default();
        let fine = QuadratureSpec { abs_tol: 0.5 * coarse.abs_tol, ..coarse };
        for kind in CoefficientKind::ALL {
            for (t, h, n) in [(0.3, 0.2, 6), (1.0, 0.9, 0), (0.77, 0.6, 41)] {
                let a = quad_coefficient(kind, t, &hp(h), n, &coarse).unwrap();
                let b = quad_coefficient(kind, t, &hp(h), n, &fine).unwrap();
                assert!((a - b).abs() < coarse.abs_tol, "{kind:?} {t} {h} {n}");
            }
        }
    }

    #[test]
    fn covariance_examples() {
        assert_eq!(exact_covariance(1.0, 1.0, 0.3).unwrap(), 1.0);
        assert!((exact_covariance(0.5, 1.0, 0.5).unwrap() - 0.5).abs() < 1e-15);
        let direct = 0.5 * ((1.4 * 0.25f64.ln()).exp() + (1.4 * 0.75f64.ln()).exp() - (1.4 * 0.5f64.ln()).exp());
        assert!((exact_covariance(0.25, 0.75, 0.7).unwrap() - direct).abs() < 1e-15);
        assert!(exact_covariance(1.2, 0.5, 0.5).is_err());
        assert!(exact_covariance(0.2, 0.5, 1.0).is_err());
        let c = CovarianceMatrix::new(&[0.1, 0.4, 0.9], 0.7).unwrap();
        for i in 0..3 {
            assert!((c.get(i, i) - c.times()[i].powf(1.4)).abs() < 1e-15);
        }
        assert!(c.min_eigenvalue() > 0.0);
    }

    #[test]
    fn cholesky_paths() {
        let e = cholesky_sample(&[0.0, 0.5, 1.0], 0.5, 11, 4000).unwrap();
        assert_eq!(e.jitter, 0.0);
        assert!(e.paths.iter().all(|p| p.values()[0] == 0.0));
        let n = e.paths.len() as f64;
        let cov: f64 = e.paths.iter().map(|p| p.values()[1] * p.values()[2]).sum::<f64>() / n;
        let var: f64 = e.paths.iter().map(|p| p.values()[2].powi(2)).sum::<f64>() / n;
        assert!((cov - 0.5).abs() < 0.05, "{cov}");
        assert!((var - 1.0).abs() < 0.1, "{var}");
        let again = cholesky_sample(&[0.0, 0.5, 1.0], 0.5, 11, 2).unwrap();
        assert_eq!(again.paths[1].values(), e.paths[1].values());
        let grid: Vec<f64> = (1..=MAX_CHOLESKY_TIMES + 1).map(|i| i as f64 / 4096.0).collect();
        assert!(cholesky_sample(&grid, 0.5, 0, 1).is_err());
        assert!(cholesky_sample(&[0.5], 0.5, 0, 0).is_err());
    }
}
