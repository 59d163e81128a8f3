//! The truncated expansion `W(t, H, N) = W1 + W2 + W3` and the parallel path
//! generator built on it.
//!
//! ```text
//! W1 = c Σ_{n≤N} <f_t^(1), H_n> L1_n
//! W2 = c Σ_{n≤N} <f_t^(2), H̃_n> L2_n
//! W3 = c ((t+1)^{H-1/2} - 1) L* - c (H - 1/2) Σ_{n≤N} g_n(t, H) L3_n
//! ```
//!
//! The kernel constant `c` is chosen by [`Normalization`], and the treatment of
//! `L*` by [`DriftCoupling`]. Every time instant reads only the immutable
//! bundle and closed-form coefficients, so values never depend on how the
//! instants are scheduled across workers.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::coefficients::{coefficient_at, CoefficientKind, HurstParams};
use crate::error::{check_unit, Error, Result};
use crate::haar::{checked_interval, split_index};
use crate::noise::{draw_bundle, NoiseBundle};
use crate::summation::CompensatedSum;

/// Overall constant in front of the three series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Normalization {
    /// `c = sqrt(Γ(2H+1) sin πH) / Γ(H+1/2)`, so that `Var B_1 = 1`.
    #[default]
    UnitVariance,
    /// `c = 1 / Γ(H+1/2)`. `Var B_1 = 1 / (Γ(2H+1) sin πH)`, which is 1 only at `H = 1/2`.
    MandelbrotVanNess,
}

impl Normalization {
    pub fn name(&self) -> &'static str {
        match self {
            Normalization::UnitVariance => "unit-variance",
            Normalization::MandelbrotVanNess => "mandelbrot-van-ness",
        }
    }
}

/// How the drift variate `L*` relates to the `g`-series.
///
/// Under time inversion `L* = -L3_0`, and the drift term cancels the `n = 0`
/// term of the `g`-series exactly. Drawing `L*` independently instead counts
/// that component twice and inflates `Var W3` by `c² ((t+1)^{H-1/2} - 1)²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum DriftCoupling {
    /// `L* := -L3_0`; only `n >= 1` of the `g`-series survives. `lstar` is unused.
    #[default]
    Coupled,
    /// `L*` is the bundle's independent `lstar` and the `g`-series starts at `n = 0`.
    Independent,
}

impl DriftCoupling {
    pub fn name(&self) -> &'static str {
        match self {
            DriftCoupling::Coupled => "coupled",
            DriftCoupling::Independent => "independent",
        }
    }
}

/// Truncated expansion for one Hurst index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Expansion {
    pub params: HurstParams,
    pub normalization: Normalization,
    pub drift: DriftCoupling,
}

/// The three components at one time instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Components {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
}

impl Components {
    pub fn total(&self) -> f64 {
        self.w1 + self.w2 + self.w3
    }
}

/// Nonzero coefficients of one family in ascending `n`.
#[derive(Debug, Clone, Default, PartialEq)]
struct SparseSeries {
    index: Vec<u32>,
    value: Vec<f64>,
}

impl SparseSeries {
    fn build(kind: CoefficientKind, t: f64, p: &HurstParams, n_max: usize) -> Self {
        let mut s = SparseSeries::default();
        for_each_nonzero(kind, t, p, 0, n_max, |n, c| {
            s.index.push(n as u32);
            s.value.push(c);
        });
        s
    }

    /// `dot(noise, from, r)` for every `r` of the ascending `rungs`, in one pass.
    fn dot_rungs(&self, noise: &[f64], from: usize, rungs: &[usize]) -> Vec<f64> {
        let mut out = Vec::with_capacity(rungs.len());
        let mut acc = CompensatedSum::new();
        let mut r = 0;
        for (&n, &c) in self.index.iter().zip(&self.value) {
            let n = n as usize;
            if n < from {
                continue;
            }
            while r < rungs.len() && n > rungs[r] {
                out.push(acc.value());
                r += 1;
            }
            if r == rungs.len() {
                break;
            }
            acc.add(c * noise[n]);
        }
        while out.len() < rungs.len() {
            out.push(acc.value());
        }
        out
    }

    /// Compensated `Σ c_n L_n` over `from <= n <= to`.
    fn dot(&self, noise: &[f64], from: usize, to: usize) -> f64 {
        let mut acc = CompensatedSum::new();
        for (&n, &c) in self.index.iter().zip(&self.value) {
            let n = n as usize;
            if n < from {
                continue;
            }
            if n > to {
                break;
            }
            acc.add(c * noise[n]);
        }
        acc.value()
    }
}

/// Calls `f(n, c_n)` for every nonzero coefficient with `from <= n <= to`, in ascending `n`.
fn for_each_nonzero(kind: CoefficientKind, t: f64, p: &HurstParams, from: usize, to: usize, mut f: impl FnMut(usize, f64)) {
    if t == 0.0 || (p.is_half && kind != CoefficientKind::F1) {
        return;
    }
    let mut n = from;
    while n <= to {
        // Whole levels of F1 vanish past t: jump to the next level.
        if kind == CoefficientKind::F1 {
            if let Some(iv) = split_index(n).interval() {
                if iv.a >= t {
                    n = 1usize << (iv.level + 1);
                    continue;
                }
            }
        }
        let c = coefficient_at(kind, t, p, n);
        if c != 0.0 {
            f(n, c);
        }
        n += 1;
    }
}

fn fused_dot(kind: CoefficientKind, t: f64, p: &HurstParams, noise: &[f64], from: usize, to: usize) -> f64 {
    let mut acc = CompensatedSum::new();
    for_each_nonzero(kind, t, p, from, to, |n, c| acc.add(c * noise[n]));
    acc.value()
}

impl Expansion {
    /// Unit-variance normalization with the coupled drift.
    pub fn new(params: HurstParams) -> Self {
        Expansion {
            params,
            normalization: Normalization::UnitVariance,
            drift: DriftCoupling::Coupled,
        }
    }

    /// The recipe with `c = 1/Γ(H+1/2)` and an independent `L*`.
    pub fn literal(params: HurstParams) -> Self {
        Expansion {
            params,
            normalization: Normalization::MandelbrotVanNess,
            drift: DriftCoupling::Independent,
        }
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    pub fn with_drift(mut self, drift: DriftCoupling) -> Self {
        self.drift = drift;
        self
    }

    pub fn prefactor(&self) -> f64 {
        match self.normalization {
            Normalization::UnitVariance => self.params.c_h * self.params.unit_scale,
            Normalization::MandelbrotVanNess => self.params.c_h,
        }
    }

    /// `(t+1)^{H-1/2} - 1`.
    pub fn drift_factor(&self, t: f64) -> f64 {
        libm::expm1(self.params.hmh * libm::log1p(t))
    }

    fn g_start(&self) -> usize {
        match self.drift {
            DriftCoupling::Coupled => 1,
            DriftCoupling::Independent => 0,
        }
    }

    fn check(&self, t: f64, n: usize, b: &NoiseBundle) -> Result<()> {
        check_unit("t", t)?;
        checked_interval(n)?;
        if b.truncation() < n {
            return Err(Error::Precondition(format!(
                "bundle truncation {} is below the requested N = {n}",
                b.truncation()
            )));
        }
        Ok(())
    }

    pub fn eval_w1(&self, t: f64, n: usize, b: &NoiseBundle) -> Result<f64> {
        self.check(t, n, b)?;
        Ok(self.w1_unchecked(t, n, b))
    }

    pub fn eval_w2(&self, t: f64, n: usize, b: &NoiseBundle) -> Result<f64> {
        self.check(t, n, b)?;
        Ok(self.w2_unchecked(t, n, b))
    }

    pub fn eval_w3(&self, t: f64, n: usize, b: &NoiseBundle) -> Result<f64> {
        self.check(t, n, b)?;
        Ok(self.w3_unchecked(t, n, b))
    }

    pub fn eval_components(&self, t: f64, n: usize, b: &NoiseBundle) -> Result<Components> {
        self.check(t, n, b)?;
        Ok(Components {
            w1: self.w1_unchecked(t, n, b),
            w2: self.w2_unchecked(t, n, b),
            w3: self.w3_unchecked(t, n, b),
        })
    }

    /// `W(t, H, N)`.
    pub fn eval_w(&self, t: f64, n: usize, b: &NoiseBundle) -> Result<f64> {
        Ok(self.eval_components(t, n, b)?.total())
    }

    fn w1_unchecked(&self, t: f64, n: usize, b: &NoiseBundle) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        self.prefactor() * fused_dot(CoefficientKind::F1, t, &self.params, b.l1(), 0, n)
    }

    fn w2_unchecked(&self, t: f64, n: usize, b: &NoiseBundle) -> f64 {
        if t == 0.0 || self.params.is_half {
            return 0.0;
        }
        self.prefactor() * fused_dot(CoefficientKind::F2, t, &self.params, b.l2(), 0, n)
    }

    fn w3_unchecked(&self, t: f64, n: usize, b: &NoiseBundle) -> f64 {
        if t == 0.0 || self.params.is_half {
            return 0.0;
        }
        let series = fused_dot(CoefficientKind::G, t, &self.params, b.l3(), self.g_start(), n);
        self.assemble_w3(t, series, b)
    }

    fn assemble_w3(&self, t: f64, series: f64, b: &NoiseBundle) -> f64 {
        let c = self.prefactor();
        let tail = c * self.params.hmh * series;
        match self.drift {
            DriftCoupling::Coupled => -tail,
            DriftCoupling::Independent => c * self.drift_factor(t) * b.lstar() - tail,
        }
    }
}

/// Coefficients for a fixed time grid, computed once and reused across bundles.
#[derive(Debug, Clone)]
pub struct CoefficientTable {
    expansion: Expansion,
    times: Arc<[f64]>,
    n_max: usize,
    rows: Vec<[SparseSeries; 3]>,
}

impl CoefficientTable {
    pub fn new(expansion: Expansion, times: &[f64], n_max: usize) -> Result<Self> {
        validate_times(times)?;
        checked_interval(n_max)?;
        let p = expansion.params;
        let rows = times
            .par_iter()
            .map(|&t| {
                [
                    SparseSeries::build(CoefficientKind::F1, t, &p, n_max),
                    SparseSeries::build(CoefficientKind::F2, t, &p, n_max),
                    SparseSeries::build(CoefficientKind::G, t, &p, n_max),
                ]
            })
            .collect();
        Ok(CoefficientTable {
            expansion,
            times: times.into(),
            n_max,
            rows,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn truncation(&self) -> usize {
        self.n_max
    }

    pub fn expansion(&self) -> &Expansion {
        &self.expansion
    }

    /// Number of stored nonzero coefficients.
    pub fn nonzeros(&self) -> usize {
        self.rows.iter().map(|r| r.iter().map(|s| s.index.len()).sum::<usize>()).sum()
    }

    fn components_at(&self, i: usize, n: usize, b: &NoiseBundle) -> Components {
        let t = self.times[i];
        let e = &self.expansion;
        if t == 0.0 {
            return Components { w1: 0.0, w2: 0.0, w3: 0.0 };
        }
        let [f1, f2, g] = &self.rows[i];
        let c = e.prefactor();
        let w1 = c * f1.dot(b.l1(), 0, n);
        let (w2, w3) = if e.params.is_half {
            (0.0, 0.0)
        } else {
            let w2 = c * f2.dot(b.l2(), 0, n);
            (w2, e.assemble_w3(t, g.dot(b.l3(), e.g_start(), n), b))
        };
        Components { w1, w2, w3 }
    }

    /// `W(t_i, H, n)` at every grid time, for any `n <= N` of the table.
    pub fn eval(&self, b: &NoiseBundle, n: usize) -> Result<Vec<f64>> {
        if n > self.n_max || b.truncation() < n {
            return Err(Error::Precondition(format!(
                "truncation {n} needs table N {} and bundle N {} to be at least as large",
                self.n_max,
                b.truncation()
            )));
        }
        Ok((0..self.times.len()).map(|i| self.components_at(i, n, b).total()).collect())
    }

    /// `W` at every grid time for each of the ascending truncations `rungs`,
    /// with one pass per family. Row `r` equals `eval(b, rungs[r])` bit for bit.
    pub fn eval_rungs(&self, b: &NoiseBundle, rungs: &[usize]) -> Result<Vec<Vec<f64>>> {
        if rungs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Precondition("rungs must be strictly increasing".into()));
        }
        let top = rungs.last().copied().unwrap_or(0);
        if top > self.n_max || b.truncation() < top {
            return Err(Error::Precondition(format!(
                "truncation {top} needs table N {} and bundle N {} to be at least as large",
                self.n_max,
                b.truncation()
            )));
        }
        let e = &self.expansion;
        let c = e.prefactor();
        let mut out = vec![vec![0.0; self.times.len()]; rungs.len()];
        for (i, &t) in self.times.iter().enumerate() {
            if t == 0.0 {
                continue;
            }
            let [f1, f2, g] = &self.rows[i];
            let w1 = f1.dot_rungs(b.l1(), 0, rungs);
            let (w2, w3) = if e.params.is_half {
                (vec![0.0; rungs.len()], vec![0.0; rungs.len()])
            } else {
                let w3 = g.dot_rungs(b.l3(), e.g_start(), rungs).into_iter().map(|s| e.assemble_w3(t, s, b)).collect();
                (f2.dot_rungs(b.l2(), 0, rungs), w3)
            };
            for r in 0..rungs.len() {
                out[r][i] = c * w1[r] + c * w2[r] + w3[r];
            }
        }
        Ok(out)
    }
}

/// Generator settings for one path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneratorConfig {
    pub expansion: Expansion,
    pub n_trunc: usize,
    pub seed: u64,
    /// Worker threads; 0 uses the global pool.
    pub workers: usize,
}

impl GeneratorConfig {
    pub fn new(params: HurstParams, n_trunc: usize, seed: u64) -> Self {
        GeneratorConfig {
            expansion: Expansion::new(params),
            n_trunc,
            seed,
            workers: 0,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_expansion(mut self, expansion: Expansion) -> Self {
        self.expansion = expansion;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trunc < 1 {
            return Err(Error::Precondition("truncation N must be at least 1".into()));
        }
        checked_interval(self.n_trunc)?;
        Ok(())
    }
}

/// One realization evaluated at a set of times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSample {
    times: Arc<[f64]>,
    values: Vec<f64>,
    pub config: GeneratorConfig,
}

impl PathSample {
    pub fn new(times: Arc<[f64]>, values: Vec<f64>, config: GeneratorConfig) -> Self {
        debug_assert_eq!(times.len(), values.len());
        PathSample { times, values, config }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `# key: value` metadata, a `t,value` header, then one row per instant in
    /// shortest round-trip decimal. The worker count is left out so that files
    /// do not depend on scheduling.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let e = &self.config.expansion;
        writeln!(w, "# library: haarfbm {}", env!("CARGO_PKG_VERSION"))?;
        writeln!(w, "# hurst: {}", e.params.h)?;
        writeln!(w, "# levels: {}", self.config.n_trunc)?;
        writeln!(w, "# seed: {}", self.config.seed)?;
        writeln!(w, "# normalization: {}", e.normalization.name())?;
        writeln!(w, "# drift: {}", e.drift.name())?;
        writeln!(w, "t,value")?;
        for (t, v) in self.times.iter().zip(&self.values) {
            writeln!(w, "{t},{v}")?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Nonempty, strictly increasing, inside `[0, 1]`.
pub fn validate_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::Precondition("time grid is empty".into()));
    }
    for &t in times {
        check_unit("t", t)?;
    }
    if let Some(w) = times.windows(2).find(|w| !(w[0] < w[1])) {
        return Err(Error::Precondition(format!(
            "times must be strictly increasing, found {} then {}",
            w[0], w[1]
        )));
    }
    Ok(())
}

fn with_workers<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(job());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Precondition(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(job))
}

/// Evaluates one realization at `times`, spreading the instants over `cfg.workers` threads.
pub fn generate_path(times: &[f64], cfg: &GeneratorConfig) -> Result<PathSample> {
    validate_times(times)?;
    cfg.validate()?;
    let bundle = draw_bundle(cfg.seed, cfg.n_trunc);
    let e = cfg.expansion;
    let values = with_workers(cfg.workers, || {
        times
            .par_iter()
            .map(|&t| e.eval_components(t, cfg.n_trunc, &bundle).map(|c| c.total()))
            .collect::<Result<Vec<f64>>>()
    })??;
    Ok(PathSample::new(times.into(), values, *cfg))
}

/// `n_paths` independent realizations with seeds `seed, seed + stride, ...`.
pub fn generate_ensemble(times: &[f64], cfg: &GeneratorConfig, n_paths: usize, seed_stride: u64) -> Result<Vec<PathSample>> {
    if n_paths == 0 {
        return Err(Error::Precondition("an ensemble needs at least one path".into()));
    }
    cfg.validate()?;
    let job = || -> Result<Vec<PathSample>> {
        let table = CoefficientTable::new(cfg.expansion, times, cfg.n_trunc)?;
        let shared = table.times.clone();
        (0..n_paths)
            .into_par_iter()
            .map(|i| {
                let seed = cfg.seed.wrapping_add(seed_stride.wrapping_mul(i as u64));
                let bundle = draw_bundle(seed, cfg.n_trunc);
                let values = table.eval(&bundle, cfg.n_trunc)?;
                Ok(PathSample::new(shared.clone(), values, GeneratorConfig { seed, ..*cfg }))
            })
            .collect()
    };
    with_workers(cfg.workers, job)?
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{coeff_f2, coeff_g, coeff_vector};

    fn hp(h: f64) -> HurstParams {
        HurstParams::new(h).unwrap()
    }

    #[test]
    fn time_zero_is_pinned() {
        let b = draw_bundle(3, 63);
        for h in [0.2, 0.5, 0.8] {
            for e in [Expansion::new(hp(h)), Expansion::literal(hp(h))] {
                assert_eq!(e.eval_w1(0.0, 63, &b).unwrap(), 0.0);
                assert_eq!(e.eval_w2(0.0, 63, &b).unwrap(), 0.0);
                assert_eq!(e.eval_w3(0.0, 63, &b).unwrap(), 0.0);
                assert_eq!(e.eval_w(0.0, 63, &b).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn brownian_reduces_to_first_series() {
        let b = draw_bundle(8, 31);
        let e = Expansion::new(hp(0.5));
        assert_eq!(e.eval_w1(1.0, 31, &b).unwrap(), b.l1()[0]);
        for &t in &[0.1, 0.5, 0.93] {
            assert_eq!(e.eval_w2(t, 31, &b).unwrap(), 0.0);
            assert_eq!(e.eval_w3(t, 31, &b).unwrap(), 0.0);
            assert_eq!(e.eval_w(t, 31, &b).unwrap(), e.eval_w1(t, 31, &b).unwrap());
        }
    }

    #[test]
    fn verbatim_single_term_examples() {
        let b = draw_bundle(1, 4);
        let p = hp(0.25);
        let e = Expansion::literal(p);
        let expected = p.c_h * coeff_f2(1.0, &p, 0).unwrap() * b.l2()[0];
        assert!((e.eval_w2(1.0, 0, &b).unwrap() - expected).abs() < 1e-15);

        let q = hp(0.75);
        let e = Expansion::literal(q);
        let g0 = coeff_g(1.0, &q, 0).unwrap();
        let expected = q.c_h * (2f64.powf(0.25) - 1.0) * b.lstar() - q.c_h * 0.25 * g0 * b.l3()[0];
        assert!((e.eval_w3(1.0, 0, &b).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn coupled_drift_equals_verbatim_with_tied_lstar() {
        let base = draw_bundle(77, 127);
        let tied = NoiseBundle::from_parts(77, base.l1().to_vec(), base.l2().to_vec(), base.l3().to_vec(), -base.l3()[0]).unwrap();
        for h in [0.2, 0.8] {
            let coupled = Expansion::new(hp(h));
            let verbatim = coupled.with_drift(DriftCoupling::Independent);
            for &t in &[0.3, 1.0] {
                let a = coupled.eval_w3(t, 127, &base).unwrap();
                let b = verbatim.eval_w3(t, 127, &tied).unwrap();
                assert!((a - b).abs() < 1e-12, "{h} {t}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn w1_matches_plain_dot_product() {
        let p = hp(0.3);
        let b = draw_bundle(7, 255);
        let e = Expansion::literal(p);
        let v = coeff_vector(CoefficientKind::F1, 0.5, &p, 255).unwrap();
        let plain: f64 = v.values().iter().zip(b.l1()).map(|(c, l)| c * l).sum();
        assert!((e.eval_w1(0.5, 255, &b).unwrap() - p.c_h * plain).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let b = draw_bundle(0, 7);
        let e = Expansion::new(hp(0.3));
        assert!(e.eval_w(1.5, 7, &b).is_err());
        assert!(e.eval_w(0.5, 8, &b).is_err());
        assert!(validate_times(&[]).is_err());
        assert!(validate_times(&[0.2, 0.2]).is_err());
        assert!(validate_times(&[0.3, 0.1]).is_err());
        assert!(validate_times(&[0.0, 1.2]).is_err());
        let cfg = GeneratorConfig::new(hp(0.3), 0, 1);
        assert!(generate_path(&[0.5], &cfg).is_err());
        assert!(generate_ensemble(&[0.5], &GeneratorConfig::new(hp(0.3), 3, 1), 0, 1).is_err());
    }

    #[test]
    fn table_matches_fused() {
        let times: Vec<f64> = (0..=16).map(|i| i as f64 / 16.0).chain([0.137, 0.999]).collect::<Vec<_>>();
        let mut times = times;
        times.sort_by(f64::total_cmp);
        for h in [0.15, 0.5, 0.85] {
            for e in [Expansion::new(hp(h)), Expansion::literal(hp(h))] {
                let table = CoefficientTable::new(e, &times, 200).unwrap();
                let b = draw_bundle(5, 200);
                for n in [1, 57, 200] {
                    let cached = table.eval(&b, n).unwrap();
                    for (i, &t) in times.iter().enumerate() {
                        assert_eq!(cached[i].to_bits(), e.eval_w(t, n, &b).unwrap().to_bits());
                    }
                }
            }
        }
    }

    #[test]
    fn rungs_match_single_truncations() {
        let times = [0.0, 0.137, 0.5, 0.61, 1.0];
        for h in [0.3, 0.5, 0.7] {
            let table = CoefficientTable::new(Expansion::new(hp(h)), &times, 256).unwrap();
            let b = draw_bundle(21, 256);
            let rungs = [16, 32, 64, 128, 256];
            let all = table.eval_rungs(&b, &rungs).unwrap();
            for (r, &n) in rungs.iter().enumerate() {
                let one = table.eval(&b, n).unwrap();
                assert_eq!(all[r].iter().map(|x| x.to_bits()).collect::<Vec<_>>(), one.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn brownian_table_is_sparse() {
        let times = [0.137, 0.5, 0.9];
        let t = CoefficientTable::new(Expansion::new(hp(0.5)), &times, 1023).unwrap();
        // n = 0 plus at most one wavelet per level
        assert!(t.nonzeros() <= 3 * 11);
    }
}
