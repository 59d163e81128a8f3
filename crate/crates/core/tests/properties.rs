use proptest::prelude::*;

use haarfbm::oracle::{quad_coefficient, CovarianceMatrix};
use haarfbm::{
    cholesky_sample, coeff_f1, coeff_vector, draw_bundle, exact_covariance, extend_bundle, generate_ensemble, generate_path,
    haar_antiderivative, haar_eval, haar_eval_shifted, split_index, CoefficientKind, DriftCoupling, Expansion, GeneratorConfig,
    HurstParams, NoiseBundle, QuadratureSpec, WaveletIndex,
};

fn hp(h: f64) -> HurstParams {
    HurstParams::new(h).unwrap()
}

fn support(n: usize) -> (f64, f64, f64) {
    match split_index(n).interval() {
        None => (0.0, 0.5, 1.0),
        Some(iv) => (iv.a, iv.m, iv.b),
    }
}

fn combine(a: f64, x: &NoiseBundle, b: f64, y: &NoiseBundle) -> NoiseBundle {
    let mix = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(p, q)| a * p + b * q).collect::<Vec<_>>();
    NoiseBundle::from_parts(0, mix(x.l1(), y.l1()), mix(x.l2(), y.l2()), mix(x.l3(), y.l3()), a * x.lstar() + b * y.lstar())
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn haar_support_and_shift(n in 0usize..4096, s in 0.0f64..=1.0) {
        let (a, _, b) = support(n);
        let v = haar_eval(n, s).unwrap();
        if n >= 1 && (s < a || s > b) {
            prop_assert_eq!(v, 0.0);
        }
        prop_assert_eq!(haar_eval_shifted(n, s - 1.0).unwrap(), haar_eval(n, (s - 1.0) + 1.0).unwrap());
    }

    #[test]
    fn tent_slope_matches_wavelet(n in 0usize..1024, x in 0.0f64..1.0) {
        let (a, m, b) = support(n);
        let h = 1e-9;
        let near = [a, m, b].iter().any(|&p| (x - p).abs() < 2.0 * h) || x + h > 1.0;
        prop_assume!(!near);
        let slope = (haar_antiderivative(n, x + h).unwrap() - haar_antiderivative(n, x).unwrap()) / h;
        prop_assert!((slope - haar_eval(n, x).unwrap()).abs() < 1e-5);
        prop_assert_eq!(haar_antiderivative(n, 0.0).unwrap(), 0.0);
        if n >= 1 {
            prop_assert_eq!(haar_antiderivative(n, 1.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn haar_inner_products(m in 0usize..1024, n in 0usize..1024) {
        // every index below 1024 is constant on cells of width 2^-10
        let cells = 1024;
        let w = 1.0 / cells as f64;
        let ip: f64 = (0..cells)
            .map(|c| {
                let s = (c as f64 + 0.5) * w;
                haar_eval(m, s).unwrap() * haar_eval(n, s).unwrap()
            })
            .sum::<f64>() * w;
        let target = if m == n { 1.0 } else { 0.0 };
        prop_assert!((ip - target).abs() < 1e-12);
    }

    #[test]
    fn f1_partial_sums_increase_to_the_limit(h in 0.05f64..0.95, t in 0.01f64..=1.0) {
        let p = hp(h);
        let v = coeff_vector(CoefficientKind::F1, t, &p, 2048).unwrap();
        let limit = t.powf(2.0 * h) / (2.0 * h);
        let mut s = 0.0;
        for c in v.values() {
            let next = s + c * c;
            prop_assert!(next >= s);
            s = next;
        }
        prop_assert!(s <= limit * (1.0 + 1e-12));
    }

    #[test]
    fn f1_vanishes_past_t(h in 0.05f64..0.95, t in 0.0f64..0.99, n in 1usize..100_000) {
        let (a, _, _) = support(n);
        if a >= t {
            prop_assert_eq!(coeff_f1(t, &hp(h), n).unwrap(), 0.0);
        }
    }

    #[test]
    fn expansion_is_linear_in_noise(h in 0.05f64..0.95, t in 0.0f64..=1.0, a in -3.0f64..3.0, b in -3.0f64..3.0, s1 in any::<u64>(), s2 in any::<u64>()) {
        let x = draw_bundle(s1, 127);
        let y = draw_bundle(s2, 127);
        let z = combine(a, &x, b, &y);
        for e in [Expansion::new(hp(h)), Expansion::literal(hp(h))] {
            let lhs = e.eval_w(t, 127, &z).unwrap();
            let rhs = a * e.eval_w(t, 127, &x).unwrap() + b * e.eval_w(t, 127, &y).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs() + rhs.abs()) * 10.0, "{} vs {}", lhs, rhs);
        }
    }

    #[test]
    fn truncation_nesting_is_the_tail_sum(h in 0.05f64..0.95, t in 0.0f64..=1.0, n1 in 2usize..200, extra in 1usize..300, seed in any::<u64>()) {
        let n2 = n1 + extra;
        let p = hp(h);
        let e = Expansion::new(p);
        let b = extend_bundle(&draw_bundle(seed, n1), n2).unwrap();
        let diff = e.eval_w(t, n2, &b).unwrap() - e.eval_w(t, n1, &b).unwrap();
        let c = e.prefactor();
        let mut tail = 0.0;
        for n in n1 + 1..=n2 {
            tail += coeff_f1(t, &p, n).unwrap() * b.l1()[n];
            if !p.is_half {
                tail += haarfbm::coeff_f2(t, &p, n).unwrap() * b.l2()[n];
                tail -= p.hmh * haarfbm::coeff_g(t, &p, n).unwrap() * b.l3()[n];
            }
        }
        prop_assert!((diff - c * tail).abs() < 1e-12, "{} vs {}", diff, c * tail);
    }

    #[test]
    fn order_invariance(h in 0.05f64..0.95, seed in any::<u64>(), shuffle in any::<u64>()) {
        let times: Vec<f64> = (0..40).map(|i| i as f64 / 39.0).collect();
        let cfg = GeneratorConfig::new(hp(h), 255, seed);
        let path = generate_path(&times, &cfg).unwrap();
        prop_assert_eq!(path.values()[0], 0.0);
        let e = cfg.expansion;
        let b = draw_bundle(seed, 255);
        let mut order: Vec<usize> = (0..times.len()).collect();
        order.sort_by_key(|&i| (i as u64).wrapping_mul(shuffle | 1).rotate_left(17));
        for &i in &order {
            prop_assert_eq!(e.eval_w(times[i], 255, &b).unwrap().to_bits(), path.values()[i].to_bits());
        }
    }

    #[test]
    fn covariance_symmetry(t1 in 0.0f64..=1.0, t2 in 0.0f64..=1.0, h in 0.01f64..0.99) {
        prop_assert_eq!(exact_covariance(t1, t2, h).unwrap(), exact_covariance(t2, t1, h).unwrap());
        prop_assert!((exact_covariance(t1, t1, h).unwrap() - t1.powf(2.0 * h)).abs() < 1e-15);
    }

    #[test]
    fn bundle_nesting(seed in any::<u64>(), n in 0usize..300, extra in 1usize..300) {
        let b = draw_bundle(seed, n);
        let grown = extend_bundle(&b, n + extra).unwrap();
        prop_assert_eq!(&grown.truncated(n).unwrap(), &b);
        prop_assert_eq!(&grown, &draw_bundle(seed, n + extra));
        prop_assert_eq!(grown.len(), 3 * (n + extra) + 4);
    }
}

#[test]
fn independent_recomputation_of_w() {
    let p = hp(0.7);
    let b = draw_bundle(17, 511);
    let e = Expansion::literal(p);
    let t = 0.5;
    let dot = |kind, noise: &[f64]| -> f64 {
        let v = coeff_vector(kind, t, &p, 511).unwrap();
        v.values().iter().zip(noise).map(|(c, l)| c * l).sum()
    };
    let w1 = p.c_h * dot(CoefficientKind::F1, b.l1());
    let w2 = p.c_h * dot(CoefficientKind::F2, b.l2());
    let w3 = p.c_h * (1.5f64.powf(0.2) - 1.0) * b.lstar() - p.c_h * 0.2 * dot(CoefficientKind::G, b.l3());
    assert!((e.eval_w(t, 511, &b).unwrap() - (w1 + w2 + w3)).abs() < 1e-12);
}

#[test]
fn continuity_across_one_half() {
    let b = draw_bundle(4, 255);
    let at_half = Expansion::new(hp(0.5));
    for delta in [1e-6, 1e-8, 1e-10, -1e-6, -1e-8] {
        let near = Expansion::new(hp(0.5 + delta));
        for t in [0.137, 0.5, 1.0] {
            let a = at_half.eval_w(t, 255, &b).unwrap();
            let c = near.eval_w(t, 255, &b).unwrap();
            assert!((a - c).abs() < 1e-4, "delta {delta}, t {t}: {a} vs {c}");
        }
    }
}

#[test]
fn f1_level_energy_shape() {
    // Σ over level j of F1² is at most c·2^{-2jH}.
    for h in [0.2, 0.5, 0.8] {
        let p = hp(h);
        for t in [0.3, 1.0] {
            let scaled: Vec<f64> = (3..14)
                .map(|j| {
                    let lo = 1usize << j;
                    let e: f64 = (lo..2 * lo).map(|n| coeff_f1(t, &p, n).unwrap().powi(2)).sum();
                    e * 2f64.powf(2.0 * j as f64 * h)
                })
                .collect();
            // c fitted on the first four levels bounds every deeper one
            let c = scaled[..4].iter().cloned().fold(0.0, f64::max);
            assert!(scaled.iter().all(|&e| e <= 1.1 * c), "H={h} t={t}: {scaled:?}");
        }
    }
}

#[test]
fn g_vector_matches_quadrature() {
    let p = hp(0.7);
    let v = coeff_vector(CoefficientKind::G, 0.5, &p, 63).unwrap();
    let spec = QuadratureSpec::default();
    for (n, c) in v.values().iter().enumerate() {
        let q = quad_coefficient(CoefficientKind::G, 0.5, &p, n, &spec).unwrap();
        assert!((c - q).abs() < 1e-8, "n={n}");
    }
}

#[test]
fn ensemble_examples() {
    let times = [0.0, 0.3, 0.8, 1.0];
    let cfg = GeneratorConfig::new(hp(0.4), 127, 55);
    let one = generate_ensemble(&times, &cfg, 1, 1).unwrap();
    assert_eq!(one[0], generate_path(&times, &cfg).unwrap());
    let same = generate_ensemble(&times, &cfg, 2, 0).unwrap();
    assert_eq!(same[0].values(), same[1].values());
    let spread = generate_ensemble(&times, &cfg, 3, 7).unwrap();
    assert_eq!(spread[2].config.seed, 55 + 14);
    assert_eq!(spread[2], generate_path(&times, &GeneratorConfig::new(hp(0.4), 127, 69)).unwrap());
}

#[test]
fn brownian_variance_at_one() {
    let times: Vec<f64> = (0..1024).map(|i| i as f64 / 1023.0).collect();
    let cfg = GeneratorConfig::new(hp(0.5), 1023, 1);
    let paths = generate_ensemble(&times, &cfg, 10_000, 1).unwrap();
    let var = paths.iter().map(|p| p.values()[1023].powi(2)).sum::<f64>() / paths.len() as f64;
    assert!((0.94..=1.06).contains(&var), "{var}");
    assert!(paths.iter().all(|p| p.values()[0] == 0.0));
}

#[test]
fn extended_bundles_shrink_the_sup_error() {
    let p = hp(0.3);
    let e = Expansion::new(p);
    let grid: Vec<f64> = (0..=128).map(|i| i as f64 / 128.0).collect();
    let rungs = [7usize, 63, 511];
    let mut per_rung = vec![Vec::new(); rungs.len()];
    for seed in 0..32 {
        let b = extend_bundle(&draw_bundle(seed, 7), 1023).unwrap();
        let top: Vec<f64> = grid.iter().map(|&t| e.eval_w(t, 1023, &b).unwrap()).collect();
        for (r, &n) in rungs.iter().enumerate() {
            let sup = grid.iter().zip(&top).map(|(&t, w)| (e.eval_w(t, n, &b).unwrap() - w).abs()).fold(0.0, f64::max);
            per_rung[r].push(sup);
        }
    }
    let medians: Vec<f64> = per_rung
        .iter_mut()
        .map(|v| {
            v.sort_by(f64::total_cmp);
            0.5 * (v[15] + v[16])
        })
        .collect();
    assert!(medians.windows(2).all(|w| w[1] < w[0]), "{medians:?}");
}

#[test]
fn cholesky_marginals_within_three_standard_errors() {
    let times = [0.1, 0.35, 0.6, 1.0];
    for h in [0.2, 0.8] {
        let n = 8000;
        let e = cholesky_sample(&times, h, 3, n).unwrap();
        for (i, &t) in times.iter().enumerate() {
            let var = e.paths.iter().map(|p| p.values()[i].powi(2)).sum::<f64>() / n as f64;
            let exact = t.powf(2.0 * h);
            let se = exact * (2.0 / n as f64).sqrt();
            assert!((var - exact).abs() < 3.0 * se, "H={h} t={t}: {var} vs {exact}");
        }
    }
    let c = CovarianceMatrix::new(&times, 0.5).unwrap();
    assert!(c.min_eigenvalue() > 1e-10);
}

#[test]
fn drift_modes_differ_only_by_the_drift_variate() {
    let p = hp(0.8);
    let b = draw_bundle(2, 63);
    let coupled = Expansion::new(p);
    let verbatim = coupled.with_drift(DriftCoupling::Independent);
    let t = 0.9;
    let diff = verbatim.eval_w3(t, 63, &b).unwrap() - coupled.eval_w3(t, 63, &b).unwrap();
    let c = coupled.prefactor();
    let g0 = haarfbm::coeff_g(t, &p, 0).unwrap();
    let expected = c * coupled.drift_factor(t) * b.lstar() - c * p.hmh * g0 * b.l3()[0];
    assert!((diff - expected).abs() < 1e-12);
    assert!(matches!(split_index(0), WaveletIndex::Scaling));
}
