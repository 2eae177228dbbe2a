use std::f64::consts::PI;

use affine_regime::criteria::{
    classify_with, decide_i, decide_s_prime, partial_sum_s_prime, term_s, term_s_prime, ClassifyOptions, Finiteness,
};
use affine_regime::linalg::{expm, solve_lyapunov};
use affine_regime::model::{DiffusionSpec, DriftSpec, Envelope, Matrix, MatrixNorm};
use affine_regime::simulate::{simulate, SimConfig};
use affine_regime::stats::{avg_sq, median, tail_sup, trend, window_inf, Trend};
use approx::assert_relative_eq;
use proptest::prelude::*;

fn matrix(d: usize, scale: f64) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-scale..scale, d * d).prop_map(move |v| Matrix::from_row_slice(d, d, &v))
}

fn stable_matrix() -> impl Strategy<Value = Matrix> {
    (1usize..=5).prop_flat_map(|d| (matrix(d, 1.0), matrix(d, 1.0))).prop_map(|(s, k)| {
        let d = s.nrows();
        -(&s * s.transpose() + Matrix::identity(d, d) * 0.2) + (&k - k.transpose())
    })
}

fn envelope() -> impl Strategy<Value = Envelope> {
    prop_oneof![
        (0.2f64..3.0, -1.5f64..1.0).prop_map(|(scale, exponent)| Envelope::PowerLaw { scale, exponent }),
        (0.1f64..3.0).prop_map(|gamma| Envelope::LogPower { gamma }),
        (0.2f64..3.0, 0.1f64..2.0).prop_map(|(scale, rate)| Envelope::ExpDecay { scale, rate }),
        (0.2f64..3.0, -0.45f64..1.0).prop_map(|(scale, exponent)| Envelope::LogGrow { scale, exponent }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mills_sandwich(eps in 0.01f64..20.0, theta in 0.01f64..10.0) {
        let t = theta * theta;
        let x = eps / theta;
        let upper = term_s_prime(eps, t) / (eps * (2.0 * PI).sqrt());
        let lower = upper * x * x / (1.0 + x * x);
        let s = term_s(eps, t);
        prop_assert!(s <= upper * (1.0 + 1e-12) + 1e-300);
        prop_assert!(s >= lower * (1.0 - 1e-12));
    }

    #[test]
    fn partial_sums_decrease_in_eps(env in envelope(), e1 in 0.1f64..4.0, f in 1.01f64..3.0) {
        let spec = DiffusionSpec::envelope(env, Matrix::identity(2, 2)).unwrap();
        let a = partial_sum_s_prime(&spec, e1, 1.0, 200, 1e-10).unwrap().value;
        let b = partial_sum_s_prime(&spec, e1 * f, 1.0, 200, 1e-10).unwrap().value;
        prop_assert!(b <= a * (1.0 + 1e-12));
    }

    #[test]
    fn rulings_monotone_in_eps(env in envelope(), e1 in 0.05f64..8.0, f in 1.01f64..3.0) {
        let spec = DiffusionSpec::envelope(env, Matrix::identity(1, 1)).unwrap();
        let lo = decide_s_prime(&spec, e1, 1.0).unwrap().status;
        let hi = decide_s_prime(&spec, e1 * f, 1.0).unwrap().status;
        if lo == Finiteness::Finite {
            prop_assert_eq!(hi, Finiteness::Finite);
        }
        if hi == Finiteness::Infinite {
            prop_assert_eq!(lo, Finiteness::Infinite);
        }
    }

    #[test]
    fn series_and_integral_agree(env in envelope(), eps in 0.05f64..8.0) {
        let spec = DiffusionSpec::envelope(env, Matrix::identity(2, 2)).unwrap();
        let s = decide_s_prime(&spec, eps, 1.0).unwrap();
        let i = decide_i(&spec, eps, 1.0).unwrap();
        prop_assert_eq!(s.status, i.status, "eps {}: {:?} vs {:?}", eps, s, i);
    }

    #[test]
    fn classification_independent_of_h(env in envelope(), h in 0.25f64..4.0) {
        let spec = DiffusionSpec::envelope(env, Matrix::identity(2, 2)).unwrap();
        let drift = DriftSpec::constant(-Matrix::identity(2, 2)).unwrap();
        let base = classify_with(&spec, &drift, &ClassifyOptions::default()).unwrap();
        let other = classify_with(&spec, &drift, &ClassifyOptions { h, ..Default::default() }).unwrap();
        prop_assert_eq!(base.regime, other.regime);
    }

    #[test]
    fn window_intensity_is_additive(env in envelope(), a in 0.0f64..50.0, w1 in 0.1f64..5.0, w2 in 0.1f64..5.0) {
        let spec = DiffusionSpec::envelope(env, Matrix::identity(2, 2)).unwrap();
        let n = MatrixNorm::Frobenius;
        let whole = spec.intensity(a, a + w1 + w2, n, 1e-13).unwrap();
        let parts = spec.intensity(a, a + w1, n, 1e-13).unwrap() + spec.intensity(a + w1, a + w1 + w2, n, 1e-13).unwrap();
        prop_assert!((whole - parts).abs() <= 1e-9 * whole.max(1.0));
    }

    #[test]
    fn lyapunov_solution_is_spd(a in stable_matrix()) {
        let d = a.nrows();
        let sol = solve_lyapunov(&a).unwrap();
        let r = (a.transpose() * &sol.m + &sol.m * &a + Matrix::identity(d, d)).norm();
        prop_assert!(r <= 1e-10);
        prop_assert!((&sol.m - sol.m.transpose()).amax() <= 1e-12 * sol.m.amax());
        prop_assert!(sol.m.clone().cholesky().is_some());
    }

    #[test]
    fn expm_semigroup(a in (1usize..=5).prop_flat_map(|d| matrix(d, 1.5)), s in 0.0f64..2.0, t in 0.0f64..2.0) {
        let es = expm(&a, s).unwrap();
        let et = expm(&a, t).unwrap();
        let est = expm(&a, s + t).unwrap();
        let prod = &es * &et;
        prop_assert!((&prod - &est).amax() <= 1e-11 * est.amax().max(1.0));
        let det = est.determinant();
        let expected = ((s + t) * a.trace()).exp();
        prop_assert!((det - expected).abs() <= 1e-10 * expected.max(1.0));
    }

    #[test]
    fn tail_sup_non_increasing(values in prop::collection::vec(0.0f64..10.0, 10..200)) {
        let times: Vec<f64> = (0..values.len()).map(|k| k as f64).collect();
        let t_end = times[times.len() - 1];
        let cps: Vec<f64> = [0.0, 0.25, 0.5, 0.75, 1.0].iter().map(|f| f * t_end).collect();
        let ts = tail_sup(&times, &values, &cps);
        prop_assert!(ts.windows(2).all(|w| w[1] <= w[0]));
        let max = values.iter().copied().fold(f64::MIN, f64::max);
        prop_assert_eq!(ts[0], max);
    }

    #[test]
    fn window_inf_matches_brute_force(values in prop::collection::vec(0.0f64..10.0, 10..100), w in 1usize..9) {
        let times: Vec<f64> = (0..values.len()).map(|k| k as f64).collect();
        let out = window_inf(&times, &values, w as f64);
        prop_assert_eq!(out.len(), values.len() - w);
        for (j, (t, inf)) in out.iter().enumerate() {
            let k = j + w;
            prop_assert_eq!(*t, times[k]);
            let brute = values[k - w..=k].iter().copied().fold(f64::INFINITY, f64::min);
            prop_assert_eq!(*inf, brute);
        }
    }

    #[test]
    fn avg_sq_of_constant(c in -5.0f64..5.0, n in 2usize..50) {
        let times: Vec<f64> = (0..n).map(|k| 0.3 * k as f64).collect();
        let out = avg_sq(&times, &vec![c; n]);
        for v in out {
            prop_assert!((v - c * c).abs() <= 1e-12 * (c * c).max(1.0));
        }
    }

    #[test]
    fn median_is_central(values in prop::collection::vec(-100.0f64..100.0, 1..60)) {
        let m = median(&values);
        let below = values.iter().filter(|&&v| v <= m).count();
        let above = values.iter().filter(|&&v| v >= m).count();
        prop_assert!(2 * below >= values.len() && 2 * above >= values.len());
    }

    #[test]
    fn power_trend_sign(k in 0.1f64..10.0, p in prop_oneof![-2.0f64..-0.2, 0.2f64..2.0]) {
        let times = [64.0, 128.0, 256.0, 512.0];
        let values: Vec<f64> = times.iter().map(|t: &f64| k * t.powf(p)).collect();
        let fit = trend(&times, &values);
        assert_relative_eq!(fit.slope, p, epsilon = 1e-9);
        prop_assert_eq!(fit.trend, if p > 0.0 { Trend::Increasing } else { Trend::Decreasing });
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn simulation_is_reproducible(seed in any::<u64>(), paths in 1usize..6) {
        let drift = DriftSpec::constant(Matrix::from_row_slice(2, 2, &[-1.0, 0.3, 0.0, -0.5])).unwrap();
        let sigma = DiffusionSpec::envelope(Envelope::LogPower { gamma: 1.0 }, Matrix::identity(2, 2)).unwrap();
        let cfg = SimConfig::new(0.1, 5.0, paths, seed);
        let a = simulate(&drift, &sigma, &[1.0, -1.0], &cfg).unwrap();
        let b = simulate(&drift, &sigma, &[1.0, -1.0], &cfg).unwrap();
        prop_assert_eq!(&a, &b);
        // Paths are seeded by index, so a larger ensemble extends a smaller one.
        let more = simulate(&drift, &sigma, &[1.0, -1.0], &SimConfig::new(0.1, 5.0, paths + 3, seed)).unwrap();
        prop_assert_eq!(&a.paths[..], &more.paths[..paths]);
    }
}
