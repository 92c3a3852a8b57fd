use ddlab_core::brownian::{bm_laplace_equal, BmParams};
use ddlab_core::diffusion::DiffusionModel;
use ddlab_core::montecarlo::{
    estimate_finite_horizon, estimate_laplace, sample_terminal, simulate, verify_range_identity, Scheme, SimConfig,
};
use proptest::prelude::*;

fn bm(mu: f64, sigma: f64) -> DiffusionModel {
    DiffusionModel::bm(mu, sigma).unwrap()
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

#[test]
fn large_thresholds_censor_every_path() {
    let m = bm(0.0, 1.0);
    let cfg = SimConfig::for_model(&m, 500, 1e-2, 1).with_horizon(1.0);
    let e = simulate(&m, 0.0, 100.0, 100.0, &cfg).unwrap();
    assert_eq!(e.records.len(), 500);
    assert!(e.records.iter().all(|r| r.censored_dd && r.censored_du));
    assert_eq!(e.summary().undecided, 500);
}

#[test]
fn symmetric_frequency_is_one_half() {
    let m = bm(0.0, 1.0);
    let cfg = SimConfig::for_model(&m, 1_000_000, 1e-4, 42).with_horizon(50.0);
    let e = simulate(&m, 0.0, 1.0, 1.0, &cfg).unwrap();
    let s = e.summary();
    assert_eq!(s.undecided, 0);
    assert!((s.frequency_dd_first - 0.5).abs() < 3.0 * 0.0005, "{}", s.frequency_dd_first);
}

#[test]
fn laplace_estimator_limits_and_closed_form() {
    let m = bm(0.0, 1.0);
    let cfg = SimConfig::for_model(&m, 40_000, 1e-4, 8).with_extrapolation(true);
    let e = simulate(&m, 0.0, 1.0, 1.0, &cfg).unwrap();
    assert!(estimate_laplace(&e, 1e4).unwrap().value < 1e-12);
    let est = estimate_laplace(&e, 0.5).unwrap();
    let exact = bm_laplace_equal(BmParams::new(0.0, 1.0).unwrap(), 1.0, 0.5).unwrap();
    assert!((est.value - exact).abs() < 3.0 * est.std_error, "{} ± {} vs {exact}", est.value, est.std_error);
    assert_eq!(estimate_finite_horizon(&e, 0.0).unwrap().value, 0.0);
    let plain = e.fine_only();
    let mut last = 0.0;
    for k in 1..=10 {
        let v = estimate_finite_horizon(&plain, 0.3 * k as f64).unwrap().value;
        assert!(v >= last);
        last = v;
    }
}

#[test]
fn range_identity_holds_on_equal_size_ensembles() {
    for model in [bm(0.0, 1.0), bm(0.5, 1.0), DiffusionModel::ou(0.0, 1.0, 1.0).unwrap()] {
        let cfg = SimConfig::for_model(&model, 4000, 1e-4, 3);
        let e = simulate(&model, 0.0, 1.0, 1.0, &cfg).unwrap();
        let report = verify_range_identity(&e).unwrap();
        assert_eq!(report.paths, 4000);
        assert_eq!(report.violations, 0, "{model}: max gap {}", report.max_gap);
    }
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let m = DiffusionModel::ou(0.1, 1.0, 1.0).unwrap();
    let cfg = SimConfig::for_model(&m, 2000, 3.6e-5, 77).with_extrapolation(true);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| simulate(&m, 0.0, 0.8, 0.6, &cfg).unwrap())
    };
    let (one, four) = (run(1), run(4));
    assert_eq!(one.records, four.records);
    assert_eq!(one.coarse, four.coarse);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    one.write_csv(&mut a).unwrap();
    four.write_csv(&mut b).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        String::from_utf8(a).unwrap().lines().next().unwrap(),
        "path_id,t_dd,t_du,censored_dd,censored_du,x_at_dd,sup_du_before_dd"
    );
}

#[test]
fn exact_scheme_has_gaussian_marginals() {
    let (mu, sigma, x, t) = (0.3, 1.4, 0.5, 2.0);
    let m = bm(mu, sigma);
    let cfg = SimConfig::for_model(&m, 100_000, 0.01, 2024);
    assert_eq!(cfg.scheme, Scheme::ExactBm);
    let mut xs = sample_terminal(&m, x, t, &cfg).unwrap();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let sd = sigma * t.sqrt();
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let c = normal_cdf((v - x - mu * t) / sd);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max);
    // Kolmogorov–Smirnov critical value at the 1% level
    assert!(d < 1.628 / n.sqrt(), "D = {d}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn longer_horizon_never_lowers_frequency(mu in -0.5..0.5f64, horizon in 0.2..2.0f64, seed in 0u64..1000) {
        let m = bm(mu, 1.0);
        let base = SimConfig::for_model(&m, 400, 1e-4, seed);
        let short = simulate(&m, 0.0, 1.0, 1.0, &base.clone().with_horizon(horizon)).unwrap();
        let long = simulate(&m, 0.0, 1.0, 1.0, &base.with_horizon(2.0 * horizon)).unwrap();
        prop_assert!(long.summary().dd_first >= short.summary().dd_first);
    }

    #[test]
    fn records_respect_their_invariants(mu in -1.0..1.0f64, a in 0.5..1.5f64, b in 0.5..1.5f64, seed in 0u64..1000) {
        let m = bm(mu, 1.0);
        let cfg = SimConfig::for_model(&m, 200, 2e-5, seed).with_horizon(3.0).with_stop_at_first(false);
        let e = simulate(&m, 0.0, a, b, &cfg).unwrap();
        prop_assert_eq!(e.records.len(), 200);
        for r in &e.records {
            prop_assert!(r.sup_du_before_dd >= 0.0);
            if !r.censored_dd { prop_assert!(r.t_dd <= 3.0); }
            if !r.censored_du { prop_assert!(r.t_du <= 3.0); }
        }
    }
}
