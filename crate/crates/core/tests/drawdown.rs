use ddlab_core::brownian::{bm_J0, bm_laplace_dd_larger, bm_laplace_du_larger, bm_laplace_equal, t_lambda, BmParams};
use ddlab_core::diffusion::DiffusionModel;
use ddlab_core::drawdown::{
    h_factor, laplace_dd_larger, laplace_dd_uncond, laplace_ddu, laplace_du_larger, laplace_equal, precede_probability,
    NumericsConfig,
};
use ddlab_core::montecarlo::{estimate_laplace, simulate, SimConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn cfg() -> NumericsConfig {
    NumericsConfig::default()
}

fn bm(mu: f64, sigma: f64) -> DiffusionModel {
    DiffusionModel::bm(mu, sigma).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn driftless_equal_sizes_is_even_odds() {
    let v = laplace_equal(&bm(0.0, 1.0), 0.0, 1.0, 1e-10, &cfg()).unwrap();
    assert!((v - 0.5).abs() < 1e-6, "{v}");
    let p = precede_probability(&bm(0.0, 1.0), 0.0, 1.0, 1.0, &cfg()).unwrap();
    assert!((p - 0.5).abs() < 1e-4, "{p}");
    let up = precede_probability(&bm(0.4, 1.0), 0.0, 1.0, 1.0, &cfg()).unwrap();
    assert!(up < 0.5);
}

#[test]
fn general_pipeline_reproduces_bm_closed_forms() {
    let p = BmParams::new(0.5, 1.0).unwrap();
    let m = bm(0.5, 1.0);
    let eq = laplace_equal(&m, 0.0, 1.0, 0.5, &cfg()).unwrap();
    assert!(rel(eq, bm_laplace_equal(p, 1.0, 0.5).unwrap()) < 1e-5);
    let ddl = laplace_dd_larger(&m, 0.0, 1.5, 1.0, 0.5, &cfg()).unwrap();
    assert!(rel(ddl, bm_laplace_dd_larger(p, 1.5, 1.0, 0.5).unwrap()) < 1e-5);
    let j = laplace_dd_uncond(&bm(0.5, 1.0), 0.0, 1.0, 1.0, &cfg()).unwrap();
    assert!(rel(j, bm_J0(p, 1.0, 1.0).unwrap()) < 1e-5);
    let q = BmParams::new(-0.3, 1.0).unwrap();
    let dul = laplace_du_larger(&bm(-0.3, 1.0), 0.0, 1.0, 1.5, 0.5, &cfg()).unwrap();
    assert!(rel(dul, bm_laplace_du_larger(q, 1.0, 1.5, 0.5).unwrap()) < 1e-5);
}

#[test]
fn unconditional_drawdown_examples() {
    let j = laplace_dd_uncond(&bm(0.0, 1.0), 0.0, 1.0, 0.5, &cfg()).unwrap();
    assert!((j - 1.0 / 1f64.cosh()).abs() < 1e-6, "{j}");
    assert!((j - 0.64805).abs() < 1e-5);
    let near_zero = laplace_dd_uncond(&bm(0.0, 1.0), 0.0, 1.0, 1e-8, &cfg()).unwrap();
    assert!((near_zero - 1.0).abs() < 1e-3, "{near_zero}");
}

#[test]
fn h_factor_examples() {
    let m = bm(0.0, 1.0);
    assert_eq!(h_factor(&m, 0.3, 1.0, 0.3, 0.5, &cfg()).unwrap(), 1.0);
    let h = h_factor(&m, 1.0, 1.0, 0.0, 0.5, &cfg()).unwrap();
    let expected = (-1f64 / 1f64.tanh()).exp();
    assert!(rel(h, expected) < 1e-5, "{h} {expected}");
    assert!((h - 0.2690).abs() < 1e-4);
    for (mu, sigma, b, lam, w) in [(0.5, 1.0, 1.0, 0.5, 0.7), (-0.4, 1.3, 0.6, 2.0, 1.2)] {
        let p = BmParams::new(mu, sigma).unwrap();
        let got = h_factor(&bm(mu, sigma), w, b, 0.0, lam, &cfg()).unwrap();
        let exact = (t_lambda(p, lam, b).unwrap() * w).exp();
        assert!(rel(got, exact) < 1e-5, "{got} {exact}");
    }
}

#[test]
fn h_factor_matches_simulated_fall() {
    // X starts at u = 1 and must fall to c = 0 before rallying 1 above its
    // running minimum; y = X − u
    let (lambda, dt, paths) = (0.5f64, 1e-4f64, 20_000u64);
    let sq = dt.sqrt();
    let (mut sum, mut sum2) = (0.0, 0.0);
    for i in 0..paths {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        rng.set_stream(i);
        let (mut y, mut t, mut min) = (0.0f64, 0.0f64, 0.0f64);
        let v = loop {
            let ny = y + sq * rng.sample::<f64, _>(StandardNormal);
            if ny <= -1.0 {
                break (-lambda * (t + dt * (y + 1.0) / (y - ny))).exp();
            }
            if ny - min >= 1.0 {
                break 0.0;
            }
            y = ny;
            min = min.min(y);
            t += dt;
        };
        sum += v;
        sum2 += v * v;
    }
    let n = paths as f64;
    let mean = sum / n;
    let se = ((sum2 / n - mean * mean) / n).sqrt();
    let exact = (-1f64 / 1f64.tanh()).exp();
    assert!((mean - exact).abs() < 3.0 * se + 0.004, "{mean} ± {se} vs {exact}");
}

#[test]
fn dispatch_and_seams() {
    let m = bm(0.3, 1.2);
    let c = cfg();
    assert_eq!(laplace_ddu(&m, 0.0, 1.0, 1.0, 0.4, &c).unwrap(), laplace_equal(&m, 0.0, 1.0, 0.4, &c).unwrap());
    assert_eq!(laplace_ddu(&m, 0.0, 1.2, 1.0, 0.4, &c).unwrap(), laplace_dd_larger(&m, 0.0, 1.2, 1.0, 0.4, &c).unwrap());
    assert_eq!(laplace_ddu(&m, 0.0, 1.0, 1.3, 0.4, &c).unwrap(), laplace_du_larger(&m, 0.0, 1.0, 1.3, 0.4, &c).unwrap());
    let ou = DiffusionModel::ou(0.2, 1.0, 0.9).unwrap();
    for model in [m, ou] {
        let eq = laplace_equal(&model, 0.1, 1.0, 0.4, &c).unwrap();
        let below = laplace_dd_larger(&model, 0.1, 1.0, 1.0 - 1e-6, 0.4, &c).unwrap();
        let above = laplace_du_larger(&model, 0.1, 1.0, 1.0 + 1e-6, 0.4, &c).unwrap();
        assert!((below - eq).abs() < 1e-4, "{below} {eq}");
        assert!((above - eq).abs() < 1e-4, "{above} {eq}");
    }
}

#[test]
fn very_large_drawup_recovers_unconditional_drawdown() {
    let m = bm(0.5, 1.0);
    let far = laplace_du_larger(&m, 0.0, 1.0, 20.0, 0.5, &cfg()).unwrap();
    let j = laplace_dd_uncond(&m, 0.0, 1.0, 0.5, &cfg()).unwrap();
    assert!(rel(far, j) < 1e-6, "{far} {j}");
    let mid = laplace_du_larger(&m, 0.0, 1.0, 3.0, 0.5, &cfg()).unwrap();
    assert!(mid <= far + 1e-12);
}

fn mc_check(model: &DiffusionModel, x: f64, a: f64, b: f64, lambda: f64, dt: f64, paths: usize, expected: f64) {
    let sim = SimConfig::for_model(model, paths, dt, 2024).with_extrapolation(true);
    let e = simulate(model, x, a, b, &sim).unwrap();
    let est = estimate_laplace(&e, lambda).unwrap();
    assert!(est.warning.is_none(), "{:?}", est.warning);
    assert!(
        (est.value - expected).abs() < 3.0 * est.std_error,
        "{model}: MC {} ± {} vs {expected}",
        est.value,
        est.std_error
    );
}

#[test]
fn ou_equal_sizes_matches_simulation() {
    let ou = DiffusionModel::ou(0.0, 1.0, 1.0).unwrap();
    let v = laplace_equal(&ou, 0.0, 0.5, 1.0, &cfg()).unwrap();
    mc_check(&ou, 0.0, 0.5, 0.5, 1.0, 2.5e-5, 40_000, v);
}

#[test]
fn log_price_drawdown_larger_matches_simulation() {
    // log of a GBM with drift 0.05 and vol 0.2 is BM with drift 0.05 − 0.02
    let log = bm(0.05 - 0.5 * 0.2 * 0.2, 0.2);
    let v = laplace_dd_larger(&log, 0.0, 0.2, 0.1, 0.3, &cfg()).unwrap();
    mc_check(&log, 0.0, 0.2, 0.1, 0.3, 2.5e-5, 30_000, v);
}

#[test]
fn drawup_larger_matches_simulation() {
    let m = bm(-0.3, 1.0);
    let v = laplace_du_larger(&m, 0.0, 1.0, 1.5, 0.5, &cfg()).unwrap();
    mc_check(&m, 0.0, 1.0, 1.5, 0.5, 1e-4, 30_000, v);
}

#[test]
fn precede_probability_matches_simulated_frequency() {
    let m = bm(0.5, 1.0);
    let p = precede_probability(&m, 0.0, 1.0, 1.0, &cfg()).unwrap();
    let sim = SimConfig::for_model(&m, 100_000, 1e-4, 99).with_extrapolation(true);
    let e = simulate(&m, 0.0, 1.0, 1.0, &sim).unwrap();
    let est = e.estimate(|_, r| if r.dd_first() { 1.0 } else { 0.0 });
    assert_eq!(e.summary().undecided, 0);
    assert!((est.value - p).abs() < 3.0 * est.std_error, "{} ± {} vs {p}", est.value, est.std_error);
}

fn models() -> Vec<DiffusionModel> {
    vec![bm(0.2, 1.0), bm(-0.6, 0.8), DiffusionModel::ou(0.0, 0.8, 1.0).unwrap()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn transform_bounds_and_monotonicity(idx in 0usize..3, a in 0.4..1.2f64, b in 0.4..1.2f64, lam in 0.1..2.0f64) {
        let m = &models()[idx];
        let c = cfg();
        let v = laplace_ddu(m, 0.0, a, b, lam, &c).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert!(laplace_ddu(m, 0.0, a, b, 1.5 * lam, &c).unwrap() <= v + 1e-7);
        prop_assert!(laplace_ddu(m, 0.0, a, 1.3 * b, lam, &c).unwrap() >= v - 1e-7);
        prop_assert!(laplace_ddu(m, 0.0, 1.3 * a, b, lam, &c).unwrap() <= v + 1e-7);
        prop_assert!(v <= laplace_dd_uncond(m, 0.0, a, lam, &c).unwrap() + 1e-7);
    }

    #[test]
    fn bm_pipeline_matches_closed_form(mu in -1.0..1.0f64, sigma in 0.6..1.5f64, a in 0.5..1.5f64, b in 0.5..1.5f64, lam in 0.1..2.0f64) {
        let p = BmParams::new(mu, sigma).unwrap();
        let got = laplace_ddu(&bm(mu, sigma), 0.0, a, b, lam, &cfg()).unwrap();
        let exact = ddlab_core::brownian::bm_laplace_ddu(p, a, b, lam).unwrap();
        prop_assert!(rel(got, exact) < 1e-5, "{} {}", got, exact);
    }
}
