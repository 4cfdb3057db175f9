//! Special functions and base samplers against quadrature oracles.

use llbart::special::{
    digamma, log_bessel_k, log_gamma_fn, log_gig_density, log_gig_norm, log_sum_exp, sample_gamma, sample_gig,
    trigamma, RngStream,
};
use llbart_oracle::{cumulative_cdf, integrate, ks_critical_001, ks_statistic, log_integral, mean_and_se};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// `ln ∫_0^∞ e^{g(t)} dt` for a unimodal `g` with mode `peak_at >= 0`.
fn log_integral_half_line<G: Fn(f64) -> f64>(g: G, peak_at: f64, scale: f64) -> f64 {
    let peak = g(peak_at);
    let mut hi = peak_at + scale;
    while g(hi) > peak - 90.0 {
        hi = peak_at + 2.0 * (hi - peak_at);
    }
    let h = |t: f64| (g(t) - peak).exp();
    let mut total = integrate(h, peak_at, hi, 1e-14, 0.0);
    if peak_at > 0.0 {
        total += integrate(h, 0.0, peak_at, 1e-14, 0.0);
    }
    peak + total.ln()
}

/// `ln Γ(x)` from Euler's integral in log coordinates; for `x < 1` the
/// integral is taken at `x + 1` (its left tail is too heavy otherwise).
fn log_gamma_oracle(x: f64) -> f64 {
    let z = if x < 1.0 { x + 1.0 } else { x };
    let v = log_integral(|u| z * u - u.exp(), z.ln(), 1.0 / z.sqrt());
    if x < 1.0 {
        v - x.ln()
    } else {
        v
    }
}

/// `ln K_ν(x)` from `∫_0^∞ exp(-x cosh t) cosh(νt) dt`.
fn bessel_k_oracle(nu: f64, x: f64) -> f64 {
    let nu = nu.abs();
    let ln_cosh = |z: f64| z.abs() + (-2.0 * z.abs()).exp().ln_1p() - std::f64::consts::LN_2;
    let g = |t: f64| -x * t.cosh() + ln_cosh(nu * t);
    // Mode solves x sinh t = ν tanh(νt); bisect on the derivative.
    let dg = |t: f64| -x * t.sinh() + nu * (nu * t).tanh();
    let (mut lo, mut hi) = (0.0, 1.0);
    while dg(hi) > 0.0 {
        hi *= 2.0;
    }
    if dg(1e-12) <= 0.0 {
        hi = 0.0;
    } else {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if dg(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    let curvature = (x * hi.cosh()).max(1e-6);
    log_integral_half_line(g, hi, 1.0 / curvature.sqrt())
}

#[test]
fn log_gamma_matches_euler_integral() {
    // Γ(x) = ∫ exp(x u - e^u) du
    for &x in &[1e-6f64, 0.1, 0.5, 1.0, 3.7, 10.0, 25.0, 1e3, 1e6, 1e8] {
        let oracle = log_gamma_oracle(x);
        let got = log_gamma_fn(x).unwrap();
        // Absolute accuracy is bounded by the representable precision of the value itself.
        let tol = 1e-12 * oracle.abs().max(1.0);
        assert!((got - oracle).abs() < tol, "x={x}: {got} vs {oracle}");
    }
}

#[test]
fn log_gamma_absolute_accuracy_where_representable() {
    for &x in &[1e-6f64, 0.25, 0.5, 1.5, 2.5, 4.0, 7.25, 12.0] {
        let oracle = log_gamma_oracle(x);
        assert!((log_gamma_fn(x).unwrap() - oracle).abs() < 1e-12, "x={x}");
    }
    assert!((log_gamma_fn(0.5).unwrap() - 0.572_364_942_924_700_1).abs() < 1e-12);
    assert!((log_gamma_fn(10.0).unwrap() - 12.801_827_480_081_469).abs() < 1e-12);
}

#[test]
fn digamma_matches_gauss_integral() {
    const EULER: f64 = 0.577_215_664_901_532_9;
    for &x in &[1.0, 1.5, 3.0, 16.8265, 200.0, 5e3] {
        let integrand = |t: f64| {
            if t >= 1.0 {
                x - 1.0
            } else {
                -((x - 1.0) * t.ln()).exp_m1() / (1.0 - t)
            }
        };
        let oracle = integrate(integrand, 0.0, 1.0, 1e-14, 0.0) - EULER;
        assert!(rel(digamma(x).unwrap(), oracle) < 1e-10, "x={x}");
    }
}

#[test]
fn trigamma_matches_laplace_integral() {
    for &x in &[0.2, 1.0, 2.5, 16.8265, 89.38, 1e3] {
        let g = |t: f64| t.ln() - x * t - (-(-t).exp_m1()).ln();
        let oracle = log_integral_half_line(g, 1.0 / x, 1.0 / x).exp();
        assert!(rel(trigamma(x).unwrap(), oracle) < 1e-10, "x={x}");
    }
}

#[test]
fn trigamma_matches_second_difference_of_log_gamma() {
    let x = 16.8265;
    let h = 1e-3;
    let fd = (log_gamma_fn(x + h).unwrap() - 2.0 * log_gamma_fn(x).unwrap() + log_gamma_fn(x - h).unwrap()) / (h * h);
    let tg = trigamma(x).unwrap();
    assert!(rel(tg, fd) < 1e-6);
    assert!((tg - 0.061_225).abs() < 1e-4);
}

#[test]
fn bessel_closed_forms() {
    let v = log_bessel_k(0.5, 2.0).unwrap();
    assert!((v - (-2.120_782_237_635_245)).abs() < 1e-12);
    assert_eq!(v, log_bessel_k(-0.5, 2.0).unwrap());
}

#[test]
fn bessel_matches_integral_representation() {
    let mut cases = vec![(3.0, 1.5)];
    for &nu in &[0.1, 1.0, 5.0, 50.0, 500.0] {
        for &x in &[0.01, 1.0, 100.0] {
            cases.push((nu, x));
        }
    }
    cases.extend([(0.0, 0.3), (49.99, 20.0), (50.01, 20.0), (50.01, 0.01), (73.2, 80.0), (1e4, 1e4), (1e4, 3.0)]);
    for (nu, x) in cases {
        let oracle = bessel_k_oracle(nu, x);
        let got = log_bessel_k(nu, x).unwrap();
        // relative error of K equals the absolute error of ln K
        assert!((got - oracle).abs() < 1e-8, "nu={nu} x={x}: {got} vs {oracle}");
    }
}

#[test]
fn bessel_extreme_envelope() {
    // ln K_ν(x) ~ ln Γ(ν) - ln 2 + ν ln(2/x) as x → 0
    for &nu in &[5.0f64, 60.0, 1e3, 1e6] {
        let x: f64 = 1e-8;
        let lead = log_gamma_fn(nu).unwrap() - std::f64::consts::LN_2 + nu * (2.0 / x).ln();
        let got = log_bessel_k(nu, x).unwrap();
        assert!(rel(got, lead) < 1e-9, "nu={nu}");
    }
    // ln K_ν(x) ~ ½ ln(π/2x) - x as x → ∞
    for &nu in &[0.0, 3.0, 60.0] {
        let x = 1e8;
        let lead = 0.5 * (std::f64::consts::PI / (2.0 * x)).ln() - x;
        let got = log_bessel_k(nu, x).unwrap();
        assert!(rel(got, lead) < 1e-12, "nu={nu}");
    }
}

#[test]
fn gig_norm_examples_and_symmetry() {
    assert!(log_gig_norm(1.0, 0.0, 2.0).unwrap().abs() < 1e-14);
    assert!((log_gig_norm(-2.0, 6.0, 0.0).unwrap() - (-2.197_224_577_336_219_6)).abs() < 1e-12);
    for i in 0..20 {
        let c = 0.05 + 9.0 * i as f64;
        let d = 0.3 + 4.1 * i as f64;
        let a = log_gig_norm(c, 0.0, 2.0 * d).unwrap();
        let b = log_gig_norm(-c, 2.0 * d, 0.0).unwrap();
        assert!((a - b).abs() < 1e-10, "c={c} d={d}");
    }
}

#[test]
fn gig_norm_matches_quadrature() {
    for &(eta, chi, psi) in &[(1.5, 2.0, 3.0), (-13.0, 32.0, 4.0), (212.0, 30.0, 0.2), (0.01, 1e-3, 50.0)] {
        let g = |t: f64| eta * t - 0.5 * (chi * (-t).exp() + psi * t.exp());
        let center = (((eta - 1.0).hypot((chi * psi).sqrt()) + (eta - 1.0)) / psi).max(1e-300).ln();
        let oracle = log_integral(g, center, 1.0);
        assert!((log_gig_norm(eta, chi, psi).unwrap() - oracle).abs() < 1e-9, "({eta},{chi},{psi})");
    }
}

#[test]
fn gamma_sampler_moments() {
    let mut rng = RngStream::new(2024, 0);
    let draws: Vec<f64> = (0..1_000_000).map(|_| sample_gamma(2.0, 3.0, &mut rng).unwrap()).collect();
    let (mean, se) = mean_and_se(&draws);
    assert!((mean - 2.0 / 3.0).abs() < 4.0 * se);
    let (var, var_se) = llbart_oracle::variance_and_se(&draws);
    assert!((var - 2.0 / 9.0).abs() < 4.0 * var_se);
    let mut rng = RngStream::new(5, 0);
    assert!((0..100_000).all(|_| sample_gamma(0.5, 1.0, &mut rng).unwrap() > 0.0));
}

#[test]
fn gig_degenerate_regimes_reduce() {
    let mut rng = RngStream::new(77, 1);
    let draws: Vec<f64> = (0..1_000_000).map(|_| sample_gig(3.0, 0.0, 4.0, &mut rng).unwrap()).collect();
    let (mean, se) = mean_and_se(&draws);
    assert!((mean - 1.5).abs() < 4.0 * se);
    let (var, var_se) = llbart_oracle::variance_and_se(&draws);
    assert!((var - 0.75).abs() < 4.0 * var_se);

    // 1/X ~ Gamma(3, 2)
    let inv: Vec<f64> = (0..1_000_000).map(|_| 1.0 / sample_gig(-3.0, 4.0, 0.0, &mut rng).unwrap()).collect();
    let (mean, se) = mean_and_se(&inv);
    assert!((mean - 1.5).abs() < 4.0 * se);
}

#[test]
fn gig_mean_matches_quadrature() {
    let (eta, chi, psi) = (1.5, 2.0, 3.0);
    let norm = log_integral(|t| eta * t - 0.5 * (chi * (-t).exp() + psi * t.exp()), 0.0, 1.0);
    let moment = log_integral(|t| (eta + 1.0) * t - 0.5 * (chi * (-t).exp() + psi * t.exp()), 0.0, 1.0);
    let oracle = (moment - norm).exp();
    let mut rng = RngStream::new(9, 4);
    let draws: Vec<f64> = (0..1_000_000).map(|_| sample_gig(eta, chi, psi, &mut rng).unwrap()).collect();
    let (mean, se) = mean_and_se(&draws);
    assert!((mean - oracle).abs() < 4.0 * se, "{mean} vs {oracle} (se {se})");
}

#[test]
fn gig_sampler_ks_against_quadrature_cdf() {
    // One triple per sampler branch (ROU without shift, non-T-concave hat,
    // ROU with shift, gamma proposal) plus negative orders.
    let triples = [
        (1.5, 2.0, 3.0),
        (0.3, 0.01, 0.01),
        (-0.7, 1e-3, 1e-3),
        (2.5, 40.0, 40.0),
        (300.0, 2.0, 3.0),
        (-40.0, 32.0, 0.5),
        (5.0, 2.0, 3.0),
    ];
    for (k, &(eta, chi, psi)) in triples.iter().enumerate() {
        let mut rng = RngStream::new(31, k as u64);
        let draws: Vec<f64> = (0..100_000).map(|_| sample_gig(eta, chi, psi, &mut rng).unwrap()).collect();
        // Normaliser by independent quadrature, in log-λ coordinates.
        let g = |t: f64| eta * t - 0.5 * (chi * (-t).exp() + psi * t.exp());
        let mut sorted = draws.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let center = sorted[sorted.len() / 2].ln();
        let ln_norm = log_integral(g, center, 1.0);
        let d = ks_statistic(&draws, |xs| {
            let logs: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
            let lower = logs[0] - 60.0;
            cumulative_cdf(|t| (g(t) - ln_norm).exp(), lower, &logs)
        });
        assert!(d < ks_critical_001(draws.len()), "triple {k}: D={d}");
        // Library density agrees with the quadrature normaliser.
        let lib = log_gig_density(1.0, eta, chi, psi).unwrap();
        assert!((lib - (-0.5 * (chi + psi) - ln_norm)).abs() < 1e-8, "triple {k}");
    }
}

#[test]
fn rng_streams_are_reproducible() {
    let a: Vec<f64> = {
        let mut r = RngStream::new(123, 4);
        (0..1000).map(|_| sample_gig(0.4, 1.0, 2.0, &mut r).unwrap()).collect()
    };
    let b: Vec<f64> = {
        let mut r = RngStream::new(123, 4);
        (0..1000).map(|_| sample_gig(0.4, 1.0, 2.0, &mut r).unwrap()).collect()
    };
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
}

proptest! {
    #[test]
    fn log_sum_exp_is_symmetric_and_bounded(a in -800.0f64..800.0, b in -800.0f64..800.0) {
        let v = log_sum_exp(a, b);
        prop_assert_eq!(v, log_sum_exp(b, a));
        prop_assert!(v >= a.max(b));
        prop_assert!(v <= a.max(b) + std::f64::consts::LN_2 + 1e-15);
    }

    #[test]
    fn bessel_satisfies_three_term_recurrence(nu in 0.6f64..3000.0, lx in -3.0f64..3.0) {
        let x = 10f64.powf(lx);
        let km = log_bessel_k(nu - 1.0, x).unwrap();
        let k0 = log_bessel_k(nu, x).unwrap();
        let kp = log_bessel_k(nu + 1.0, x).unwrap();
        // K_{ν+1} = K_{ν-1} + (2ν/x) K_ν, divided through by K_{ν+1}
        let lhs = (km - kp).exp() + 2.0 * nu / x * (k0 - kp).exp();
        prop_assert!((lhs - 1.0).abs() < 1e-9, "nu={} x={} lhs={}", nu, x, lhs);
    }

    #[test]
    fn gig_density_log_symmetry(c in 0.1f64..200.0, d in 0.1f64..200.0, t in -5.0f64..5.0) {
        // Mixture of the two components is symmetric on the log scale.
        let lam = t.exp();
        let f = |x: f64| log_sum_exp(log_gig_density(x, -c, 2.0 * d, 0.0).unwrap(), log_gig_density(x, c, 0.0, 2.0 * d).unwrap()) + x.ln();
        prop_assert!((f(lam) - f(1.0 / lam)).abs() < 1e-9);
    }
}
