//! Oracles shared by the integration tests, written independently of the
//! library's special-function code.

#![allow(dead_code)]

use llbart_oracle::{integrate, log_integral};
use statrs::function::gamma::ln_gamma;

/// Leaf prior density from its gamma / inverse-gamma halves.
pub fn leaf_prior_log_density(lambda: f64, c: f64, d: f64) -> f64 {
    let norm = c * d.ln() - ln_gamma(c);
    let gamma = norm + (c - 1.0) * lambda.ln() - d * lambda;
    let inv_gamma = norm - (c + 1.0) * lambda.ln() - d / lambda;
    let hi = gamma.max(inv_gamma);
    hi + ((gamma - hi).exp() + (inv_gamma - hi).exp()).ln() - std::f64::consts::LN_2
}

/// `ln ∫ λ^r e^{-sλ} p(λ) dλ` by quadrature over `t = ln λ`.
pub fn leaf_log_marginal(r: f64, s: f64, c: f64, d: f64) -> f64 {
    let g = |t: f64| r * t - s * t.exp() + leaf_prior_log_density(t.exp(), c, d) + t;
    let center = if s > 0.0 { ((r + c) / (d + s)).ln() } else { 0.0 };
    log_integral(g, center, 1.0 / (r + c).sqrt())
}

/// `E[λ^k]` under the leaf posterior for statistics `(r, s)`.
pub fn leaf_posterior_moment(k: f64, r: f64, s: f64, c: f64, d: f64) -> f64 {
    (leaf_log_marginal(r + k, s, c, d) - leaf_log_marginal(r, s, c, d)).exp()
}

/// `∫_0^∞ e^{g(t)} dt` for a unimodal log integrand peaking near `mode`.
pub fn half_line_integral<G: Fn(f64) -> f64>(g: G, mode: f64, scale: f64) -> f64 {
    let peak = g(mode);
    let mut hi = mode + scale;
    while g(hi) > peak - 80.0 {
        hi = mode + 2.0 * (hi - mode);
    }
    let mut lo = (mode - scale).max(0.0);
    while lo > 0.0 && g(lo) > peak - 80.0 {
        lo = (mode - 2.0 * (mode - lo)).max(0.0);
    }
    let h = |t: f64| (g(t) - peak).exp();
    let inner = integrate(h, lo, mode, 1e-13, 0.0) + integrate(h, mode, hi, 1e-13, 0.0);
    peak.exp() * inner
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// Mean of `xs` and standard error allowing for autocorrelation via batch means.
pub fn batch_mean_and_se(xs: &[f64], batches: usize) -> (f64, f64) {
    let size = xs.len() / batches;
    let means: Vec<f64> = (0..batches).map(|b| xs[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64).collect();
    let mean = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (batches as f64 - 1.0);
    (mean, (var / batches as f64).sqrt())
}
