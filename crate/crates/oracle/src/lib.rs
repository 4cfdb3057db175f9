//! Reference numerics for tests.
//!
//! Everything here is deliberately naive and independent of the `llbart`
//! implementation: plain adaptive Gauss-Kronrod quadrature, brute-force
//! log-space integration, finite differences and the Kolmogorov-Smirnov
//! statistic. Test suites compute expected values with these routines and
//! compare them against the library.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod panel: (estimate, error estimate).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.partial_cmp(&other.err).unwrap_or(Ordering::Equal)
    }
}

/// Adaptive Gauss-Kronrod integral of `f` over `[a, b]`.
///
/// Bisects the panel with the largest error estimate until the summed error
/// is below `max(abs_tol, rel_tol * |I|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> f64 {
    assert!(a.is_finite() && b.is_finite(), "finite bounds required");
    if a == b {
        return 0.0;
    }
    let (a, b, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut heap = BinaryHeap::new();
    let (v, e) = gk15(&f, a, b);
    let mut total = v;
    let mut total_err = e;
    heap.push(Panel { a, b, value: v, err: e });
    let mut iterations = 0;
    while total_err > abs_tol.max(rel_tol * total.abs()) && iterations < 20_000 {
        let worst = heap.pop().expect("heap never empties");
        let mid = 0.5 * (worst.a + worst.b);
        let (v1, e1) = gk15(&f, worst.a, mid);
        let (v2, e2) = gk15(&f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.err;
        heap.push(Panel { a: worst.a, b: mid, value: v1, err: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, err: e2 });
        iterations += 1;
    }
    // Re-sum to shed accumulated cancellation in the running total.
    sign * heap.iter().map(|p| p.value).sum::<f64>()
}

/// `log ∫ exp(g(t)) dt` over the real line for a unimodal-ish log integrand.
///
/// Locates the peak on a coarse grid, widens the window until `g` has fallen
/// 80 nats below the peak on both sides, then integrates `exp(g - peak)`
/// adaptively on the window.
pub fn log_integral<G: Fn(f64) -> f64>(g: G, center_guess: f64, scale_guess: f64) -> f64 {
    let scale = scale_guess.abs().max(1e-12);
    let mut lo = center_guess - 50.0 * scale;
    let mut hi = center_guess + 50.0 * scale;
    let finite = |t: f64| {
        let v = g(t);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let mut peak = f64::NEG_INFINITY;
    let mut arg = center_guess;
    for k in 0..=20_000 {
        let t = lo + (hi - lo) * k as f64 / 20_000.0;
        let v = finite(t);
        if v > peak {
            peak = v;
            arg = t;
        }
    }
    assert!(peak.is_finite(), "log integrand has no finite value in the window");
    let step = (hi - lo) / 20_000.0;
    // Golden-section polish of the grid maximum.
    let (mut a, mut b) = (arg - step, arg + step);
    for _ in 0..200 {
        let m1 = b - 0.618_033_988_749_895 * (b - a);
        let m2 = a + 0.618_033_988_749_895 * (b - a);
        if finite(m1) < finite(m2) {
            a = m1;
        } else {
            b = m2;
        }
    }
    let polished = finite(0.5 * (a + b));
    if polished > peak {
        peak = polished;
        arg = 0.5 * (a + b);
    }
    while finite(lo) > peak - 80.0 {
        lo -= (arg - lo).max(scale);
    }
    while finite(hi) > peak - 80.0 {
        hi += (hi - arg).max(scale);
    }
    // Split at the peak so the narrow bulk is resolved from the first bisection.
    let h = |t: f64| (finite(t) - peak).exp();
    let left = integrate(h, lo, arg, 1e-13, 0.0);
    let right = integrate(h, arg, hi, 1e-13, 0.0);
    peak + (left + right).ln()
}

/// Central finite difference of `f` at `x` with step `h`.
pub fn central_difference<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Second central difference of `f` at `x` with step `h`.
pub fn second_difference<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
}

/// Two-sided Kolmogorov-Smirnov statistic of `sample` against `cdf`.
///
/// `cdf` receives the sorted sample and must return the CDF at every point
/// (batching lets callers integrate a density cumulatively).
pub fn ks_statistic<C: Fn(&[f64]) -> Vec<f64>>(sample: &[f64], cdf: C) -> f64 {
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("NaN in sample"));
    let values = cdf(&sorted);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, f) in values.iter().enumerate() {
        let hi = (i + 1) as f64 / n - f;
        let lo = f - i as f64 / n;
        d = d.max(hi).max(lo);
    }
    d
}

/// Asymptotic KS critical value at significance level 0.001.
pub fn ks_critical_001(n: usize) -> f64 {
    1.949_5 / (n as f64).sqrt()
}

/// CDF values at sorted points `xs` for a density on `(lower, ∞)`, by
/// cumulative quadrature between consecutive points.
pub fn cumulative_cdf<F: Fn(f64) -> f64>(density: F, lower: f64, xs: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(xs.len());
    let mut acc = 0.0;
    let mut prev = lower;
    for &x in xs {
        if x > prev {
            acc += integrate(&density, prev, x, 1e-10, 1e-14);
            prev = x;
        }
        out.push(acc);
    }
    out
}

/// Sample mean and the standard error of the mean for iid draws.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Sample variance and its standard error for iid draws (via the fourth
/// central moment).
pub fn variance_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let var = m2 * n / (n - 1.0);
    (var, ((m4 - m2 * m2) / n).max(0.0).sqrt())
}
