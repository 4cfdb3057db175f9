//! Observed-data probability functions and the augmented joint densities
//! whose latent margins recover them.

use crate::error::{Error, Result};
use crate::special::{ln_gamma_unchecked, log_sum_exp};

/// Counts up to this size use an explicit sum for `ln Γ(κ+y) - ln Γ(κ)`.
const RISING_SUM_MAX: u64 = 64;

pub fn log_factorial(y: u64) -> f64 {
    ln_gamma_unchecked(y as f64 + 1.0)
}

/// `ln Γ(κ + y) - ln Γ(κ)`, accurate for large `κ`.
pub fn log_rising(kappa: f64, y: u64) -> f64 {
    if y <= RISING_SUM_MAX {
        (0..y).map(|k| (kappa + k as f64).ln()).sum()
    } else {
        ln_gamma_unchecked(kappa + y as f64) - ln_gamma_unchecked(kappa)
    }
}

pub fn poisson_log_pmf(y: u64, mean: f64) -> f64 {
    if mean == 0.0 {
        return if y == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    y as f64 * mean.ln() - mean - log_factorial(y)
}

/// Negative binomial with mean `mean` and dispersion `kappa`
/// (variance `mean + mean²/κ`).
pub fn negbin_log_pmf(y: u64, mean: f64, kappa: f64) -> f64 {
    if mean == 0.0 {
        return if y == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let base = -kappa * (mean / kappa).ln_1p();
    if y == 0 {
        return base;
    }
    log_rising(kappa, y) - log_factorial(y) + base + y as f64 * (mean.ln() - (kappa + mean).ln())
}

/// `(ln ω, ln(1 - ω))` with `ω = f1 / (f0 + f1)` from log values.
pub fn zero_weights(log_f0: f64, log_f1: f64) -> (f64, f64) {
    let total = log_sum_exp(log_f0, log_f1);
    (log_f1 - total, log_f0 - total)
}

/// Zero-inflated pmf given the count-component log pmf at `y`.
pub fn zero_inflated_log_pmf(y: u64, log_count_pmf: f64, log_omega: f64, log_one_minus_omega: f64) -> f64 {
    if y > 0 {
        log_omega + log_count_pmf
    } else {
        log_sum_exp(log_one_minus_omega, log_omega + log_count_pmf)
    }
}

pub fn zip_log_pmf(y: u64, mean: f64, log_f0: f64, log_f1: f64) -> f64 {
    let (lw, l1w) = zero_weights(log_f0, log_f1);
    zero_inflated_log_pmf(y, poisson_log_pmf(y, mean), lw, l1w)
}

pub fn zinb_log_pmf(y: u64, mean: f64, kappa: f64, log_f0: f64, log_f1: f64) -> f64 {
    let (lw, l1w) = zero_weights(log_f0, log_f1);
    zero_inflated_log_pmf(y, negbin_log_pmf(y, mean, kappa), lw, l1w)
}

/// Multinomial pmf with class weights `exp(log_f)` normalised to probabilities.
pub fn multinomial_log_pmf(counts: &[u32], log_f: &[f64]) -> f64 {
    let n: u64 = counts.iter().map(|&c| c as u64).sum();
    let norm = log_f.iter().copied().fold(f64::NEG_INFINITY, log_sum_exp);
    let mut total = log_factorial(n);
    for (&y, &lf) in counts.iter().zip(log_f) {
        if y > 0 {
            total += y as f64 * (lf - norm) - log_factorial(y as u64);
        }
    }
    total
}

pub fn normal_log_pdf(y: f64, mean: f64, var: f64) -> f64 {
    let e = y - mean;
    -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + e * e / var)
}

/// Joint density of class counts and the gamma latent `phi`; integrating out
/// `phi` gives the multinomial pmf.
pub fn multinomial_augmented_log_density(counts: &[u32], f: &[f64], phi: f64) -> Result<f64> {
    let n: u64 = counts.iter().map(|&c| c as u64).sum();
    if n == 0 {
        return Err(Error::InvalidParameter("augmented multinomial density needs at least one trial".into()));
    }
    let mut total = log_factorial(n) + (n as f64 - 1.0) * phi.ln() - ln_gamma_unchecked(n as f64);
    for (&y, &fj) in counts.iter().zip(f) {
        total += y as f64 * fj.ln() - log_factorial(y as u64) - phi * fj;
    }
    Ok(total)
}

/// Parameters of one observation in the zero-inflated negative binomial.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZinbPoint {
    pub offset: f64,
    pub f: f64,
    pub f0: f64,
    pub f1: f64,
    pub kappa: f64,
}

/// Joint density of `(y, Z, phi, xi)`; summing over `Z` and integrating
/// `phi`, `xi` gives the zero-inflated negative binomial pmf.
pub fn zinb_augmented_log_density(y: u64, z: bool, phi: f64, xi: f64, p: ZinbPoint) -> f64 {
    if !z && y > 0 {
        return f64::NEG_INFINITY;
    }
    let mut total = -phi * (p.f0 + p.f1);
    if z {
        let yf = y as f64;
        total += p.f1.ln() + yf * p.f.ln() - xi * p.offset * p.f;
        total += -ln_gamma_unchecked(p.kappa) - log_factorial(y) + p.kappa * p.kappa.ln() + yf * p.offset.ln()
            + (p.kappa + yf - 1.0) * xi.ln()
            - xi * p.kappa;
    } else {
        total += p.f0.ln();
    }
    total
}

/// Beta-prime prior on the dispersion, density `∝ κ^(a-1) (1+κ)^-(a+b)`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BetaPrime {
    pub a: f64,
    pub b: f64,
}

impl Default for BetaPrime {
    fn default() -> Self {
        Self { a: 5.0, b: 3.0 }
    }
}

impl BetaPrime {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta-prime prior needs a, b > 0 (got {a}, {b})")));
        }
        Ok(Self { a, b })
    }

    pub fn log_density(&self, kappa: f64) -> f64 {
        if kappa <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let log_beta = ln_gamma_unchecked(self.a) + ln_gamma_unchecked(self.b) - ln_gamma_unchecked(self.a + self.b);
        (self.a - 1.0) * kappa.ln() - (self.a + self.b) * kappa.ln_1p() - log_beta
    }

    pub fn mode(&self) -> f64 {
        ((self.a - 1.0) / (self.b + 1.0)).max(0.0)
    }

    pub fn mean(&self) -> Option<f64> {
        (self.b > 1.0).then(|| self.a / (self.b - 1.0))
    }

    pub fn variance(&self) -> Option<f64> {
        (self.b > 2.0).then(|| self.a * (self.a + self.b - 1.0) / ((self.b - 2.0) * (self.b - 1.0).powi(2)))
    }
}
