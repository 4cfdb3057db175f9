//! The symmetric log-scale leaf prior
//! `½ GIG(-c, 2d, 0) + ½ GIG(c, 0, 2d)` and its conjugate updates.
//!
//! A leaf whose rows contribute `λ^r exp(-sλ)` to the likelihood has
//! integrated likelihood `[Z(r-c, 2d, 2s) + Z(c+r, 0, 2(d+s))] / 2Z(c, 0, 2d)`
//! and a two-component GIG mixture as full conditional.

use rand::Rng;

use crate::error::{Error, Result};
use crate::special::{
    digamma_unchecked, log_gig_density, log_gig_norm, log_sum_exp, sample_gamma, sample_gig, trigamma_unchecked,
};

/// Statistics below this are treated as zero.
pub const S_FLOOR: f64 = 1e-300;

/// Per-leaf conditional sufficient statistics: `r = Σu`, `s = Σ f₋ₕ v`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LeafSuffStat {
    pub r: f64,
    pub s: f64,
}

impl LeafSuffStat {
    pub fn new(r: f64, s: f64) -> Self {
        Self { r, s }
    }
}

/// Calibrated leaf prior.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LeafPrior {
    pub a0: f64,
    pub m: usize,
    pub c: f64,
    pub d: f64,
    /// Whether `(c, d)` solve the moment equations exactly or come from the
    /// large-`m` approximation.
    pub exact: bool,
    log_norm: f64,
}

/// Solve `trigamma(c) = a0²/m`, `d = exp(digamma(c))`.
pub fn calibrate(a0: f64, m: usize) -> Result<(f64, f64)> {
    check_args(a0, m)?;
    let target = a0 * a0 / m as f64;
    // trigamma(c) ~ 1/c² near 0 and ~ 1/c at infinity.
    let guess = 1.0 / target + 1.0 / target.sqrt();
    let mut lo = 0.25 * guess.min(1.0 / target.sqrt());
    let mut hi = 2.0 * guess + 1.0;
    while trigamma_unchecked(lo) < target {
        lo *= 0.5;
    }
    while trigamma_unchecked(hi) > target {
        hi *= 2.0;
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if trigamma_unchecked(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = if (trigamma_unchecked(lo) - target).abs() < (trigamma_unchecked(hi) - target).abs() { lo } else { hi };
    Ok((c, digamma_unchecked(c).exp()))
}

/// Large-`m` approximation `c ≈ m/a0² + ½`, `d ≈ m/a0²`.
pub fn calibrate_approx(a0: f64, m: usize) -> Result<(f64, f64)> {
    check_args(a0, m)?;
    let base = m as f64 / (a0 * a0);
    Ok((base + 0.5, base))
}

fn check_args(a0: f64, m: usize) -> Result<()> {
    if !(a0 > 0.0 && a0.is_finite()) {
        return Err(Error::InvalidParameter(format!("a0 must be positive, got {a0}")));
    }
    if m == 0 {
        return Err(Error::InvalidParameter("the number of trees must be at least 1".into()));
    }
    Ok(())
}

impl LeafPrior {
    /// Exactly calibrated prior for `m` trees with marginal log-scale SD `a0`.
    pub fn new(a0: f64, m: usize) -> Result<Self> {
        let (c, d) = calibrate(a0, m)?;
        Self::build(a0, m, c, d, true)
    }

    /// Prior using the approximate calibration.
    pub fn approximate(a0: f64, m: usize) -> Result<Self> {
        let (c, d) = calibrate_approx(a0, m)?;
        Self::build(a0, m, c, d, false)
    }

    fn build(a0: f64, m: usize, c: f64, d: f64, exact: bool) -> Result<Self> {
        if !(c > 0.0 && d > 0.0 && c.is_finite() && d.is_finite()) {
            return Err(Error::InvalidParameter(format!("leaf prior needs c, d > 0 (got {c}, {d})")));
        }
        let log_norm = log_gig_norm(c, 0.0, 2.0 * d)?;
        Ok(Self { a0, m, c, d, exact, log_norm })
    }

    /// Log density of the leaf value `λ`.
    pub fn log_density(&self, lambda: f64) -> Result<f64> {
        if !(lambda > 0.0) {
            return Err(Error::Domain { what: "leaf prior density", value: lambda });
        }
        let a = log_gig_density(lambda, -self.c, 2.0 * self.d, 0.0)?;
        let b = log_gig_density(lambda, self.c, 0.0, 2.0 * self.d)?;
        Ok(log_sum_exp(a, b) - std::f64::consts::LN_2)
    }

    /// Prior mean and variance of `ln λ`: `(0, trigamma(c) + (digamma(c) - ln d)²)`.
    pub fn log_moments(&self) -> (f64, f64) {
        let shift = digamma_unchecked(self.c) - self.d.ln();
        (0.0, trigamma_unchecked(self.c) + shift * shift)
    }

    /// Log normalisers of the two posterior components.
    fn component_norms(&self, stat: LeafSuffStat) -> Result<(f64, f64)> {
        let (r, s) = (stat.r, stat.s);
        if !(r >= 0.0 && s >= 0.0 && r.is_finite() && s.is_finite()) {
            return Err(Error::InvalidParameter(format!("leaf statistics must be finite and nonnegative ({r}, {s})")));
        }
        let c = self.c;
        if s < S_FLOOR {
            if r >= c {
                return Err(Error::DivergentLeaf { r, c });
            }
            Ok((log_gig_norm(r - c, 2.0 * self.d, 0.0)?, log_gig_norm(c + r, 0.0, 2.0 * self.d)?))
        } else {
            Ok((log_gig_norm(r - c, 2.0 * self.d, 2.0 * s)?, log_gig_norm(c + r, 0.0, 2.0 * (self.d + s))?))
        }
    }

    /// `ln ∫ λ^r e^{-sλ} p(λ) dλ`.
    pub fn log_marginal(&self, stat: LeafSuffStat) -> Result<f64> {
        if stat.r == 0.0 && stat.s == 0.0 {
            return Ok(0.0);
        }
        let (z1, z2) = self.component_norms(stat)?;
        Ok(log_sum_exp(z1, z2) - std::f64::consts::LN_2 - self.log_norm)
    }

    /// Weight of the first (inverse-gamma-like) component in the posterior.
    pub fn posterior_weight(&self, stat: LeafSuffStat) -> Result<f64> {
        let (z1, z2) = self.component_norms(stat)?;
        Ok(1.0 / (1.0 + (z2 - z1).exp()))
    }

    /// Draw `λ` from its full conditional given the leaf statistics.
    pub fn sample_posterior<R: Rng + ?Sized>(&self, stat: LeafSuffStat, rng: &mut R) -> Result<f64> {
        let weight = self.posterior_weight(stat)?;
        let (r, s) = (stat.r, if stat.s < S_FLOOR { 0.0 } else { stat.s });
        if rng.random::<f64>() < weight {
            sample_gig(r - self.c, 2.0 * self.d, 2.0 * s, rng)
        } else {
            sample_gig(self.c + r, 0.0, 2.0 * (self.d + s), rng)
        }
    }

    /// Prior draw through `λ = W^{±1}`, `W ~ Gamma(c, d)`, with a fair sign.
    pub fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        let w = sample_gamma(self.c, self.d, rng)?;
        Ok(if rng.random::<bool>() { w } else { 1.0 / w })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{trigamma, RngStream};

    #[test]
    fn calibration_solves_moment_equation() {
        for &(a0, m) in &[(3.5 / 2f64.sqrt(), 100), (1.5, 200), (0.1, 1), (10.0, 1), (1.0, 100_000)] {
            let (c, d) = calibrate(a0, m).unwrap();
            let target = a0 * a0 / m as f64;
            assert!(((trigamma(c).unwrap() - target) / target).abs() < 1e-12, "a0={a0} m={m}");
            let prior = LeafPrior::new(a0, m).unwrap();
            let (_, var) = prior.log_moments();
            assert!(((var - target) / target).abs() < 1e-12);
            assert!(d > 0.0);
        }
    }

    #[test]
    fn approximate_formula() {
        let (c, d) = calibrate_approx(3.5 / 2f64.sqrt(), 100).unwrap();
        assert!((c - (100.0 / 6.125 + 0.5)).abs() < 1e-12);
        assert!((d - 100.0 / 6.125).abs() < 1e-12);
        let (c, d) = calibrate_approx(1.5, 200).unwrap();
        assert!((c - 89.388_888_888_888_89).abs() < 1e-9 && (d - 88.888_888_888_888_89).abs() < 1e-9);
        assert!(calibrate(0.0, 5).is_err() && calibrate(1.0, 0).is_err());
    }

    #[test]
    fn empty_leaf_and_divergence() {
        let prior = LeafPrior::new(1.0, 10).unwrap();
        assert_eq!(prior.log_marginal(LeafSuffStat::new(0.0, 0.0)).unwrap(), 0.0);
        assert!(prior.log_marginal(LeafSuffStat::new(0.0, 1e-320)).unwrap().abs() < 1e-12);
        assert!(matches!(
            prior.log_marginal(LeafSuffStat::new(prior.c + 1.0, 0.0)),
            Err(Error::DivergentLeaf { .. })
        ));
        assert!(prior.log_marginal(LeafSuffStat::new(2.0, 0.0)).is_ok());
    }

    #[test]
    fn posterior_draws_shrink_with_exposure() {
        let prior = LeafPrior::new(1.0, 10).unwrap();
        let mut rng = RngStream::new(3, 0);
        let mut medians = Vec::new();
        for &s in &[0.1, 1.0, 10.0, 100.0] {
            let mut draws: Vec<f64> =
                (0..4001).map(|_| prior.sample_posterior(LeafSuffStat::new(2.0, s), &mut rng).unwrap()).collect();
            draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
            medians.push(draws[2000]);
        }
        assert!(medians.windows(2).all(|w| w[1] < w[0]), "{medians:?}");
    }
}
