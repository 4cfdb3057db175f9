//! Special functions and base samplers.

mod bessel;
mod gamma;
mod gig;
mod rng;

use rand::Rng;
use rand_distr::{Distribution, Gamma};

pub use bessel::log_bessel_k;
pub use gamma::{digamma, log_gamma_fn, trigamma};
pub use gig::{log_gig_density, log_gig_norm, sample_gig};
pub use rng::RngStream;

pub(crate) use gamma::{digamma_unchecked, ln_gamma_unchecked, trigamma_unchecked};

use crate::error::{Error, Result};

/// `ln(e^a + e^b)` without overflow.
pub fn log_sum_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if hi == f64::INFINITY {
        return f64::INFINITY;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(mean(exp(xs)))` for a nonempty slice.
pub fn log_mean_exp(xs: &[f64]) -> f64 {
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !hi.is_finite() {
        return hi;
    }
    hi + (xs.iter().map(|x| (x - hi).exp()).sum::<f64>() / xs.len() as f64).ln()
}

/// One draw from Gamma(shape, rate) (Marsaglia-Tsang with the shape < 1 boost).
pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    if !(shape > 0.0 && shape.is_finite()) {
        return Err(Error::Domain { what: "sample_gamma shape", value: shape });
    }
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::Domain { what: "sample_gamma rate", value: rate });
    }
    let dist = Gamma::new(shape, 1.0 / rate).map_err(|e| Error::Numerical(e.to_string()))?;
    // Tiny shapes can underflow to zero; the smallest positive value is the
    // closest representable draw.
    Ok(dist.sample(rng).max(f64::MIN_POSITIVE))
}
