//! Posterior summaries computed from stored draws.

use rand::seq::index::sample;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::special::{log_mean_exp, RngStream};

/// Pointwise log-likelihoods, one row per posterior draw.
#[derive(Clone, Debug, PartialEq)]
pub struct LogLikMatrix {
    n_draws: usize,
    n_obs: usize,
    values: Vec<f64>,
}

impl LogLikMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_obs = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_obs) {
            return Err(Error::InvalidParameter("log-likelihood rows differ in length".into()));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite pointwise log-likelihood".into()));
        }
        Ok(Self { n_draws: rows.len(), n_obs, values: rows.concat() })
    }

    pub fn n_draws(&self) -> usize {
        self.n_draws
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    fn column(&self, i: usize) -> Vec<f64> {
        (0..self.n_draws).map(|s| self.values[s * self.n_obs + i]).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Waic {
    /// Log pointwise predictive density.
    pub lpd: f64,
    /// Effective number of parameters.
    pub p_waic: f64,
    pub waic: f64,
}

pub fn waic(ll: &LogLikMatrix) -> Result<Waic> {
    if ll.n_draws < 2 {
        return Err(Error::InvalidParameter(format!("WAIC needs at least 2 draws (got {})", ll.n_draws)));
    }
    let mut lpd = 0.0;
    let mut p_waic = 0.0;
    for i in 0..ll.n_obs {
        let col = ll.column(i);
        lpd += log_mean_exp(&col);
        p_waic += sample_variance(&col);
    }
    Ok(Waic { lpd, p_waic, waic: -2.0 * lpd + 2.0 * p_waic })
}

fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Effective sample size with autocorrelations truncated by Geyer's initial
/// positive sequence. A constant chain has ESS equal to its length.
pub fn ess(chain: &[f64]) -> Result<f64> {
    let n = chain.len();
    if n < 10 {
        return Err(Error::InvalidParameter(format!("ESS needs at least 10 draws (got {n})")));
    }
    let mean = chain.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = chain.iter().map(|x| x - mean).collect();
    let autocov = |lag: usize| -> f64 {
        centered[..n - lag].iter().zip(&centered[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64
    };
    let gamma0 = autocov(0);
    if gamma0 <= f64::EPSILON * mean.abs().max(1.0).powi(2) {
        return Ok(n as f64);
    }
    // Sum of consecutive autocovariance pairs while they stay positive.
    let mut pair_sum = 0.0;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = autocov(lag) + autocov(lag + 1);
        if pair <= 0.0 {
            break;
        }
        pair_sum += pair;
        lag += 2;
    }
    let tau = (-1.0 + 2.0 * pair_sum / gamma0).max(1.0 / n as f64);
    Ok(n as f64 / tau)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PdOptions {
    /// Fraction of training rows whose individual curves are reported.
    pub subsample: f64,
    /// Subtract every curve's value at this point.
    pub center_at: Option<f64>,
    pub seed: u64,
}

impl Default for PdOptions {
    fn default() -> Self {
        Self { subsample: 0.1, center_at: None, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndividualCurve {
    pub row: usize,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PartialDependence {
    pub var: usize,
    pub grid: Vec<f64>,
    /// Posterior mean of the averaged functional at each grid point.
    pub mean: Vec<f64>,
    /// Averaged functional per draw.
    pub draws: Vec<Vec<f64>>,
    /// Posterior-mean curves of individual training rows.
    pub individual: Vec<IndividualCurve>,
}

/// Partial dependence of `functional(draw, row)` on predictor `var`: for
/// every grid value the functional is averaged over the training rows with
/// column `var` replaced by that value.
pub fn partial_dependence<D, F>(
    rows: &[Vec<f64>],
    var: usize,
    grid: &[f64],
    draws: &[D],
    functional: F,
    options: &PdOptions,
) -> Result<PartialDependence>
where
    F: Fn(&D, &[f64]) -> f64,
{
    if grid.is_empty() {
        return Err(Error::InvalidParameter("partial dependence grid is empty".into()));
    }
    if rows.is_empty() || draws.is_empty() {
        return Err(Error::InvalidParameter("partial dependence needs rows and draws".into()));
    }
    if rows.iter().any(|r| var >= r.len()) {
        return Err(Error::InvalidParameter(format!("predictor {var} is out of range")));
    }
    if !(options.subsample > 0.0 && options.subsample <= 1.0) {
        return Err(Error::InvalidParameter(format!("subsample fraction must lie in (0, 1] (got {})", options.subsample)));
    }
    let points: Vec<f64> = grid.iter().copied().chain(options.center_at).collect();
    let n = rows.len();
    // per_row[k][i]: functional at point k for row i, summed over draws.
    let mut per_row = vec![vec![0.0; n]; points.len()];
    let mut draw_curves = Vec::with_capacity(draws.len());
    let mut row = vec![0.0; rows[0].len()];
    for d in draws {
        let mut curve = Vec::with_capacity(points.len());
        for (k, &t) in points.iter().enumerate() {
            let mut total = 0.0;
            for (i, r) in rows.iter().enumerate() {
                row.clear();
                row.extend_from_slice(r);
                row[var] = t;
                let v = functional(d, &row);
                per_row[k][i] += v;
                total += v;
            }
            curve.push(total / n as f64);
        }
        draw_curves.push(curve);
    }
    let s = draws.len() as f64;
    let center = |curve: &[f64]| -> Vec<f64> {
        let shift = if options.center_at.is_some() { curve[grid.len()] } else { 0.0 };
        curve[..grid.len()].iter().map(|v| v - shift).collect()
    };
    let mean_full: Vec<f64> =
        (0..points.len()).map(|k| draw_curves.iter().map(|c| c[k]).sum::<f64>() / s).collect();
    let n_keep = ((options.subsample * n as f64).round() as usize).clamp(1, n);
    let mut picked = sample(&mut RngStream::new(options.seed, 0), n, n_keep).into_vec();
    picked.sort_unstable();
    let individual = picked
        .into_iter()
        .map(|i| {
            let curve: Vec<f64> = (0..points.len()).map(|k| per_row[k][i] / s).collect();
            IndividualCurve { row: i, values: center(&curve) }
        })
        .collect();
    Ok(PartialDependence {
        var,
        grid: grid.to_vec(),
        mean: center(&mean_full),
        draws: draw_curves.iter().map(|c| center(c)).collect(),
        individual,
    })
}
