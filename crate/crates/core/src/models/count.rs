use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use super::likelihood::{negbin_log_pmf, poisson_log_pmf, zero_inflated_log_pmf, zero_weights, BetaPrime};
use super::{sweep_forests, Draw, Family, ForestSpec, Model, PredictionContext, Response, SamplerOptions, Sweep};
use crate::error::{Error, Result};
use crate::forest::{Forest, MoveStats};
use crate::special::{log_sum_exp, sample_gamma, RngStream};
use crate::tree::BinnedData;

/// Initial random-walk scale for `ln κ`.
const KAPPA_STEP: f64 = 0.3;
const KAPPA_TARGET_ACCEPT: f64 = 0.44;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CountKind {
    Poisson,
    NegBin,
    Zip,
    Zinb,
}

impl CountKind {
    pub fn has_dispersion(self) -> bool {
        matches!(self, CountKind::NegBin | CountKind::Zinb)
    }

    pub fn zero_inflated(self) -> bool {
        matches!(self, CountKind::Zip | CountKind::Zinb)
    }

    pub fn family(self) -> Family {
        match self {
            CountKind::Poisson => Family::Poisson,
            CountKind::NegBin => Family::Negbin,
            CountKind::Zip => Family::Zip,
            CountKind::Zinb => Family::Zinb,
        }
    }

    pub fn from_family(family: Family) -> Option<Self> {
        match family {
            Family::Poisson => Some(CountKind::Poisson),
            Family::Negbin => Some(CountKind::NegBin),
            Family::Zip => Some(CountKind::Zip),
            Family::Zinb => Some(CountKind::Zinb),
            _ => None,
        }
    }
}

/// Poisson, negative binomial and their zero-inflated versions. The count
/// mean is `offset_i f(x_i)`; zero-inflated models add `f0`, `f1` with
/// non-inflation probability `ω = f1 / (f0 + f1)`.
pub struct CountModel {
    kind: CountKind,
    data: BinnedData,
    y: Vec<u64>,
    offset: Vec<f64>,
    base_offset: f64,
    mean: Forest,
    zero: Vec<Forest>,
    kappa: f64,
    kappa_prior: BetaPrime,
    log_step: f64,
    kappa_moves: (u64, u64),
    z: Vec<bool>,
    xi: Vec<f64>,
    phi: Vec<f64>,
    latent_rng: RngStream,
    mean_rng: RngStream,
    zero_rngs: Vec<RngStream>,
    options: SamplerOptions,
    u_mean: Vec<f64>,
    v_mean: Vec<f64>,
    u_zero: [Vec<f64>; 2],
    zeros: Vec<f64>,
}

impl CountModel {
    /// `offset` has one positive entry per row; `base_offset` is used for
    /// prediction at new rows. `zero_spec` is ignored without zero inflation.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        kind: CountKind,
        data: BinnedData,
        y: Vec<u64>,
        offset: Vec<f64>,
        base_offset: f64,
        mean_spec: ForestSpec,
        zero_spec: ForestSpec,
        kappa_prior: BetaPrime,
        options: SamplerOptions,
    ) -> Result<Self> {
        let n = data.n_rows();
        if y.len() != n || offset.len() != n {
            return Err(Error::InvalidParameter(format!("count model needs {n} responses and offsets")));
        }
        if let Some(&bad) = offset.iter().find(|&&o| !(o > 0.0 && o.is_finite())) {
            return Err(Error::InvalidParameter(format!("offsets must be positive and finite (got {bad})")));
        }
        let mean = Forest::new(mean_spec.m, mean_spec.leaf_prior()?, &data);
        let zero = if kind.zero_inflated() {
            let prior = zero_spec.leaf_prior()?;
            vec![Forest::new(zero_spec.m, prior, &data), Forest::new(zero_spec.m, prior, &data)]
        } else {
            Vec::new()
        };
        let zero_rngs = (0..zero.len()).map(|j| options.function_stream(j + 1)).collect();
        Ok(Self {
            kind,
            z: y.iter().map(|_| true).collect(),
            y,
            offset,
            base_offset,
            mean,
            zero,
            kappa: 1.0,
            kappa_prior,
            log_step: KAPPA_STEP.ln(),
            kappa_moves: (0, 0),
            xi: vec![1.0; n],
            phi: vec![0.0; n],
            latent_rng: options.latent_stream(),
            mean_rng: options.function_stream(0),
            zero_rngs,
            options,
            u_mean: vec![0.0; n],
            v_mean: vec![0.0; n],
            u_zero: [vec![0.0; n], vec![0.0; n]],
            zeros: vec![0.0; n],
            data,
        })
    }

    pub fn kind(&self) -> CountKind {
        self.kind
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Start the dispersion chain at `kappa`.
    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    /// Accepted and proposed dispersion moves.
    pub fn kappa_moves(&self) -> (u64, u64) {
        self.kappa_moves
    }

    pub fn count_component(&self) -> &[bool] {
        &self.z
    }

    pub fn mean_forest(&self) -> &Forest {
        &self.mean
    }

    pub fn zero_forests(&self) -> &[Forest] {
        &self.zero
    }

    fn count_mean(&self, i: usize) -> f64 {
        self.offset[i] * self.mean.log_fit()[i].exp()
    }

    fn log_omega(&self, i: usize) -> (f64, f64) {
        zero_weights(self.zero[0].log_fit()[i], self.zero[1].log_fit()[i])
    }

    fn row_log_lik(&self, i: usize, kappa: f64) -> f64 {
        let y = self.y[i];
        let mu = self.count_mean(i);
        let count = if self.kind.has_dispersion() { negbin_log_pmf(y, mu, kappa) } else { poisson_log_pmf(y, mu) };
        if self.kind.zero_inflated() {
            let (lw, l1w) = self.log_omega(i);
            zero_inflated_log_pmf(y, count, lw, l1w)
        } else {
            count
        }
    }

    /// Log posterior of the dispersion given the functions, with the
    /// inflation indicators integrated out.
    pub fn kappa_log_posterior(&self, kappa: f64) -> f64 {
        let prior = self.kappa_prior.log_density(kappa);
        if self.options.prior_only || !prior.is_finite() {
            return prior;
        }
        prior + (0..self.y.len()).map(|i| self.row_log_lik(i, kappa)).sum::<f64>()
    }

    fn update_kappa(&mut self, sweep: Sweep) {
        let current = self.kappa_log_posterior(self.kappa);
        let z: f64 = StandardNormal.sample(&mut self.latent_rng);
        let proposal = self.kappa * (self.log_step.exp() * z).exp();
        let log_ratio = self.kappa_log_posterior(proposal) - current + proposal.ln() - self.kappa.ln();
        let accept_prob = if log_ratio.is_nan() { 0.0 } else { log_ratio.min(0.0).exp() };
        self.kappa_moves.1 += 1;
        if self.latent_rng.random::<f64>() < accept_prob {
            self.kappa = proposal;
            self.kappa_moves.0 += 1;
        }
        if sweep.burn_in {
            self.log_step += (accept_prob - KAPPA_TARGET_ACCEPT) / (sweep.iteration as f64 + 1.0).powf(0.6);
        }
    }

    fn update_latents(&mut self) -> Result<()> {
        let n = self.y.len();
        for i in 0..n {
            let mu = self.count_mean(i);
            if self.kind.zero_inflated() {
                self.z[i] = self.y[i] > 0 || {
                    let (lw, l1w) = self.log_omega(i);
                    let lp0 = if self.kind.has_dispersion() { negbin_log_pmf(0, mu, self.kappa) } else { -mu };
                    let p = (lw + lp0 - log_sum_exp(l1w, lw + lp0)).exp();
                    self.latent_rng.random::<f64>() < p
                };
            }
            if self.kind.has_dispersion() {
                self.xi[i] = if self.z[i] {
                    sample_gamma(self.kappa + self.y[i] as f64, self.kappa + mu, &mut self.latent_rng)?
                } else {
                    0.0
                };
            }
            if self.kind.zero_inflated() {
                let rate = log_sum_exp(self.zero[0].log_fit()[i], self.zero[1].log_fit()[i]).exp();
                self.phi[i] = sample_gamma(1.0, rate, &mut self.latent_rng)?;
            }
        }
        for i in 0..n {
            let zi = if self.z[i] { 1.0 } else { 0.0 };
            self.u_mean[i] = zi * self.y[i] as f64;
            self.v_mean[i] = zi * self.xi[i] * self.offset[i];
            self.u_zero[0][i] = 1.0 - zi;
            self.u_zero[1][i] = zi;
        }
        Ok(())
    }
}

impl Model for CountModel {
    fn family(&self) -> Family {
        self.kind.family()
    }

    fn n_rows(&self) -> usize {
        self.y.len()
    }

    fn step(&mut self, sweep: Sweep) -> Result<()> {
        if self.kind.has_dispersion() {
            self.update_kappa(sweep);
        }
        if !self.options.prior_only {
            self.update_latents()?;
        }
        let Self { mean, zero, mean_rng, zero_rngs, u_mean, v_mean, u_zero, phi, zeros, data, options, .. } = self;
        let live = !options.prior_only;
        let (um, vm): (&[f64], &[f64]) = if live { (u_mean, v_mean) } else { (zeros, zeros) };
        let mut jobs = vec![(mean, mean_rng, um, vm)];
        for ((f, rng), u) in zero.iter_mut().zip(zero_rngs.iter_mut()).zip(u_zero.iter()) {
            let (u, v) = if live { (u.as_slice(), phi.as_slice()) } else { (zeros.as_slice(), zeros.as_slice()) };
            jobs.push((f, rng, u, v));
        }
        sweep_forests(jobs, data, &options.trees)
    }

    fn log_likelihood(&self) -> Vec<f64> {
        (0..self.y.len()).map(|i| self.row_log_lik(i, self.kappa)).collect()
    }

    fn draw(&self) -> Draw {
        let mut functions = vec![self.mean.trees().to_vec()];
        functions.extend(self.zero.iter().map(|f| f.trees().to_vec()));
        Draw {
            functions,
            kappa: self.kind.has_dispersion().then_some(self.kappa),
            sigma2: None,
            count_component: self.kind.zero_inflated().then(|| self.z.clone()),
        }
    }

    fn log_fits(&self) -> Vec<&[f64]> {
        let mut out = vec![self.mean.log_fit()];
        out.extend(self.zero.iter().map(|f| f.log_fit()));
        out
    }

    fn move_stats(&self) -> Vec<MoveStats> {
        let mut out = vec![self.mean.move_stats()];
        out.extend(self.zero.iter().map(Forest::move_stats));
        out
    }

    fn simulate_response(&self, rng: &mut RngStream) -> Result<Response> {
        let mut y = Vec::with_capacity(self.y.len());
        for i in 0..self.y.len() {
            if self.kind.zero_inflated() {
                let (lw, _) = self.log_omega(i);
                if rng.random::<f64>() >= lw.exp() {
                    y.push(0);
                    continue;
                }
            }
            let mut rate = self.count_mean(i);
            if self.kind.has_dispersion() {
                rate *= sample_gamma(self.kappa, self.kappa, rng)?;
            }
            let draw = if rate > 0.0 {
                Poisson::new(rate).map_err(|e| Error::Numerical(e.to_string()))?.sample(rng) as u64
            } else {
                0
            };
            y.push(draw);
        }
        Ok(Response::Counts(y))
    }

    fn set_response(&mut self, response: Response) -> Result<()> {
        match response {
            Response::Counts(y) if y.len() == self.y.len() => {
                for (z, &yi) in self.z.iter_mut().zip(&y) {
                    *z = *z || yi > 0;
                }
                self.y = y;
                Ok(())
            }
            _ => Err(Error::InvalidParameter("count model needs one count per row".into())),
        }
    }

    fn prediction_context(&self) -> PredictionContext {
        PredictionContext { offset: self.base_offset, center: 0.0, n_classes: 0 }
    }
}
