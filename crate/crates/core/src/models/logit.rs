use rand_distr::{Binomial, Distribution};

use super::likelihood::multinomial_log_pmf;
use super::multinomial::check_counts;
use super::{sweep_forests, Draw, Family, ForestSpec, Model, PredictionContext, Response, SamplerOptions, Sweep};
use crate::error::{Error, Result};
use crate::forest::{Forest, MoveStats};
use crate::leaf_prior::LeafPrior;
use crate::special::{log_sum_exp, sample_gamma, RngStream};
use crate::tree::BinnedData;

/// Binary logistic regression with the reference odds fixed at one:
/// `P(y = 1) = f / (1 + f)`. A single forest of `2m` trees at log-scale
/// spread `√2 a0` carries the same prior on the log odds as two
/// independent `(m, a0)` class functions.
pub struct IdentifiedLogit {
    data: BinnedData,
    /// Per-row `[failures, successes]`.
    counts: Vec<Vec<u32>>,
    successes: Vec<f64>,
    forest: Forest,
    phi: Vec<f64>,
    latent_rng: RngStream,
    forest_rng: RngStream,
    options: SamplerOptions,
    zeros: Vec<f64>,
}

impl IdentifiedLogit {
    /// `spec` describes one class function of the matching unidentified model.
    pub fn new(data: BinnedData, counts: Vec<Vec<u32>>, spec: ForestSpec, options: SamplerOptions) -> Result<Self> {
        check_counts(&counts, data.n_rows(), 2)?;
        let prior = LeafPrior::new(std::f64::consts::SQRT_2 * spec.a0, 2 * spec.m)?;
        let n = data.n_rows();
        Ok(Self {
            forest: Forest::new(2 * spec.m, prior, &data),
            successes: counts.iter().map(|c| c[1] as f64).collect(),
            counts,
            phi: vec![0.0; n],
            zeros: vec![0.0; n],
            latent_rng: options.latent_stream(),
            forest_rng: options.function_stream(0),
            data,
            options,
        })
    }

    pub fn forest(&self) -> &Forest {
        &self.forest
    }
}

impl Model for IdentifiedLogit {
    fn family(&self) -> Family {
        Family::BinaryLogitIdentified
    }

    fn n_rows(&self) -> usize {
        self.data.n_rows()
    }

    fn step(&mut self, _sweep: Sweep) -> Result<()> {
        if !self.options.prior_only {
            for (i, phi) in self.phi.iter_mut().enumerate() {
                let n = self.counts[i][0] + self.counts[i][1];
                *phi = if n == 0 {
                    0.0
                } else {
                    let rate = log_sum_exp(0.0, self.forest.log_fit()[i]).exp();
                    sample_gamma(n as f64, rate, &mut self.latent_rng)?
                };
            }
        }
        let (u, v) = if self.options.prior_only { (&self.zeros, &self.zeros) } else { (&self.successes, &self.phi) };
        sweep_forests(vec![(&mut self.forest, &mut self.forest_rng, u, v)], &self.data, &self.options.trees)
    }

    fn log_likelihood(&self) -> Vec<f64> {
        self.counts.iter().zip(self.forest.log_fit()).map(|(c, &lf)| multinomial_log_pmf(c, &[0.0, lf])).collect()
    }

    fn draw(&self) -> Draw {
        Draw { functions: vec![self.forest.trees().to_vec()], kappa: None, sigma2: None, count_component: None }
    }

    fn log_fits(&self) -> Vec<&[f64]> {
        vec![self.forest.log_fit()]
    }

    fn move_stats(&self) -> Vec<MoveStats> {
        vec![self.forest.move_stats()]
    }

    fn simulate_response(&self, rng: &mut RngStream) -> Result<Response> {
        let mut out = Vec::with_capacity(self.n_rows());
        for (c, &lf) in self.counts.iter().zip(self.forest.log_fit()) {
            let n = c[0] + c[1];
            let p = (lf - log_sum_exp(0.0, lf)).exp();
            let k = Binomial::new(n as u64, p).map_err(|e| Error::Numerical(e.to_string()))?.sample(rng) as u32;
            out.push(vec![n - k, k]);
        }
        Ok(Response::Classes(out))
    }

    fn set_response(&mut self, response: Response) -> Result<()> {
        match response {
            Response::Classes(counts) => {
                check_counts(&counts, self.n_rows(), 2)?;
                self.successes = counts.iter().map(|c| c[1] as f64).collect();
                self.counts = counts;
                Ok(())
            }
            _ => Err(Error::InvalidParameter("binary logit needs [failures, successes] counts".into())),
        }
    }

    fn prediction_context(&self) -> PredictionContext {
        PredictionContext { offset: 1.0, center: 0.0, n_classes: 2 }
    }
}
