use rand_distr::{Distribution, StandardNormal};

use super::likelihood::normal_log_pdf;
use super::{sweep_forests, Draw, Family, ForestSpec, Model, PredictionContext, Response, SamplerOptions, Sweep};
use crate::error::{Error, Result};
use crate::forest::{Forest, MoveStats};
use crate::gaussian::{default_sigma_mu, sample_sigma0, GaussForest, SigmaPrior};
use crate::special::{sample_gamma, RngStream};
use crate::tree::BinnedData;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HetSettings {
    /// Trees in the mean function.
    pub mean_trees: usize,
    /// Leaf-scale divisor in `σ_μ = 0.5 (y_max - y_min) / (k √m)`.
    pub k: f64,
    /// Log-linear precision multiplier; `None` gives constant variance.
    pub precision: Option<ForestSpec>,
    pub nu: f64,
    /// Prior quantile at which the sample standard deviation of `y` sits.
    pub sigma_quantile: f64,
}

impl Default for HetSettings {
    fn default() -> Self {
        Self { mean_trees: 200, k: 2.0, precision: Some(ForestSpec::new(200, 1.5)), nu: 3.0, sigma_quantile: 0.9 }
    }
}

/// Normal regression `y = f(x) + e` with `Var(e) = σ0² / τ(x)`, where `τ`
/// is a log-linear precision multiplier. With `τ ≡ 1` this is the
/// homoscedastic sum-of-trees model.
pub struct HetModel {
    data: BinnedData,
    y: Vec<f64>,
    center: f64,
    mean: GaussForest,
    precision: Option<Forest>,
    sigma2: f64,
    sigma_prior: SigmaPrior,
    latent_rng: RngStream,
    mean_rng: RngStream,
    precision_rng: RngStream,
    options: SamplerOptions,
    variances: Vec<f64>,
    residuals: Vec<f64>,
    multipliers: Vec<f64>,
    half: Vec<f64>,
    scaled_sq: Vec<f64>,
    zeros: Vec<f64>,
}

impl HetModel {
    pub fn new(data: BinnedData, y: Vec<f64>, settings: HetSettings, options: SamplerOptions) -> Result<Self> {
        let n = data.n_rows();
        if y.len() != n || n < 2 {
            return Err(Error::InvalidParameter(format!("continuous model needs {n} >= 2 responses")));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("responses must be finite".into()));
        }
        let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi <= lo {
            return Err(Error::InvalidParameter("continuous response is constant".into()));
        }
        let center = 0.5 * (lo + hi);
        let mean_y = y.iter().sum::<f64>() / n as f64;
        let sd = (y.iter().map(|v| (v - mean_y).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
        let sigma_prior = SigmaPrior::from_sd_estimate(sd, settings.nu, settings.sigma_quantile)?;
        let sigma_mu = default_sigma_mu(lo, hi, settings.k, settings.mean_trees);
        let precision = match settings.precision {
            Some(spec) => Some(Forest::new(spec.m, spec.leaf_prior()?, &data)),
            None => None,
        };
        Ok(Self {
            y: y.iter().map(|v| v - center).collect(),
            center,
            mean: GaussForest::new(settings.mean_trees, sigma_mu, &data),
            precision,
            sigma2: sd * sd,
            sigma_prior,
            latent_rng: options.latent_stream(),
            mean_rng: options.function_stream(0),
            precision_rng: options.function_stream(1),
            options,
            variances: vec![0.0; n],
            residuals: vec![0.0; n],
            multipliers: vec![1.0; n],
            half: vec![0.5; n],
            scaled_sq: vec![0.0; n],
            zeros: vec![0.0; n],
            data,
        })
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn sigma_prior(&self) -> SigmaPrior {
        self.sigma_prior
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn mean_forest(&self) -> &GaussForest {
        &self.mean
    }

    pub fn precision_forest(&self) -> Option<&Forest> {
        self.precision.as_ref()
    }

    fn precision_at(&self, i: usize) -> f64 {
        self.precision.as_ref().map_or(1.0, |f| f.log_fit()[i].exp())
    }

    fn refresh_multipliers(&mut self) {
        for i in 0..self.multipliers.len() {
            self.multipliers[i] = 1.0 / self.precision_at(i);
        }
    }
}

impl Model for HetModel {
    fn family(&self) -> Family {
        if self.precision.is_some() {
            Family::Het
        } else {
            Family::Gaussian
        }
    }

    fn n_rows(&self) -> usize {
        self.y.len()
    }

    fn step(&mut self, _sweep: Sweep) -> Result<()> {
        let live = !self.options.prior_only;
        self.refresh_multipliers();
        for (w, &mult) in self.variances.iter_mut().zip(&self.multipliers) {
            *w = if live { self.sigma2 * mult } else { f64::INFINITY };
        }
        self.mean.sweep(&self.y, &self.variances, &self.data, &self.options.trees, &mut self.mean_rng)?;
        for ((e, &yi), &fi) in self.residuals.iter_mut().zip(&self.y).zip(self.mean.fit()) {
            *e = yi - fi;
        }
        if let Some(precision) = self.precision.as_mut() {
            for (s, &e) in self.scaled_sq.iter_mut().zip(&self.residuals) {
                *s = e * e / (2.0 * self.sigma2);
            }
            let (u, v) = if live { (&self.half, &self.scaled_sq) } else { (&self.zeros, &self.zeros) };
            sweep_forests(vec![(precision, &mut self.precision_rng, u, v)], &self.data, &self.options.trees)?;
            self.refresh_multipliers();
        }
        self.sigma2 = if live {
            sample_sigma0(&self.residuals, &self.multipliers, self.sigma_prior, &mut self.latent_rng)?
        } else {
            let p = self.sigma_prior;
            1.0 / sample_gamma(0.5 * p.nu, 0.5 * p.nu * p.lambda, &mut self.latent_rng)?
        };
        Ok(())
    }

    fn log_likelihood(&self) -> Vec<f64> {
        (0..self.y.len())
            .map(|i| normal_log_pdf(self.y[i], self.mean.fit()[i], self.sigma2 / self.precision_at(i)))
            .collect()
    }

    fn draw(&self) -> Draw {
        let mut functions = vec![self.mean.trees().to_vec()];
        if let Some(p) = &self.precision {
            functions.push(p.trees().to_vec());
        }
        Draw { functions, kappa: None, sigma2: Some(self.sigma2), count_component: None }
    }

    fn log_fits(&self) -> Vec<&[f64]> {
        let mut out = vec![self.mean.fit()];
        if let Some(p) = &self.precision {
            out.push(p.log_fit());
        }
        out
    }

    fn move_stats(&self) -> Vec<MoveStats> {
        let mut out = vec![self.mean.move_stats()];
        out.extend(self.precision.iter().map(Forest::move_stats));
        out
    }

    fn simulate_response(&self, rng: &mut RngStream) -> Result<Response> {
        let y = (0..self.y.len())
            .map(|i| {
                let z: f64 = StandardNormal.sample(rng);
                self.center + self.mean.fit()[i] + (self.sigma2 / self.precision_at(i)).sqrt() * z
            })
            .collect();
        Ok(Response::Continuous(y))
    }

    fn set_response(&mut self, response: Response) -> Result<()> {
        match response {
            Response::Continuous(y) if y.len() == self.y.len() => {
                self.y = y.iter().map(|v| v - self.center).collect();
                Ok(())
            }
            _ => Err(Error::InvalidParameter("continuous model needs one response per row".into())),
        }
    }

    fn prediction_context(&self) -> PredictionContext {
        PredictionContext { offset: 1.0, center: self.center, n_classes: 0 }
    }
}
