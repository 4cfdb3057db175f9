//! Mixing comparison of the identified and unidentified binary logit
//! parameterizations on `f*(x) = 12 (x - 0.5)` with evenly placed covariates.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ConfigError;
use super::CliError;
use crate::diagnostics::ess;
use crate::forest::TreeSettings;
use crate::models::{Family, ForestSpec, IdentifiedLogit, Model, Multinomial, SamplerOptions, Sweep};
use crate::special::RngStream;
use crate::tree::{BinnedData, CutpointGrid, Design, TreePrior};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct EssConfig {
    pub replicates: usize,
    pub n: usize,
    pub iterations: usize,
    pub burn_in: usize,
    /// Trees per class function; the identified forest has twice as many.
    pub m: usize,
    pub a0: f64,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
}

impl Default for EssConfig {
    fn default() -> Self {
        Self {
            replicates: 25,
            n: 100,
            iterations: 6000,
            burn_in: 1000,
            m: 50,
            // Prior log odds within ±3 with probability 0.95.
            a0: 3.0 / (1.959963984540054 * std::f64::consts::SQRT_2),
            alpha: 0.95,
            beta: 2.0,
            seed: 0,
        }
    }
}

impl EssConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        if self.replicates == 0 || self.n < 2 {
            return Err(ConfigError("need at least one replicate and two rows".into()));
        }
        if self.iterations < self.burn_in + 10 {
            return Err(ConfigError("need at least 10 kept iterations".into()));
        }
        if self.m == 0 || !(self.a0 > 0.0 && self.a0.is_finite()) {
            return Err(ConfigError(format!("invalid forest prior (m={}, a0={})", self.m, self.a0)));
        }
        TreePrior::new(self.alpha, self.beta).map_err(|e| ConfigError(e.to_string()))?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParameterizationEss {
    pub family: Family,
    /// ESS of the log odds at each covariate value, averaged over replicates.
    pub average_ess: Vec<f64>,
    pub min_average_ess: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EssReport {
    pub config: EssConfig,
    pub x: Vec<f64>,
    pub true_log_odds: Vec<f64>,
    pub identified: ParameterizationEss,
    pub unidentified: ParameterizationEss,
}

pub fn true_log_odds(x: f64) -> f64 {
    12.0 * (x - 0.5)
}

fn log_odds_ess(model: &mut dyn Model, config: &EssConfig, log_odds: impl Fn(&dyn Model, usize) -> f64) -> Result<Vec<f64>, CliError> {
    let kept = config.iterations - config.burn_in;
    let mut chains = vec![Vec::with_capacity(kept); config.n];
    for it in 0..config.iterations {
        model
            .step(Sweep { iteration: it, burn_in: it < config.burn_in })
            .map_err(|e| CliError::Numerical(format!("sweep {it}: {e}")))?;
        if it >= config.burn_in {
            for (i, c) in chains.iter_mut().enumerate() {
                c.push(log_odds(model, i));
            }
        }
    }
    chains.iter().map(|c| Ok(ess(c)?)).collect()
}

fn replicate(config: &EssConfig, r: usize, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let mut data_rng = RngStream::new(config.seed, r as u64);
    let counts: Vec<Vec<u32>> = x
        .iter()
        .map(|&xi| {
            let p = 1.0 / (1.0 + (-true_log_odds(xi)).exp());
            let y = u32::from(data_rng.random::<f64>() < p);
            vec![1 - y, y]
        })
        .collect();
    let design = Design::new(x.len(), 1, x.to_vec());
    let grid = CutpointGrid::from_design(&design, CutpointGrid::DEFAULT_MAX_CUTS);
    let binned = BinnedData::new(&design, &grid);
    let options = SamplerOptions {
        trees: TreeSettings { prior: TreePrior { alpha: config.alpha, beta: config.beta }, ..TreeSettings::default() },
        seed: config.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(r as u64 + 1),
        prior_only: false,
    };
    let spec = ForestSpec::new(config.m, config.a0);
    let mut id = IdentifiedLogit::new(binned.clone(), counts.clone(), spec, options)?;
    let id_ess = log_odds_ess(&mut id, config, |m, i| m.log_fits()[0][i])?;
    let mut unid = Multinomial::new(binned, counts, 2, spec, options)?;
    let unid_ess = log_odds_ess(&mut unid, config, |m, i| {
        let f = m.log_fits();
        f[1][i] - f[0][i]
    })?;
    Ok((id_ess, unid_ess))
}

/// Fit both parameterizations to `replicates` simulated datasets and
/// average the per-covariate ESS of the log odds.
pub fn ess_experiment(config: &EssConfig) -> Result<EssReport, CliError> {
    config.validate()?;
    let x: Vec<f64> = (0..config.n).map(|i| (i as f64 + 0.5) / config.n as f64).collect();
    let results: Vec<(Vec<f64>, Vec<f64>)> =
        (0..config.replicates).into_par_iter().map(|r| replicate(config, r, &x)).collect::<Result<_, _>>()?;
    let average = |pick: fn(&(Vec<f64>, Vec<f64>)) -> &Vec<f64>| -> Vec<f64> {
        (0..config.n).map(|i| results.iter().map(|res| pick(res)[i]).sum::<f64>() / config.replicates as f64).collect()
    };
    let summarize = |family, average_ess: Vec<f64>| {
        let min_average_ess = average_ess.iter().copied().fold(f64::INFINITY, f64::min);
        ParameterizationEss { family, average_ess, min_average_ess }
    };
    Ok(EssReport {
        config: config.clone(),
        true_log_odds: x.iter().map(|&v| true_log_odds(v)).collect(),
        identified: summarize(Family::BinaryLogitIdentified, average(|r| &r.0)),
        unidentified: summarize(Family::BinaryLogitUnidentified, average(|r| &r.1)),
        x,
    })
}
