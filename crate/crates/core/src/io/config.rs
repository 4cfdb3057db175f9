//! Run configuration: one JSON document whose fields the CLI flags mirror.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dataset::{Dataset, ResponseData, ResponseKind, Schema};
use crate::forest::TreeSettings;
use crate::models::{BetaPrime, Family, ForestSpec, HetSettings, SamplerOptions};
use crate::tree::{CutpointGrid, TreePrior};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{0}")]
pub struct ConfigError(pub String);

type Result<T> = std::result::Result<T, ConfigError>;

pub const DEFAULT_CLASS_A0: f64 = 3.5 / std::f64::consts::SQRT_2;
/// Floor on the count-mean spread when the high quantile sits near the base rate.
pub const MIN_COUNT_A0: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    pub model: Option<Family>,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub response: Vec<String>,
    pub offset_column: Option<String>,
    pub categorical: Vec<String>,
    pub ordinal: Vec<String>,
    pub exclude: Vec<String>,
    /// Trees per function (per class, count mean, or normal mean).
    pub m: Option<usize>,
    pub a0: Option<f64>,
    pub zero_m: usize,
    pub zero_a0: f64,
    pub variance_m: usize,
    pub variance_a0: f64,
    pub k: f64,
    pub nu: f64,
    pub sigma_quantile: f64,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub workers: usize,
    /// Base rate for count means without an offset column.
    pub mu0: Option<f64>,
    pub a_kappa: f64,
    pub b_kappa: f64,
    pub y_star_quantile: f64,
    pub max_cuts: usize,
    pub prior_only: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: None,
            data: None,
            out: None,
            response: Vec::new(),
            offset_column: None,
            categorical: Vec::new(),
            ordinal: Vec::new(),
            exclude: Vec::new(),
            m: None,
            a0: None,
            zero_m: 100,
            zero_a0: DEFAULT_CLASS_A0,
            variance_m: 200,
            variance_a0: 1.5,
            k: 2.0,
            nu: 3.0,
            sigma_quantile: 0.9,
            alpha: 0.95,
            beta: 2.0,
            iterations: 6000,
            burn_in: 1000,
            thin: 1,
            seed: 0,
            workers: 1,
            mu0: None,
            a_kappa: 5.0,
            b_kappa: 3.0,
            y_star_quantile: 0.99,
            max_cuts: CutpointGrid::DEFAULT_MAX_CUTS,
            prior_only: false,
        }
    }
}

/// Hyperparameters after defaults and data-driven heuristics are applied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedPriors {
    /// Trees per class function, count mean or normal mean.
    pub m: usize,
    /// Log-scale spread of the log-linear functions; absent for the normal mean.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero: Option<ForestSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<ForestSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_star: Option<f64>,
}

impl ResolvedPriors {
    /// Prior of the class or count-mean functions.
    pub fn function_spec(&self) -> Result<ForestSpec> {
        let a0 = self.a0.ok_or_else(|| ConfigError("continuous models have no log-linear function spec".into()))?;
        Ok(ForestSpec::new(self.m, a0))
    }
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| ConfigError(format!("invalid config: {e}")))
    }

    pub fn family(&self) -> Result<Family> {
        self.model.ok_or_else(|| ConfigError("no model family given".into()))
    }

    pub fn schema(&self) -> Schema {
        Schema {
            response: self.response.clone(),
            offset: self.offset_column.clone(),
            categorical: self.categorical.clone(),
            ordinal: self.ordinal.clone(),
            exclude: self.exclude.clone(),
        }
    }

    pub fn response_kind(&self) -> Result<ResponseKind> {
        let f = self.family()?;
        Ok(if f.is_categorical() {
            ResponseKind::Classes
        } else if f.is_count() {
            ResponseKind::Counts
        } else {
            ResponseKind::Continuous
        })
    }

    pub fn validate(&self) -> Result<()> {
        let family = self.family()?;
        let fail = |msg: String| Err(ConfigError(msg));
        if self.response.is_empty() {
            return fail("no response column given".into());
        }
        if self.iterations == 0 || self.burn_in >= self.iterations {
            return fail(format!("need iterations > burn-in (got {} and {})", self.iterations, self.burn_in));
        }
        if self.thin == 0 {
            return fail("thin must be at least 1".into());
        }
        if self.workers == 0 {
            return fail("workers must be at least 1".into());
        }
        if self.max_cuts == 0 || self.max_cuts > u16::MAX as usize {
            return fail(format!("max-cuts must lie in 1..=65535 (got {})", self.max_cuts));
        }
        TreePrior::new(self.alpha, self.beta).map_err(|e| ConfigError(e.to_string()))?;
        let positive = [
            ("a0", self.a0),
            ("zero-a0", Some(self.zero_a0)),
            ("variance-a0", Some(self.variance_a0)),
            ("k", Some(self.k)),
            ("nu", Some(self.nu)),
            ("mu0", self.mu0),
            ("a-kappa", Some(self.a_kappa)),
            ("b-kappa", Some(self.b_kappa)),
        ];
        for (name, v) in positive {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return fail(format!("{name} must be positive and finite (got {v})"));
                }
            }
        }
        if [self.m, Some(self.zero_m), Some(self.variance_m)].contains(&Some(0)) {
            return fail("tree counts must be at least 1".into());
        }
        for (name, q) in [("sigma-quantile", self.sigma_quantile), ("y-star-quantile", self.y_star_quantile)] {
            if !(q > 0.0 && q < 1.0) {
                return fail(format!("{name} must lie in (0, 1) (got {q})"));
            }
        }
        if family.is_continuous() && self.a0.is_some() {
            return fail("a0 does not apply to continuous models; the mean leaf scale is set through k".into());
        }
        if !family.is_count() && (self.offset_column.is_some() || self.mu0.is_some()) {
            return fail(format!("offsets apply only to count models, not {family}"));
        }
        if family.is_count() && self.offset_column.is_some() && self.mu0.is_some() {
            return fail("give either offset-column or mu0, not both".into());
        }
        Ok(())
    }

    pub fn sampler_options(&self) -> SamplerOptions {
        let trees = TreeSettings { prior: TreePrior { alpha: self.alpha, beta: self.beta }, ..TreeSettings::default() };
        SamplerOptions { trees, seed: self.seed, prior_only: self.prior_only }
    }

    pub fn kappa_prior(&self) -> BetaPrime {
        BetaPrime { a: self.a_kappa, b: self.b_kappa }
    }

    pub fn het_settings(&self, family: Family) -> HetSettings {
        HetSettings {
            mean_trees: self.m.unwrap_or(200),
            k: self.k,
            precision: (family == Family::Het).then(|| ForestSpec::new(self.variance_m, self.variance_a0)),
            nu: self.nu,
            sigma_quantile: self.sigma_quantile,
        }
    }

    /// Fill family defaults; count models take `a0` from the high-quantile
    /// heuristic `0.5 (ln y* - ln μ0)` unless it is given.
    pub fn resolve(&self, data: &Dataset) -> Result<ResolvedPriors> {
        let family = self.family()?;
        let mut out = ResolvedPriors {
            m: self.m.unwrap_or(100),
            a0: Some(self.a0.unwrap_or(DEFAULT_CLASS_A0)),
            zero: None,
            precision: None,
            mu0: None,
            y_star: None,
        };
        if family.is_count() {
            let ResponseData::Counts(y) = &data.response else {
                return Err(ConfigError("count model needs a count response".into()));
            };
            let mu0 = match (&data.offset, self.mu0) {
                (Some(o), _) => o.iter().sum::<f64>() / o.len() as f64,
                (None, Some(m)) => m,
                (None, None) => {
                    let mean = y.iter().sum::<u64>() as f64 / y.len() as f64;
                    if mean <= 0.0 {
                        return Err(ConfigError("all counts are zero; give mu0 explicitly".into()));
                    }
                    mean
                }
            };
            let y_star = quantile(y.iter().map(|&v| v as f64).collect(), self.y_star_quantile);
            let a0 = self.a0.unwrap_or_else(|| count_a0(y_star, mu0));
            out.m = self.m.unwrap_or(200);
            out.a0 = Some(a0);
            out.mu0 = Some(mu0);
            out.y_star = Some(y_star);
            if family == Family::Zip || family == Family::Zinb {
                out.zero = Some(ForestSpec::new(self.zero_m, self.zero_a0));
            }
        } else if family.is_continuous() {
            let s = self.het_settings(family);
            out.m = s.mean_trees;
            out.a0 = None;
            out.precision = s.precision;
        }
        Ok(out)
    }
}

/// Count-mean spread from the high quantile `y*` and base rate `μ0`.
pub fn count_a0(y_star: f64, mu0: f64) -> f64 {
    if y_star <= 0.0 {
        return MIN_COUNT_A0;
    }
    (0.5 * (y_star.ln() - mu0.ln())).max(MIN_COUNT_A0)
}

fn quantile(values: Vec<f64>, p: f64) -> f64 {
    use statrs::statistics::{Data, OrderStatistics};
    Data::new(values).quantile(p)
}
