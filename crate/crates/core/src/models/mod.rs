//! Model families built on the forests: each wires its data augmentation to
//! per-row forest weights and owns the remaining scalar parameters.
//!
//! Every model draws its latent variables from RNG stream 0 and updates
//! function `j` (in [`Draw::functions`] order) on stream `j + 1`, so forest
//! updates may run concurrently without changing the trajectory.

mod count;
mod het;
pub mod likelihood;
mod logit;
mod multinomial;

pub use count::{CountKind, CountModel};
pub use het::{HetModel, HetSettings};
pub use likelihood::BetaPrime;
pub use logit::IdentifiedLogit;
pub use multinomial::{group_rows, predict_probs, GroupedRows, Multinomial};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{MoveStats, TreeSettings};
use crate::leaf_prior::LeafPrior;
use crate::special::RngStream;
use crate::tree::DecisionTree;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Multinomial,
    BinaryLogitIdentified,
    BinaryLogitUnidentified,
    Poisson,
    Negbin,
    Zip,
    Zinb,
    Het,
    Gaussian,
}

impl Family {
    pub const ALL: [Family; 9] = [
        Family::Multinomial,
        Family::BinaryLogitIdentified,
        Family::BinaryLogitUnidentified,
        Family::Poisson,
        Family::Negbin,
        Family::Zip,
        Family::Zinb,
        Family::Het,
        Family::Gaussian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Multinomial => "multinomial",
            Family::BinaryLogitIdentified => "binary-logit-identified",
            Family::BinaryLogitUnidentified => "binary-logit-unidentified",
            Family::Poisson => "poisson",
            Family::Negbin => "negbin",
            Family::Zip => "zip",
            Family::Zinb => "zinb",
            Family::Het => "het",
            Family::Gaussian => "gaussian",
        }
    }

    pub fn is_categorical(self) -> bool {
        matches!(self, Family::Multinomial | Family::BinaryLogitIdentified | Family::BinaryLogitUnidentified)
    }

    pub fn is_count(self) -> bool {
        matches!(self, Family::Poisson | Family::Negbin | Family::Zip | Family::Zinb)
    }

    pub fn is_continuous(self) -> bool {
        matches!(self, Family::Het | Family::Gaussian)
    }

    /// Names of the per-row predictive summaries produced by [`Family::evaluate`].
    pub fn output_names(self, n_classes: usize) -> Vec<String> {
        match self {
            Family::Multinomial => (0..n_classes).map(|j| format!("prob_{j}")).collect(),
            Family::BinaryLogitIdentified | Family::BinaryLogitUnidentified => vec!["prob".into(), "log_odds".into()],
            Family::Poisson | Family::Negbin => vec!["mean".into()],
            Family::Zip | Family::Zinb => {
                vec!["mean".into(), "count_mean".into(), "omega".into(), "zero_log_odds".into()]
            }
            Family::Het | Family::Gaussian => vec!["mean".into(), "variance".into()],
        }
    }

    /// Predictive summaries at one row from the summed leaf values of each
    /// function (`ln f` for log-linear functions, `f` for the normal mean).
    pub fn evaluate(self, values: &[f64], draw: &Draw, offset: f64, center: f64) -> Vec<f64> {
        match self {
            Family::Multinomial => predict_probs(values),
            Family::BinaryLogitIdentified => {
                let lo = values[0];
                vec![logistic(lo), lo]
            }
            Family::BinaryLogitUnidentified => {
                let lo = values[1] - values[0];
                vec![logistic(lo), lo]
            }
            Family::Poisson | Family::Negbin => vec![offset * values[0].exp()],
            Family::Zip | Family::Zinb => {
                let (log_omega, _) = likelihood::zero_weights(values[1], values[2]);
                let count_mean = offset * values[0].exp();
                let omega = log_omega.exp();
                // zero_log_odds = logit(1 - ω) = ln f0 - ln f1
                vec![omega * count_mean, count_mean, omega, values[1] - values[2]]
            }
            Family::Het | Family::Gaussian => {
                let precision = values.get(1).map_or(1.0, |v| v.exp());
                vec![center + values[0], draw.sigma2.unwrap_or(1.0) / precision]
            }
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown model family '{s}'")))
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Tree count and log-scale spread of one log-linear function's prior.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestSpec {
    pub m: usize,
    pub a0: f64,
}

impl ForestSpec {
    pub fn new(m: usize, a0: f64) -> Self {
        Self { m, a0 }
    }

    pub fn leaf_prior(&self) -> Result<LeafPrior> {
        LeafPrior::new(self.a0, self.m)
    }
}

/// Sampler settings shared by every family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplerOptions {
    pub trees: TreeSettings,
    pub seed: u64,
    /// Drop the likelihood and sample from the prior.
    pub prior_only: bool,
}

impl SamplerOptions {
    pub fn new(seed: u64) -> Self {
        Self { trees: TreeSettings::default(), seed, prior_only: false }
    }

    pub fn prior_only(mut self) -> Self {
        self.prior_only = true;
        self
    }

    pub(crate) fn latent_stream(&self) -> RngStream {
        RngStream::new(self.seed, 0)
    }

    pub(crate) fn function_stream(&self, j: usize) -> RngStream {
        RngStream::new(self.seed, j as u64 + 1)
    }
}

/// Position of a sweep within the run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Sweep {
    pub iteration: usize,
    pub burn_in: bool,
}

/// A response vector in the shape its family expects.
#[derive(Clone, Debug, PartialEq)]
pub enum Response {
    /// Per-row class counts.
    Classes(Vec<Vec<u32>>),
    Counts(Vec<u64>),
    Continuous(Vec<f64>),
}

/// One posterior state: the trees of every function plus scalar parameters.
#[derive(Clone, Debug)]
pub struct Draw {
    pub functions: Vec<Vec<DecisionTree>>,
    pub kappa: Option<f64>,
    pub sigma2: Option<f64>,
    /// Zero-inflated models: per-row indicator that the count component
    /// generated the observation.
    pub count_component: Option<Vec<bool>>,
}

impl Draw {
    /// Summed leaf values of every function at a binned row.
    pub fn function_values(&self, bins: &[u16]) -> Vec<f64> {
        self.functions.iter().map(|trees| trees.iter().map(|t| t.value(t.leaf_for_bins(bins))).sum()).collect()
    }
}

/// Quantities a prediction needs beyond the draws.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionContext {
    pub offset: f64,
    pub center: f64,
    pub n_classes: usize,
}

pub trait Model: Send {
    fn family(&self) -> Family;

    fn n_rows(&self) -> usize;

    /// One full sweep over latents, functions and scalars.
    fn step(&mut self, sweep: Sweep) -> Result<()>;

    /// Per-row observed-data log likelihood at the current state.
    fn log_likelihood(&self) -> Vec<f64>;

    fn draw(&self) -> Draw;

    /// Cached summed leaf values of every function at the training rows, in
    /// draw order.
    fn log_fits(&self) -> Vec<&[f64]>;

    /// Structural move counts of every function, in draw order.
    fn move_stats(&self) -> Vec<MoveStats>;

    /// Simulate a fresh response from the current state.
    fn simulate_response(&self, rng: &mut RngStream) -> Result<Response>;

    fn set_response(&mut self, response: Response) -> Result<()>;

    fn prediction_context(&self) -> PredictionContext;
}

/// Update every forest on its own stream, concurrently when more than one.
pub(crate) fn sweep_forests(
    jobs: Vec<(&mut crate::forest::Forest, &mut RngStream, &[f64], &[f64])>,
    data: &crate::tree::BinnedData,
    trees: &TreeSettings,
) -> Result<()> {
    use rayon::prelude::*;
    if jobs.len() == 1 {
        let (f, rng, u, v) = jobs.into_iter().next().expect("one job");
        return f.sweep(u, v, data, trees, rng);
    }
    jobs.into_par_iter().map(|(f, rng, u, v)| f.sweep(u, v, data, trees, rng)).collect::<Result<Vec<()>>>().map(|_| ())
}
