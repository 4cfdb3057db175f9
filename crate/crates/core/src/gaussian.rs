//! Sum-of-trees regression with normal leaves, updated by Bayesian
//! backfitting against per-row variances.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::forest::{MoveStats, TreeSettings};
use crate::special::sample_gamma;
use crate::tree::{assign_rows, propose, BinnedData, DecisionTree, MoveKind};

/// Leaf sufficient statistics under per-row variances `w`:
/// `precision = Σ 1/w`, `weighted = Σ R/w`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GaussLeafStat {
    pub precision: f64,
    pub weighted: f64,
}

/// `σ_μ = 0.5 (y_max - y_min) / (k √m)`.
pub fn default_sigma_mu(y_min: f64, y_max: f64, k: f64, m: usize) -> f64 {
    0.5 * (y_max - y_min) / (k * (m as f64).sqrt())
}

/// Leaf-dependent part of the log marginal likelihood of a normal leaf with
/// `N(0, σ_μ²)` prior. Terms depending only on the rows cancel in every
/// Metropolis ratio and are left out.
pub fn leaf_log_marginal(stat: GaussLeafStat, sigma_mu: f64) -> f64 {
    let var = sigma_mu * sigma_mu;
    let post_prec = 1.0 / var + stat.precision;
    -0.5 * (var * post_prec).ln() + 0.5 * stat.weighted * stat.weighted / post_prec
}

/// Full log marginal `ln ∫ Π N(R_i | μ, w_i) N(μ | 0, σ_μ²) dμ`.
pub fn leaf_log_marginal_full(residuals: &[f64], variances: &[f64], sigma_mu: f64) -> f64 {
    let mut stat = GaussLeafStat::default();
    let mut constant = 0.0;
    for (&r, &w) in residuals.iter().zip(variances) {
        stat.precision += 1.0 / w;
        stat.weighted += r / w;
        constant += -0.5 * (2.0 * std::f64::consts::PI * w).ln() - 0.5 * r * r / w;
    }
    constant + leaf_log_marginal(stat, sigma_mu)
}

/// Posterior mean and variance of a leaf mean.
pub fn leaf_posterior(stat: GaussLeafStat, sigma_mu: f64) -> (f64, f64) {
    let post_prec = 1.0 / (sigma_mu * sigma_mu) + stat.precision;
    (stat.weighted / post_prec, 1.0 / post_prec)
}

/// Scaled inverse chi-squared prior `νλ / σ² ~ χ²_ν` on the noise variance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigmaPrior {
    pub nu: f64,
    pub lambda: f64,
}

impl SigmaPrior {
    /// Place `sd_hat` at the `quantile` point of the prior on `σ`.
    pub fn from_sd_estimate(sd_hat: f64, nu: f64, quantile: f64) -> Result<Self> {
        if !(sd_hat > 0.0 && sd_hat.is_finite()) {
            return Err(Error::InvalidParameter(format!("residual sd estimate must be positive (got {sd_hat})")));
        }
        if !(quantile > 0.0 && quantile < 1.0) {
            return Err(Error::InvalidParameter(format!("sigma quantile must lie in (0, 1) (got {quantile})")));
        }
        let chi = ChiSquared::new(nu).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        Ok(Self { nu, lambda: sd_hat * sd_hat * chi.inverse_cdf(1.0 - quantile) / nu })
    }
}

/// Draw `σ0²` from its inverse-gamma full conditional given residuals `e`
/// and per-row variance multipliers `mult` (`Var(y_i) = σ0² mult_i`).
pub fn sample_sigma0<R: Rng + ?Sized>(residuals: &[f64], mult: &[f64], prior: SigmaPrior, rng: &mut R) -> Result<f64> {
    if residuals.is_empty() {
        return Err(Error::InvalidParameter("sigma update needs at least one residual".into()));
    }
    let mut ss = 0.0;
    for (&e, &v) in residuals.iter().zip(mult) {
        if !(v > 0.0) {
            return Err(Error::Domain { what: "variance multiplier", value: v });
        }
        ss += e * e / v;
    }
    let shape = 0.5 * (prior.nu + residuals.len() as f64);
    let rate = 0.5 * (prior.nu * prior.lambda + ss);
    Ok(1.0 / sample_gamma(shape, rate, rng)?)
}

#[derive(Clone, Debug)]
pub struct GaussForest {
    trees: Vec<DecisionTree>,
    assignments: Vec<Vec<u32>>,
    fit: Vec<f64>,
    sigma_mu: f64,
    n_cuts: Vec<usize>,
    stats: MoveStats,
    partial: Vec<f64>,
}

impl GaussForest {
    /// `m` stumps with zero leaves.
    pub fn new(m: usize, sigma_mu: f64, data: &BinnedData) -> Self {
        let stump = DecisionTree::stump(0.0);
        let assignment = assign_rows(&stump, data);
        Self {
            trees: vec![stump; m],
            assignments: vec![assignment; m],
            fit: vec![0.0; data.n_rows()],
            sigma_mu,
            n_cuts: (0..data.n_vars()).map(|j| data.n_cuts(j)).collect(),
            stats: MoveStats::default(),
            partial: vec![0.0; data.n_rows()],
        }
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn sigma_mu(&self) -> f64 {
        self.sigma_mu
    }

    pub fn move_stats(&self) -> MoveStats {
        self.stats
    }

    /// Cached `f(x_i)` at the training rows.
    pub fn fit(&self) -> &[f64] {
        &self.fit
    }

    pub fn eval_bins(&self, bins: &[u16]) -> f64 {
        self.trees.iter().map(|t| t.value(t.leaf_for_bins(bins))).sum()
    }

    pub fn refresh(&mut self) {
        for (i, slot) in self.fit.iter_mut().enumerate() {
            *slot = self.trees.iter().zip(&self.assignments).map(|(t, a)| t.value(a[i] as usize)).sum();
        }
    }

    pub fn cache_drift(&self) -> f64 {
        (0..self.fit.len())
            .map(|i| {
                let fresh: f64 = self.trees.iter().zip(&self.assignments).map(|(t, a)| t.value(a[i] as usize)).sum();
                (fresh - self.fit[i]).abs()
            })
            .fold(0.0, f64::max)
    }

    fn node_stats(&self, tree: &DecisionTree, assignment: &[u32], y: &[f64], w: &[f64]) -> Vec<GaussLeafStat> {
        let mut out = vec![GaussLeafStat::default(); tree.capacity()];
        for (i, &leaf) in assignment.iter().enumerate() {
            let st = &mut out[leaf as usize];
            let inv = 1.0 / w[i];
            st.precision += inv;
            st.weighted += (y[i] - self.partial[i]) * inv;
        }
        out
    }

    fn sum_log_marginal(&self, tree: &DecisionTree, root: usize, stats: &[GaussLeafStat]) -> f64 {
        tree.subtree(root)
            .into_iter()
            .filter(|&i| tree.is_leaf(i))
            .map(|i| leaf_log_marginal(stats[i], self.sigma_mu))
            .sum()
    }

    /// Metropolis-Hastings structure step for tree `h` against the partial
    /// residuals `y - f₋ₕ` with row variances `w`, then a redraw of its
    /// leaf means. An infinite variance removes a row from the likelihood.
    pub fn update_tree<R: Rng + ?Sized>(
        &mut self,
        h: usize,
        y: &[f64],
        w: &[f64],
        data: &BinnedData,
        settings: &TreeSettings,
        rng: &mut R,
    ) -> Result<bool> {
        {
            let tree = &self.trees[h];
            for (i, (p, &leaf)) in self.partial.iter_mut().zip(&self.assignments[h]).enumerate() {
                if !(w[i] > 0.0) {
                    return Err(Error::Domain { what: "row variance", value: w[i] });
                }
                *p = self.fit[i] - tree.value(leaf as usize);
            }
        }
        let proposal = propose(&self.trees[h], &self.assignments[h], data, &settings.moves, rng);
        let log_u = rng.random::<f64>().ln();
        let accept = match proposal.kind {
            MoveKind::Null => true,
            _ if !proposal.feasible => false,
            _ => {
                let old = &self.trees[h];
                let old_stats = self.node_stats(old, &self.assignments[h], y, w);
                let new_stats = self.node_stats(&proposal.tree, &proposal.assignment, y, w);
                let log_ratio = self.sum_log_marginal(&proposal.tree, proposal.changed, &new_stats)
                    - self.sum_log_marginal(old, proposal.changed, &old_stats)
                    + settings.prior.log_prior(&proposal.tree, &self.n_cuts)
                    - settings.prior.log_prior(old, &self.n_cuts)
                    + proposal.log_q_ratio;
                log_u < log_ratio
            }
        };
        if proposal.kind != MoveKind::Null {
            self.stats.proposed += 1;
            if accept {
                self.stats.accepted += 1;
                self.trees[h] = proposal.tree;
                self.assignments[h] = proposal.assignment;
            }
        }
        let stats = self.node_stats(&self.trees[h], &self.assignments[h], y, w);
        let tree = &mut self.trees[h];
        for leaf in tree.leaves() {
            let (mean, var) = leaf_posterior(stats[leaf], self.sigma_mu);
            let z: f64 = StandardNormal.sample(rng);
            tree.set_value(leaf, mean + var.sqrt() * z);
        }
        for (i, &leaf) in self.assignments[h].iter().enumerate() {
            self.fit[i] = self.partial[i] + tree.value(leaf as usize);
        }
        Ok(accept)
    }

    pub fn sweep<R: Rng + ?Sized>(
        &mut self,
        y: &[f64],
        w: &[f64],
        data: &BinnedData,
        settings: &TreeSettings,
        rng: &mut R,
    ) -> Result<()> {
        for h in 0..self.trees.len() {
            self.update_tree(h, y, w, data, settings, rng)?;
        }
        self.refresh();
        if self.fit.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("non-finite fit after a backfitting sweep".into()));
        }
        Ok(())
    }
}
