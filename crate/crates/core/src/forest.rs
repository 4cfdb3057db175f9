//! Product-of-trees positive functions `f(x) = Π_h g(x; T_h, Λ_h)`.
//!
//! Each tree is updated against per-row weights `(u_i, v_i)` under which the
//! likelihood contributes `f(x_i)^{u_i} exp(-v_i f(x_i))`. Leaves store
//! `ln λ`, and the per-row log fit is cached so the fit without tree `h`
//! is one subtraction away.

use rand::Rng;

use crate::error::{Error, Result};
use crate::leaf_prior::{LeafPrior, LeafSuffStat};
use crate::tree::{assign_rows, propose, BinnedData, DecisionTree, MoveKind, MoveProbs, TreePrior};

/// Tree-structure prior and proposal mix shared by every forest of a model.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TreeSettings {
    pub prior: TreePrior,
    pub moves: MoveProbs,
}

/// Acceptance bookkeeping for structural moves.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MoveStats {
    pub proposed: u64,
    pub accepted: u64,
}

#[derive(Clone, Debug)]
pub struct Forest {
    trees: Vec<DecisionTree>,
    assignments: Vec<Vec<u32>>,
    log_fit: Vec<f64>,
    prior: LeafPrior,
    n_cuts: Vec<usize>,
    stats: MoveStats,
    partial: Vec<f64>,
}

impl Forest {
    /// `m` stumps with `λ = 1`, so `f ≡ 1`.
    pub fn new(m: usize, prior: LeafPrior, data: &BinnedData) -> Self {
        let stump = DecisionTree::stump(0.0);
        let assignment = assign_rows(&stump, data);
        Self {
            trees: vec![stump; m],
            assignments: vec![assignment; m],
            log_fit: vec![0.0; data.n_rows()],
            prior,
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

    pub fn prior(&self) -> &LeafPrior {
        &self.prior
    }

    pub fn move_stats(&self) -> MoveStats {
        self.stats
    }

    /// Cached `ln f(x_i)` at the training rows.
    pub fn log_fit(&self) -> &[f64] {
        &self.log_fit
    }

    /// `ln f` at a binned row.
    pub fn log_eval_bins(&self, bins: &[u16]) -> f64 {
        self.trees.iter().map(|t| t.value(t.leaf_for_bins(bins))).sum()
    }

    /// Replace tree `h` (with its leaf log-values) and refresh the cache.
    pub fn set_tree(&mut self, h: usize, tree: DecisionTree, data: &BinnedData) {
        self.assignments[h] = assign_rows(&tree, data);
        self.trees[h] = tree;
        self.refresh();
    }

    /// Recompute the cached log fit from the trees.
    pub fn refresh(&mut self) {
        for (i, slot) in self.log_fit.iter_mut().enumerate() {
            *slot = self.trees.iter().zip(&self.assignments).map(|(t, a)| t.value(a[i] as usize)).sum();
        }
    }

    /// Largest gap between the cache and a fresh recomputation.
    pub fn cache_drift(&self) -> f64 {
        (0..self.log_fit.len())
            .map(|i| {
                let fresh: f64 = self.trees.iter().zip(&self.assignments).map(|(t, a)| t.value(a[i] as usize)).sum();
                (fresh - self.log_fit[i]).abs()
            })
            .fold(0.0, f64::max)
    }

    fn fill_partial(&mut self, h: usize) {
        let tree = &self.trees[h];
        let assign = &self.assignments[h];
        for ((p, &lf), &leaf) in self.partial.iter_mut().zip(&self.log_fit).zip(assign) {
            *p = lf - tree.value(leaf as usize);
        }
    }

    fn node_stats(&self, tree: &DecisionTree, assignment: &[u32], u: &[f64], v: &[f64]) -> Vec<LeafSuffStat> {
        let mut out = vec![LeafSuffStat::default(); tree.capacity()];
        for (i, &leaf) in assignment.iter().enumerate() {
            let st = &mut out[leaf as usize];
            st.r += u[i];
            if v[i] != 0.0 {
                st.s += v[i] * self.partial[i].exp();
            }
        }
        out
    }

    /// Per-leaf `(r, s)` for tree `h` in leaf-id order, where
    /// `s = Σ v_i f₋ₕ(x_i)` uses the cached fit without tree `h`.
    pub fn leaf_stats(&mut self, h: usize, u: &[f64], v: &[f64]) -> Vec<LeafSuffStat> {
        self.fill_partial(h);
        let tree = &self.trees[h];
        let stats = self.node_stats(tree, &self.assignments[h], u, v);
        tree.leaves().into_iter().map(|l| stats[l]).collect()
    }

    fn sum_log_marginal(&self, tree: &DecisionTree, root: usize, stats: &[LeafSuffStat]) -> Result<f64> {
        let mut total = 0.0;
        for i in tree.subtree(root) {
            if tree.is_leaf(i) {
                total += self.prior.log_marginal(stats[i])?;
            }
        }
        Ok(total)
    }

    /// One Metropolis-Hastings structure step for tree `h` followed by a
    /// redraw of its leaves from their full conditionals.
    pub fn update_tree<R: Rng + ?Sized>(
        &mut self,
        h: usize,
        u: &[f64],
        v: &[f64],
        data: &BinnedData,
        settings: &TreeSettings,
        rng: &mut R,
    ) -> Result<bool> {
        self.fill_partial(h);
        let proposal = propose(&self.trees[h], &self.assignments[h], data, &settings.moves, rng);
        let log_u = rng.random::<f64>().ln();
        let accept = match proposal.kind {
            MoveKind::Null => true,
            _ if !proposal.feasible => false,
            _ => {
                let old = &self.trees[h];
                let old_stats = self.node_stats(old, &self.assignments[h], u, v);
                let new_stats = self.node_stats(&proposal.tree, &proposal.assignment, u, v);
                let lm_old = self.sum_log_marginal(old, proposal.changed, &old_stats)?;
                match self.sum_log_marginal(&proposal.tree, proposal.changed, &new_stats) {
                    Ok(lm_new) => {
                        let log_ratio = lm_new - lm_old + settings.prior.log_prior(&proposal.tree, &self.n_cuts)
                            - settings.prior.log_prior(old, &self.n_cuts)
                            + proposal.log_q_ratio;
                        log_u < log_ratio
                    }
                    Err(Error::DivergentLeaf { r, c }) => {
                        log::warn!("rejecting proposal with divergent leaf (r={r}, c={c})");
                        false
                    }
                    Err(e) => return Err(e),
                }
            }
        };
        if proposal.kind != MoveKind::Null {
            self.stats.proposed += 1;
            if accept {
                self.stats.accepted += 1;
            }
        }
        if accept && proposal.kind != MoveKind::Null {
            self.trees[h] = proposal.tree;
            self.assignments[h] = proposal.assignment;
        }
        self.redraw_leaves(h, u, v, rng)?;
        Ok(accept)
    }

    fn redraw_leaves<R: Rng + ?Sized>(&mut self, h: usize, u: &[f64], v: &[f64], rng: &mut R) -> Result<()> {
        let stats = self.node_stats(&self.trees[h], &self.assignments[h], u, v);
        let tree = &mut self.trees[h];
        for leaf in tree.leaves() {
            let lambda = self.prior.sample_posterior(stats[leaf], rng)?;
            tree.set_value(leaf, lambda.ln());
        }
        for ((lf, &p), &leaf) in self.log_fit.iter_mut().zip(&self.partial).zip(&self.assignments[h]) {
            *lf = p + tree.value(leaf as usize);
        }
        Ok(())
    }

    /// Update every tree in order, then rebuild the cache from scratch.
    pub fn sweep<R: Rng + ?Sized>(
        &mut self,
        u: &[f64],
        v: &[f64],
        data: &BinnedData,
        settings: &TreeSettings,
        rng: &mut R,
    ) -> Result<()> {
        for h in 0..self.trees.len() {
            self.update_tree(h, u, v, data, settings, rng)?;
        }
        self.refresh();
        if self.log_fit.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("non-finite log fit after a forest sweep".into()));
        }
        Ok(())
    }
}
