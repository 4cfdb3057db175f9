use serde::{Deserialize, Serialize};

use super::{DecisionTree, NodeKind};
use crate::error::{Error, Result};

/// Branching-process prior on tree shape: a node at depth `d` splits with
/// probability `alpha (1 + d)^-beta`; the split variable is uniform over the
/// usable predictors and the cut uniform over that predictor's grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreePrior {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for TreePrior {
    fn default() -> Self {
        Self { alpha: 0.95, beta: 2.0 }
    }
}

impl TreePrior {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) || !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("tree prior needs 0 < alpha < 1, beta >= 0 (got {alpha}, {beta})")));
        }
        Ok(Self { alpha, beta })
    }

    pub fn split_prob(&self, depth: usize) -> f64 {
        self.alpha * (1.0 + depth as f64).powf(-self.beta)
    }

    /// Log prior mass of the tree. `n_cuts[j]` is the grid size of predictor `j`.
    pub fn log_prior(&self, tree: &DecisionTree, n_cuts: &[usize]) -> f64 {
        let usable = n_cuts.iter().filter(|&&k| k > 0).count() as f64;
        let mut total = 0.0;
        for i in tree.preorder() {
            let node = tree.node(i);
            let p = self.split_prob(node.depth);
            match node.kind {
                NodeKind::Leaf { .. } => total += (-p).ln_1p(),
                NodeKind::Split { rule, .. } => {
                    total += p.ln() - usable.ln() - (n_cuts[rule.var] as f64).ln();
                }
                NodeKind::Vacant => unreachable!(),
            }
        }
        total
    }
}
