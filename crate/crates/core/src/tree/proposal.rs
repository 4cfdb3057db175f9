//! GROW / PRUNE / CHANGE / SWAP proposals with exact reverse-move
//! probabilities.
//!
//! Moves only draw rules that split the affected node's training rows into
//! two nonempty parts. CHANGE and SWAP can still empty a descendant leaf;
//! such proposals are flagged infeasible and must be rejected (the prior is
//! restricted to trees whose leaves are all nonempty).

use rand::Rng;

use super::{BinnedData, DecisionTree, NodeKind, SplitRule};

/// Unnormalised move weights; unavailable moves are dropped per tree.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MoveProbs {
    pub grow: f64,
    pub prune: f64,
    pub change: f64,
    pub swap: f64,
}

impl Default for MoveProbs {
    fn default() -> Self {
        Self { grow: 0.25, prune: 0.25, change: 0.40, swap: 0.10 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MoveKind {
    Grow,
    Prune,
    Change,
    Swap,
    /// No move is available; the tree is returned unchanged.
    Null,
}

#[derive(Clone, Debug)]
pub struct Proposal {
    pub kind: MoveKind,
    pub tree: DecisionTree,
    pub assignment: Vec<u32>,
    /// `ln q(T | T*) - ln q(T* | T)`.
    pub log_q_ratio: f64,
    /// Root of the only subtree whose leaves differ between `T` and `T*`.
    pub changed: usize,
    /// False when the proposed tree has an empty leaf.
    pub feasible: bool,
}

/// Row counts and per-predictor bin ranges of every node.
#[derive(Clone, Debug)]
pub struct NodeRanges {
    n_vars: usize,
    count: Vec<u32>,
    lo: Vec<u16>,
    hi: Vec<u16>,
}

impl NodeRanges {
    pub fn compute(tree: &DecisionTree, assignment: &[u32], data: &BinnedData) -> Self {
        let p = data.n_vars();
        let cap = tree.capacity();
        let mut out = Self { n_vars: p, count: vec![0; cap], lo: vec![u16::MAX; cap * p], hi: vec![0; cap * p] };
        for (i, &leaf) in assignment.iter().enumerate() {
            let leaf = leaf as usize;
            out.count[leaf] += 1;
            let base = leaf * p;
            for (j, &b) in data.row(i).iter().enumerate() {
                if b < out.lo[base + j] {
                    out.lo[base + j] = b;
                }
                if b > out.hi[base + j] {
                    out.hi[base + j] = b;
                }
            }
        }
        for &i in tree.preorder().iter().rev() {
            if let Some((l, r)) = tree.children(i) {
                out.count[i] = out.count[l] + out.count[r];
                for j in 0..p {
                    out.lo[i * p + j] = out.lo[l * p + j].min(out.lo[r * p + j]);
                    out.hi[i * p + j] = out.hi[l * p + j].max(out.hi[r * p + j]);
                }
            }
        }
        out
    }

    pub fn count(&self, node: usize) -> usize {
        self.count[node] as usize
    }

    /// Cut indices `k` in `[lo, hi)` leave both children nonempty.
    pub fn n_valid_cuts(&self, node: usize, var: usize) -> usize {
        if self.count[node] == 0 {
            return 0;
        }
        let (lo, hi) = (self.lo[node * self.n_vars + var], self.hi[node * self.n_vars + var]);
        hi.saturating_sub(lo) as usize
    }

    fn cut_range(&self, node: usize, var: usize) -> (usize, usize) {
        (self.lo[node * self.n_vars + var] as usize, self.hi[node * self.n_vars + var] as usize)
    }

    pub fn valid_vars(&self, node: usize) -> Vec<usize> {
        (0..self.n_vars).filter(|&j| self.n_valid_cuts(node, j) > 0).collect()
    }

    pub fn n_valid_vars(&self, node: usize) -> usize {
        (0..self.n_vars).filter(|&j| self.n_valid_cuts(node, j) > 0).count()
    }
}

struct Moves {
    growable: Vec<usize>,
    prunable: Vec<usize>,
    internal: Vec<usize>,
    /// Internal nodes whose parent is internal (swap with the parent).
    swappable: Vec<usize>,
}

impl Moves {
    fn of(tree: &DecisionTree, ranges: &NodeRanges) -> Self {
        let mut m = Moves { growable: Vec::new(), prunable: Vec::new(), internal: Vec::new(), swappable: Vec::new() };
        for i in tree.preorder() {
            match tree.node(i).kind {
                NodeKind::Leaf { .. } => {
                    if ranges.n_valid_vars(i) > 0 {
                        m.growable.push(i);
                    }
                }
                NodeKind::Split { left, right, .. } => {
                    m.internal.push(i);
                    if tree.is_leaf(left) && tree.is_leaf(right) {
                        m.prunable.push(i);
                    }
                    if tree.node(i).parent.is_some() {
                        m.swappable.push(i);
                    }
                }
                NodeKind::Vacant => unreachable!(),
            }
        }
        m
    }

    fn weights(&self, probs: &MoveProbs) -> [f64; 4] {
        let on = |v: &Vec<usize>, w: f64| if v.is_empty() { 0.0 } else { w };
        [
            on(&self.growable, probs.grow),
            on(&self.prunable, probs.prune),
            on(&self.internal, probs.change),
            on(&self.swappable, probs.swap),
        ]
    }

    fn log_prob(&self, probs: &MoveProbs, kind: MoveKind) -> f64 {
        let w = self.weights(probs);
        let total: f64 = w.iter().sum();
        let k = match kind {
            MoveKind::Grow => 0,
            MoveKind::Prune => 1,
            MoveKind::Change => 2,
            MoveKind::Swap => 3,
            MoveKind::Null => unreachable!(),
        };
        (w[k] / total).ln()
    }
}

fn pick<R: Rng + ?Sized>(items: &[usize], rng: &mut R) -> usize {
    items[rng.random_range(0..items.len())]
}

/// Draw a proposal `T*` from the current tree and its row assignment.
pub fn propose<R: Rng + ?Sized>(
    tree: &DecisionTree,
    assignment: &[u32],
    data: &BinnedData,
    probs: &MoveProbs,
    rng: &mut R,
) -> Proposal {
    let ranges = NodeRanges::compute(tree, assignment, data);
    let moves = Moves::of(tree, &ranges);
    let weights = moves.weights(probs);
    let total: f64 = weights.iter().sum();
    let null = || Proposal {
        kind: MoveKind::Null,
        tree: tree.clone(),
        assignment: assignment.to_vec(),
        log_q_ratio: 0.0,
        changed: DecisionTree::ROOT,
        feasible: true,
    };
    if total <= 0.0 {
        return null();
    }
    let mut u = rng.random::<f64>() * total;
    let mut kind = MoveKind::Swap;
    for (w, k) in weights.iter().zip([MoveKind::Grow, MoveKind::Prune, MoveKind::Change, MoveKind::Swap]) {
        if *w > 0.0 && u < *w {
            kind = k;
            break;
        }
        u -= w;
    }
    if weights[3] == 0.0 && kind == MoveKind::Swap {
        // Rounding fell off the end; take the last available move.
        kind = [MoveKind::Grow, MoveKind::Prune, MoveKind::Change]
            .into_iter()
            .zip(weights)
            .rfind(|(_, w)| *w > 0.0)
            .map(|(k, _)| k)
            .expect("at least one move is available");
    }

    let mut new = tree.clone();
    let log_forward;
    let changed;
    // Rule whose reverse-move probability is needed (the one removed or replaced).
    let mut old_rule = None;
    match kind {
        MoveKind::Grow => {
            let leaf = pick(&moves.growable, rng);
            let vars = ranges.valid_vars(leaf);
            let var = pick(&vars, rng);
            let (lo, hi) = ranges.cut_range(leaf, var);
            let cut = rng.random_range(lo..hi);
            new.grow(leaf, SplitRule { var, cut }, 0.0);
            log_forward = moves.log_prob(probs, kind)
                - (moves.growable.len() as f64).ln()
                - (vars.len() as f64).ln()
                - ((hi - lo) as f64).ln();
            changed = leaf;
        }
        MoveKind::Prune => {
            let node = pick(&moves.prunable, rng);
            old_rule = tree.rule(node);
            new.prune(node, 0.0);
            log_forward = moves.log_prob(probs, kind) - (moves.prunable.len() as f64).ln();
            changed = node;
        }
        MoveKind::Change => {
            let node = pick(&moves.internal, rng);
            old_rule = tree.rule(node);
            let vars = ranges.valid_vars(node);
            let var = pick(&vars, rng);
            let (lo, hi) = ranges.cut_range(node, var);
            let cut = rng.random_range(lo..hi);
            new.set_rule(node, SplitRule { var, cut });
            log_forward = moves.log_prob(probs, kind)
                - (moves.internal.len() as f64).ln()
                - (vars.len() as f64).ln()
                - ((hi - lo) as f64).ln();
            changed = node;
        }
        MoveKind::Swap => {
            let child = pick(&moves.swappable, rng);
            let parent = tree.node(child).parent.expect("swappable nodes have a parent");
            let (pr, cr) = (tree.rule(parent).unwrap(), tree.rule(child).unwrap());
            new.set_rule(parent, cr);
            new.set_rule(child, pr);
            log_forward = moves.log_prob(probs, kind) - (moves.swappable.len() as f64).ln();
            changed = parent;
        }
        MoveKind::Null => unreachable!(),
    }

    // Re-route only the rows that reach the changed subtree.
    let mut in_subtree = vec![false; tree.capacity()];
    for i in tree.subtree(changed) {
        in_subtree[i] = true;
    }
    let mut new_assignment = assignment.to_vec();
    for (i, slot) in new_assignment.iter_mut().enumerate() {
        if in_subtree[*slot as usize] {
            *slot = new.descend_from(changed, data.row(i)) as u32;
        }
    }
    let new_ranges = NodeRanges::compute(&new, &new_assignment, data);
    let feasible = new.subtree(changed).into_iter().filter(|&i| new.is_leaf(i)).all(|i| new_ranges.count(i) > 0);
    if !feasible {
        return Proposal {
            kind,
            tree: new,
            assignment: new_assignment,
            log_q_ratio: f64::NEG_INFINITY,
            changed,
            feasible,
        };
    }

    let new_moves = Moves::of(&new, &new_ranges);
    let log_reverse = match kind {
        MoveKind::Grow => new_moves.log_prob(probs, MoveKind::Prune) - (new_moves.prunable.len() as f64).ln(),
        MoveKind::Prune => {
            let rule = old_rule.expect("pruned node had a rule");
            new_moves.log_prob(probs, MoveKind::Grow)
                - (new_moves.growable.len() as f64).ln()
                - (new_ranges.n_valid_vars(changed) as f64).ln()
                - (new_ranges.n_valid_cuts(changed, rule.var) as f64).ln()
        }
        MoveKind::Change => {
            let rule = old_rule.expect("changed node had a rule");
            new_moves.log_prob(probs, MoveKind::Change)
                - (new_moves.internal.len() as f64).ln()
                - (new_ranges.n_valid_vars(changed) as f64).ln()
                - (new_ranges.n_valid_cuts(changed, rule.var) as f64).ln()
        }
        MoveKind::Swap => new_moves.log_prob(probs, MoveKind::Swap) - (new_moves.swappable.len() as f64).ln(),
        MoveKind::Null => unreachable!(),
    };
    Proposal { kind, tree: new, assignment: new_assignment, log_q_ratio: log_reverse - log_forward, changed, feasible }
}

/// Row-to-leaf assignment of every training row.
pub fn assign_rows(tree: &DecisionTree, data: &BinnedData) -> Vec<u32> {
    (0..data.n_rows()).map(|i| tree.leaf_for_bins(data.row(i)) as u32).collect()
}
