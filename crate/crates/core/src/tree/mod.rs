//! Decision trees over a cutpoint grid.
//!
//! A split rule `(var, cut)` sends a row to the left ("yes") child when
//! `x[var] < grid[var][cut]`. Rows are pre-binned once: `bin = #{cuts <= x}`,
//! so the test becomes `bin <= cut` and all structural bookkeeping works on
//! small integers.

mod prior;
mod proposal;

pub use prior::TreePrior;
pub use proposal::{assign_rows, propose, MoveKind, MoveProbs, NodeRanges, Proposal};

use serde::{Deserialize, Serialize};

/// Dense row-major design matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Design {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
}

impl Design {
    pub fn new(n_rows: usize, n_cols: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), n_rows * n_cols, "design shape mismatch");
        Self { n_rows, n_cols, values }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n_cols = rows.first().map_or(0, Vec::len);
        let values: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(rows.len(), n_cols, values)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_rows).map(move |i| self.values[i * self.n_cols + j])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.n_cols + j] = v;
    }
}

/// Ordered cut values per predictor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutpointGrid {
    cuts: Vec<Vec<f64>>,
}

impl CutpointGrid {
    pub const DEFAULT_MAX_CUTS: usize = 100;

    /// Wrap explicit cut lists, which must be strictly increasing.
    pub fn new(cuts: Vec<Vec<f64>>) -> Self {
        for c in &cuts {
            assert!(c.windows(2).all(|w| w[0] < w[1]), "cutpoints must increase strictly");
        }
        Self { cuts }
    }

    /// Midpoints between distinct observed values; when there are more than
    /// `max_cuts` of them, those closest to evenly spaced data quantiles.
    pub fn from_design(design: &Design, max_cuts: usize) -> Self {
        let cuts = (0..design.n_cols())
            .map(|j| {
                let mut col: Vec<f64> = design.column(j).collect();
                col.sort_by(|a, b| a.partial_cmp(b).expect("design values are finite"));
                column_cuts(&col, max_cuts)
            })
            .collect();
        Self { cuts }
    }

    pub fn n_vars(&self) -> usize {
        self.cuts.len()
    }

    pub fn cuts(&self, var: usize) -> &[f64] {
        &self.cuts[var]
    }

    /// Number of predictors with at least one cutpoint.
    pub fn n_usable(&self) -> usize {
        self.cuts.iter().filter(|c| !c.is_empty()).count()
    }

    /// `#{cuts <= x}` for predictor `var`.
    pub fn bin(&self, var: usize, x: f64) -> u16 {
        self.cuts[var].partition_point(|&c| c <= x) as u16
    }
}

fn column_cuts(sorted: &[f64], max_cuts: usize) -> Vec<f64> {
    let mut mids = Vec::new();
    // rank[k] = number of observations at or below mids[k]
    let mut ranks = Vec::new();
    for (i, w) in sorted.windows(2).enumerate() {
        if w[1] > w[0] {
            mids.push(0.5 * (w[0] + w[1]));
            ranks.push(i + 1);
        }
    }
    if mids.len() <= max_cuts {
        return mids;
    }
    let n = sorted.len() as f64;
    let mut out: Vec<f64> = Vec::with_capacity(max_cuts);
    for k in 1..=max_cuts {
        let target = k as f64 * n / (max_cuts + 1) as f64;
        let idx = ranks.partition_point(|&r| (r as f64) < target).min(mids.len() - 1);
        if out.last() != Some(&mids[idx]) {
            out.push(mids[idx]);
        }
    }
    out
}

/// Design rows binned against a grid, stored row-major.
#[derive(Clone, Debug)]
pub struct BinnedData {
    n_rows: usize,
    n_vars: usize,
    bins: Vec<u16>,
    n_cuts: Vec<u16>,
}

impl BinnedData {
    pub fn new(design: &Design, grid: &CutpointGrid) -> Self {
        assert_eq!(design.n_cols(), grid.n_vars(), "grid and design disagree on predictors");
        let mut bins = Vec::with_capacity(design.n_rows() * design.n_cols());
        for i in 0..design.n_rows() {
            for (j, &x) in design.row(i).iter().enumerate() {
                bins.push(grid.bin(j, x));
            }
        }
        let n_cuts = (0..grid.n_vars()).map(|j| grid.cuts(j).len() as u16).collect();
        Self { n_rows: design.n_rows(), n_vars: design.n_cols(), bins, n_cuts }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn row(&self, i: usize) -> &[u16] {
        &self.bins[i * self.n_vars..(i + 1) * self.n_vars]
    }

    pub fn n_cuts(&self, var: usize) -> usize {
        self.n_cuts[var] as usize
    }

    pub fn n_usable(&self) -> usize {
        self.n_cuts.iter().filter(|&&k| k > 0).count()
    }
}

/// Split on predictor `var` at grid index `cut`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRule {
    pub var: usize,
    pub cut: usize,
}

impl SplitRule {
    #[inline]
    pub fn goes_left(&self, bins: &[u16]) -> bool {
        bins[self.var] as usize <= self.cut
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NodeKind {
    Leaf { value: f64 },
    Split { rule: SplitRule, left: usize, right: usize },
    Vacant,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Node {
    pub kind: NodeKind,
    pub parent: Option<usize>,
    pub depth: usize,
}

/// Arena-backed binary tree. Node indices stay stable across structural
/// edits; freed slots are reused.
#[derive(Clone, Debug)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    free: Vec<usize>,
}

/// Nested, index-free form used for persistence and structural comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NestedTree {
    Split { var: usize, cut: usize, children: Box<[NestedTree; 2]> },
    Leaf { leaf: f64 },
}

impl DecisionTree {
    pub fn stump(value: f64) -> Self {
        Self { nodes: vec![Node { kind: NodeKind::Leaf { value }, parent: None, depth: 0 }], free: Vec::new() }
    }

    pub const ROOT: usize = 0;

    pub fn node(&self, i: usize) -> &Node {
        &self.nodes[i]
    }

    pub fn capacity(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_leaf(&self, i: usize) -> bool {
        matches!(self.nodes[i].kind, NodeKind::Leaf { .. })
    }

    pub fn children(&self, i: usize) -> Option<(usize, usize)> {
        match self.nodes[i].kind {
            NodeKind::Split { left, right, .. } => Some((left, right)),
            _ => None,
        }
    }

    pub fn rule(&self, i: usize) -> Option<SplitRule> {
        match self.nodes[i].kind {
            NodeKind::Split { rule, .. } => Some(rule),
            _ => None,
        }
    }

    pub fn value(&self, i: usize) -> f64 {
        match self.nodes[i].kind {
            NodeKind::Leaf { value } => value,
            _ => panic!("node {i} is not a leaf"),
        }
    }

    pub fn set_value(&mut self, i: usize, v: f64) {
        match &mut self.nodes[i].kind {
            NodeKind::Leaf { value } => *value = v,
            _ => panic!("node {i} is not a leaf"),
        }
    }

    pub fn set_rule(&mut self, i: usize, new: SplitRule) {
        match &mut self.nodes[i].kind {
            NodeKind::Split { rule, .. } => *rule = new,
            _ => panic!("node {i} is not a split"),
        }
    }

    /// Node indices in left-first depth-first pre-order.
    pub fn preorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![Self::ROOT];
        while let Some(i) = stack.pop() {
            out.push(i);
            if let Some((l, r)) = self.children(i) {
                stack.push(r);
                stack.push(l);
            }
        }
        out
    }

    /// Preorder traversal of the subtree rooted at `root`.
    pub fn subtree(&self, root: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![root];
        while let Some(i) = stack.pop() {
            out.push(i);
            if let Some((l, r)) = self.children(i) {
                stack.push(r);
                stack.push(l);
            }
        }
        out
    }

    /// Leaves in left-first order; leaf id `k` (1-based) is `leaves()[k-1]`.
    pub fn leaves(&self) -> Vec<usize> {
        self.preorder().into_iter().filter(|&i| self.is_leaf(i)).collect()
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n.kind, NodeKind::Leaf { .. })).count()
    }

    pub fn n_internal(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n.kind, NodeKind::Split { .. })).count()
    }

    pub fn max_depth(&self) -> usize {
        self.nodes.iter().filter(|n| !matches!(n.kind, NodeKind::Vacant)).map(|n| n.depth).max().unwrap_or(0)
    }

    /// Leaf node reached by a binned row.
    #[inline]
    pub fn leaf_for_bins(&self, bins: &[u16]) -> usize {
        self.descend_from(Self::ROOT, bins)
    }

    #[inline]
    pub fn descend_from(&self, start: usize, bins: &[u16]) -> usize {
        let mut i = start;
        loop {
            match self.nodes[i].kind {
                NodeKind::Split { rule, left, right } => i = if rule.goes_left(bins) { left } else { right },
                _ => return i,
            }
        }
    }

    /// Leaf node reached by a raw row.
    pub fn leaf_for_row(&self, row: &[f64], grid: &CutpointGrid) -> usize {
        let mut i = Self::ROOT;
        loop {
            match self.nodes[i].kind {
                NodeKind::Split { rule, left, right } => {
                    i = if row[rule.var] < grid.cuts(rule.var)[rule.cut] { left } else { right }
                }
                _ => return i,
            }
        }
    }

    /// 1-based leaf id reached by a raw row.
    pub fn assign_leaf(&self, row: &[f64], grid: &CutpointGrid) -> usize {
        let node = self.leaf_for_row(row, grid);
        self.leaves().iter().position(|&l| l == node).expect("reached node is a leaf") + 1
    }

    fn alloc(&mut self, node: Node) -> usize {
        if let Some(i) = self.free.pop() {
            self.nodes[i] = node;
            i
        } else {
            self.nodes.push(node);
            self.nodes.len() - 1
        }
    }

    /// Split leaf `i`; both children start at `child_value`.
    pub fn grow(&mut self, i: usize, rule: SplitRule, child_value: f64) -> (usize, usize) {
        assert!(self.is_leaf(i), "grow needs a leaf");
        let depth = self.nodes[i].depth + 1;
        let child = Node { kind: NodeKind::Leaf { value: child_value }, parent: Some(i), depth };
        let left = self.alloc(child);
        let right = self.alloc(child);
        self.nodes[i].kind = NodeKind::Split { rule, left, right };
        (left, right)
    }

    /// Collapse split `i`, whose children must both be leaves.
    pub fn prune(&mut self, i: usize, value: f64) {
        let (l, r) = self.children(i).expect("prune needs a split");
        assert!(self.is_leaf(l) && self.is_leaf(r), "prune needs two leaf children");
        for c in [r, l] {
            self.nodes[c].kind = NodeKind::Vacant;
            self.free.push(c);
        }
        self.nodes[i].kind = NodeKind::Leaf { value };
    }

    pub fn to_nested(&self) -> NestedTree {
        self.nested_at(Self::ROOT)
    }

    fn nested_at(&self, i: usize) -> NestedTree {
        match self.nodes[i].kind {
            NodeKind::Leaf { value } => NestedTree::Leaf { leaf: value },
            NodeKind::Split { rule, left, right } => NestedTree::Split {
                var: rule.var,
                cut: rule.cut,
                children: Box::new([self.nested_at(left), self.nested_at(right)]),
            },
            NodeKind::Vacant => unreachable!("vacant node reachable from the root"),
        }
    }

    pub fn from_nested(nested: &NestedTree) -> Self {
        let mut tree = Self { nodes: Vec::new(), free: Vec::new() };
        tree.push_nested(nested, None, 0);
        tree
    }

    fn push_nested(&mut self, nested: &NestedTree, parent: Option<usize>, depth: usize) -> usize {
        let i = self.alloc(Node { kind: NodeKind::Vacant, parent, depth });
        match nested {
            NestedTree::Leaf { leaf } => self.nodes[i].kind = NodeKind::Leaf { value: *leaf },
            NestedTree::Split { var, cut, children } => {
                let left = self.push_nested(&children[0], Some(i), depth + 1);
                let right = self.push_nested(&children[1], Some(i), depth + 1);
                self.nodes[i].kind = NodeKind::Split { rule: SplitRule { var: *var, cut: *cut }, left, right };
            }
        }
        i
    }

    /// Same splits, ignoring leaf values.
    pub fn same_structure(&self, other: &Self) -> bool {
        fn eq(a: &DecisionTree, i: usize, b: &DecisionTree, j: usize) -> bool {
            match (a.nodes[i].kind, b.nodes[j].kind) {
                (NodeKind::Leaf { .. }, NodeKind::Leaf { .. }) => true,
                (NodeKind::Split { rule: r1, left: l1, right: q1 }, NodeKind::Split { rule: r2, left: l2, right: q2 }) => {
                    r1 == r2 && eq(a, l1, b, l2) && eq(a, q1, b, q2)
                }
                _ => false,
            }
        }
        eq(self, Self::ROOT, other, Self::ROOT)
    }
}
