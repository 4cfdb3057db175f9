//! Tree prior and proposal kernel checked against forward simulation.

use llbart::forest::{Forest, TreeSettings};
use llbart::leaf_prior::LeafPrior;
use llbart::special::RngStream;
use llbart::tree::{assign_rows, propose, BinnedData, CutpointGrid, DecisionTree, Design, MoveProbs, SplitRule, TreePrior};
use proptest::prelude::*;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn small_design() -> (Design, CutpointGrid, BinnedData) {
    let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 20.0, (i % 3) as f64, 1.0]).collect();
    let design = Design::from_rows(&rows);
    let grid = CutpointGrid::from_design(&design, 100);
    let data = BinnedData::new(&design, &grid);
    (design, grid, data)
}

/// Forward draw from the branching-process prior, without the nonempty-leaf restriction.
fn forward_tree<R: Rng>(prior: &TreePrior, grid: &CutpointGrid, rng: &mut R) -> DecisionTree {
    let usable: Vec<usize> = (0..grid.n_vars()).filter(|&j| !grid.cuts(j).is_empty()).collect();
    let mut tree = DecisionTree::stump(0.0);
    let mut frontier = vec![DecisionTree::ROOT];
    while let Some(node) = frontier.pop() {
        if rng.random::<f64>() < prior.split_prob(tree.node(node).depth) {
            let var = usable[rng.random_range(0..usable.len())];
            let cut = rng.random_range(0..grid.cuts(var).len());
            let (l, r) = tree.grow(node, SplitRule { var, cut }, 0.0);
            frontier.push(l);
            frontier.push(r);
        }
    }
    tree
}

fn has_empty_leaf(tree: &DecisionTree, data: &BinnedData) -> bool {
    let assign = assign_rows(tree, data);
    tree.leaves().iter().any(|&l| !assign.iter().any(|&a| a as usize == l))
}

const N_BINS: usize = 9;

/// Category by leaf count (1, 2, 3, 4, 5+) and, for split trees, the root variable.
fn size_bin(tree: &DecisionTree) -> usize {
    match tree.rule(DecisionTree::ROOT) {
        None => 0,
        Some(rule) => 1 + 2 * (tree.n_leaves().min(5) - 2) + rule.var,
    }
}

#[test]
fn prior_only_chain_matches_forward_simulation() {
    let (_, grid, data) = small_design();
    let prior = TreePrior::default();
    let settings = TreeSettings { prior, moves: MoveProbs::default() };

    // Oracle: forward simulation conditioned on nonempty leaves by rejection.
    let mut rng = RngStream::new(100, 0);
    let mut expected = [0f64; N_BINS];
    let mut kept = 0usize;
    while kept < 400_000 {
        let t = forward_tree(&prior, &grid, &mut rng);
        if !has_empty_leaf(&t, &data) {
            expected[size_bin(&t)] += 1.0;
            kept += 1;
        }
    }
    for e in expected.iter_mut() {
        *e /= kept as f64;
    }

    // Independent chains, each run long enough to forget the stump start.
    let n_chains = 4000;
    let zeros = vec![0.0; data.n_rows()];
    let mut observed = [0f64; N_BINS];
    for c in 0..n_chains {
        let mut rng = RngStream::new(7, c as u64);
        let mut forest = Forest::new(1, LeafPrior::new(1.0, 1).unwrap(), &data);
        for _ in 0..300 {
            forest.update_tree(0, &zeros, &zeros, &data, &settings, &mut rng).unwrap();
        }
        observed[size_bin(&forest.trees()[0])] += 1.0;
    }

    // Pool sparse tail bins.
    let mut exp_counts: Vec<f64> = expected.iter().map(|p| p * n_chains as f64).collect();
    let mut obs_counts = observed.to_vec();
    while exp_counts.len() > 2 && *exp_counts.last().unwrap() < 5.0 {
        let e = exp_counts.pop().unwrap();
        let o = obs_counts.pop().unwrap();
        *exp_counts.last_mut().unwrap() += e;
        *obs_counts.last_mut().unwrap() += o;
    }
    let stat: f64 = obs_counts.iter().zip(&exp_counts).map(|(o, e)| (o - e).powi(2) / e).sum();
    let df = (exp_counts.len() - 1) as f64;
    let critical = ChiSquared::new(df).unwrap().inverse_cdf(0.95);
    assert!(stat < critical, "chi2={stat:.2} > {critical:.2}; observed {obs_counts:?} expected {exp_counts:?}");
}

#[test]
fn unrestricted_prior_favors_two_or_three_levels() {
    let grid = CutpointGrid::new(vec![(0..100).map(|k| k as f64).collect()]);
    let prior = TreePrior::default();
    let mut rng = RngStream::new(5, 0);
    let n = 100_000;
    let levels: Vec<usize> = (0..n).map(|_| forward_tree(&prior, &grid, &mut rng).max_depth() + 1).collect();
    let mean = levels.iter().sum::<usize>() as f64 / n as f64;
    let share = levels.iter().filter(|&&l| l == 2 || l == 3).count() as f64 / n as f64;
    assert!((2.0..=3.0).contains(&mean), "mean levels {mean}");
    assert!(share > 0.8, "share of 2-3 level trees {share}");
}

#[test]
fn log_prior_hand_values() {
    let prior = TreePrior::default();
    let stump = DecisionTree::stump(0.0);
    assert!((prior.log_prior(&stump, &[10]) - (-2.995_732_273_553_991)).abs() < 1e-12);
    let mut t = DecisionTree::stump(0.0);
    t.grow(0, SplitRule { var: 0, cut: 2 }, 0.0);
    let expected = 0.95f64.ln() + 0.1f64.ln() + 2.0 * (1.0 - 0.95 / 4.0f64).ln();
    assert!((prior.log_prior(&t, &[10]) - expected).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Accepted or not, every proposal keeps the rows partitioned, and
    /// feasible proposals never contain an empty leaf.
    #[test]
    fn proposals_keep_rows_partitioned(seed in 0u64..10_000, steps in 1usize..60) {
        let (_, _, data) = small_design();
        let mut rng = RngStream::new(seed, 0);
        let mut tree = DecisionTree::stump(0.0);
        let mut assign = assign_rows(&tree, &data);
        for _ in 0..steps {
            let p = propose(&tree, &assign, &data, &MoveProbs::default(), &mut rng);
            prop_assert_eq!(&p.assignment, &assign_rows(&p.tree, &data));
            let counts: usize = p.tree.leaves().iter()
                .map(|&l| p.assignment.iter().filter(|&&a| a as usize == l).count()).sum();
            prop_assert_eq!(counts, data.n_rows());
            if p.feasible {
                prop_assert!(!has_empty_leaf(&p.tree, &data));
                prop_assert!(p.log_q_ratio.is_finite());
                tree = p.tree;
                assign = p.assignment;
            }
        }
    }
}
