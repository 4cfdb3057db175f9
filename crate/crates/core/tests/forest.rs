mod common;

use common::{batch_mean_and_se, leaf_prior_log_density};
use llbart::forest::{Forest, TreeSettings};
use llbart::leaf_prior::LeafPrior;
use llbart::special::RngStream;
use llbart::tree::{BinnedData, CutpointGrid, DecisionTree, Design, SplitRule};
use llbart_oracle::{cumulative_cdf, integrate, ks_critical_001, ks_statistic};
use proptest::prelude::*;
use rand::Rng;

fn line_data(n: usize) -> (Design, BinnedData) {
    let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![(i as f64 + 0.5) / n as f64, (i % 4) as f64]).collect();
    let design = Design::from_rows(&rows);
    let grid = CutpointGrid::from_design(&design, 100);
    let data = BinnedData::new(&design, &grid);
    (design, data)
}

fn poisson_weights(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = RngStream::new(seed, 0);
    let u = (0..n).map(|i| (rng.random_range(0..4) + if i < n / 2 { 0 } else { 5 }) as f64).collect();
    (u, vec![1.0; n])
}

#[test]
fn figure_tree_product() {
    // x1 < 0.9 ? (x2 < 0.4 ? λ3 : λ2) : λ1 with λ = (2, 3, 5).
    let design = Design::from_rows(&[vec![0.5, 0.7], vec![0.95, 0.2], vec![0.5, 0.2]]);
    let grid = CutpointGrid::new(vec![vec![0.9], vec![0.4]]);
    let data = BinnedData::new(&design, &grid);
    let mut tree = DecisionTree::stump(0.0);
    let (low, high) = tree.grow(DecisionTree::ROOT, SplitRule { var: 0, cut: 0 }, 0.0);
    tree.set_value(high, 2f64.ln());
    let (mu3, mu2) = tree.grow(low, SplitRule { var: 1, cut: 0 }, 0.0);
    tree.set_value(mu2, 3f64.ln());
    tree.set_value(mu3, 5f64.ln());
    let mut forest = Forest::new(1, LeafPrior::new(1.0, 1).unwrap(), &data);
    forest.set_tree(0, tree, &data);
    let values: Vec<f64> = (0..3).map(|i| forest.log_eval_bins(data.row(i)).exp()).collect();
    assert!((values[0] - 3.0).abs() < 1e-12);
    assert!((values[1] - 2.0).abs() < 1e-12);
    assert!((values[2] - 5.0).abs() < 1e-12);
    for i in 0..3 {
        assert!((forest.log_fit()[i] - values[i].ln()).abs() < 1e-12);
    }
}

#[test]
fn partial_fit_matches_brute_force_product() {
    let n = 60;
    let (_, data) = line_data(n);
    let m = 8;
    let mut forest = Forest::new(m, LeafPrior::new(1.0, m).unwrap(), &data);
    let (u, v) = poisson_weights(n, 3);
    let settings = TreeSettings::default();
    let mut rng = RngStream::new(4, 1);
    for _ in 0..25 {
        forest.sweep(&u, &v, &data, &settings, &mut rng).unwrap();
    }
    for h in 0..m {
        let stats = forest.leaf_stats(h, &u, &v);
        let trees = forest.trees();
        let leaves = trees[h].leaves();
        let mut want = vec![(0.0, 0.0); leaves.len()];
        for i in 0..n {
            let bins = data.row(i);
            let others: f64 =
                trees.iter().enumerate().filter(|&(k, _)| k != h).map(|(_, t)| t.value(t.leaf_for_bins(bins)).exp()).product();
            let slot = leaves.iter().position(|&l| l == trees[h].leaf_for_bins(bins)).unwrap();
            want[slot].0 += u[i];
            want[slot].1 += v[i] * others;
        }
        for (st, (r, s)) in stats.iter().zip(want) {
            assert_eq!(st.r, r);
            assert!(((st.s - s) / s).abs() < 1e-8, "tree {h}: {} vs {s}", st.s);
        }
    }
}

#[test]
fn empty_weights_give_empty_stats() {
    let (_, data) = line_data(30);
    let mut forest = Forest::new(4, LeafPrior::new(1.0, 4).unwrap(), &data);
    let zeros = vec![0.0; 30];
    for h in 0..4 {
        assert!(forest.leaf_stats(h, &zeros, &zeros).iter().all(|s| s.r == 0.0 && s.s == 0.0));
    }
}

#[test]
fn cache_matches_fresh_evaluation_after_sweeps() {
    let n = 80;
    let (_, data) = line_data(n);
    let mut forest = Forest::new(20, LeafPrior::new(2.0, 20).unwrap(), &data);
    let (u, v) = poisson_weights(n, 5);
    let mut rng = RngStream::new(6, 1);
    for _ in 0..50 {
        forest.sweep(&u, &v, &data, &TreeSettings::default(), &mut rng).unwrap();
        for i in 0..n {
            assert!((forest.log_fit()[i] - forest.log_eval_bins(data.row(i))).abs() < 1e-8);
        }
    }
}

#[test]
fn single_stump_leaf_draws_match_quadrature() {
    // One distinct covariate value leaves no usable cut, so every proposal is null.
    let design = Design::from_rows(&vec![vec![1.0]; 5]);
    let grid = CutpointGrid::from_design(&design, 100);
    let data = BinnedData::new(&design, &grid);
    let prior = LeafPrior::new(1.5, 1).unwrap();
    let mut forest = Forest::new(1, prior, &data);
    let y = [0.0, 2.0, 1.0, 4.0, 1.0];
    let v = [1.0; 5];
    let mut rng = RngStream::new(9, 1);
    let n = 20_000;
    let mut logs = Vec::with_capacity(n);
    for _ in 0..n {
        assert!(forest.update_tree(0, &y, &v, &data, &TreeSettings::default(), &mut rng).unwrap());
        logs.push(forest.log_fit()[0]);
    }
    assert_eq!(forest.move_stats().proposed, 0);
    // Posterior over t = ln λ from the raw Poisson likelihood of the five rows.
    let log_post = |t: f64| {
        let lambda = t.exp();
        y.iter().map(|&yi| yi * t - lambda).sum::<f64>() + leaf_prior_log_density(lambda, prior.c, prior.d) + t
    };
    let norm = integrate(|t| log_post(t).exp(), -30.0, 30.0, 1e-12, 0.0);
    let d = ks_statistic(&logs, |xs| cumulative_cdf(|t| log_post(t).exp() / norm, -30.0, xs));
    assert!(d < ks_critical_001(n), "D={d}");
}

#[test]
fn split_marginal_ratio_matches_quadrature() {
    // 1-tree forest on six rows: split versus stump evidence from the raw likelihood.
    let design = Design::from_rows(&(0..6).map(|i| vec![i as f64]).collect::<Vec<_>>());
    let grid = CutpointGrid::from_design(&design, 100);
    let data = BinnedData::new(&design, &grid);
    let prior = LeafPrior::new(1.2, 1).unwrap();
    let y = [0.0, 1.0, 0.0, 4.0, 6.0, 3.0];
    let exposure = [1.0, 0.5, 2.0, 1.0, 1.5, 1.0];
    let mut forest = Forest::new(1, prior, &data);
    let stump_lm: f64 = forest.leaf_stats(0, &y, &exposure).iter().map(|s| prior.log_marginal(*s).unwrap()).sum();
    let mut split = DecisionTree::stump(0.0);
    split.grow(DecisionTree::ROOT, SplitRule { var: 0, cut: 2 }, 0.0);
    forest.set_tree(0, split, &data);
    let split_lm: f64 = forest.leaf_stats(0, &y, &exposure).iter().map(|s| prior.log_marginal(*s).unwrap()).sum();

    let cell_evidence = |rows: std::ops::Range<usize>| {
        let g = |t: f64| {
            let lambda = t.exp();
            rows.clone().map(|i| y[i] * (lambda * exposure[i]).ln() - lambda * exposure[i]).sum::<f64>()
                + leaf_prior_log_density(lambda, prior.c, prior.d)
                + t
        };
        llbart_oracle::log_integral(g, 0.0, 0.5)
    };
    // The y! terms and Σ y ln(exposure) are shared by both trees and cancel.
    let want = cell_evidence(0..3) + cell_evidence(3..6) - cell_evidence(0..6);
    let got = split_lm - stump_lm;
    assert!((got - want).abs() < 1e-8 * want.abs().max(1.0), "{got} vs {want}");
}

#[test]
fn prior_sweeps_reproduce_log_scale_variance() {
    let n = 40;
    let (_, data) = line_data(n);
    let (m, a0) = (10, 1.3);
    let mut forest = Forest::new(m, LeafPrior::new(a0, m).unwrap(), &data);
    let zeros = vec![0.0; n];
    let mut rng = RngStream::new(12, 1);
    let probes = [0, 13, 27, 39];
    let mut traces = vec![Vec::new(); probes.len()];
    for it in 0..21_000 {
        forest.sweep(&zeros, &zeros, &data, &TreeSettings::default(), &mut rng).unwrap();
        if it >= 1000 {
            for (k, &i) in probes.iter().enumerate() {
                traces[k].push(forest.log_fit()[i]);
            }
        }
    }
    for trace in &traces {
        let (mean, se) = batch_mean_and_se(trace, 50);
        assert!(mean.abs() < 4.0 * se, "mean {mean} se {se}");
        let squares: Vec<f64> = trace.iter().map(|x| x * x).collect();
        let (var, vse) = batch_mean_and_se(&squares, 50);
        assert!((var - a0 * a0).abs() < 4.0 * vse, "E[(log f)²] {var} vs {} (se {vse})", a0 * a0);
    }
}

#[test]
fn sweeps_are_deterministic() {
    let n = 50;
    let (_, data) = line_data(n);
    let (u, v) = poisson_weights(n, 1);
    let run = || {
        let mut forest = Forest::new(10, LeafPrior::new(1.0, 10).unwrap(), &data);
        let mut rng = RngStream::new(77, 3);
        for _ in 0..20 {
            forest.sweep(&u, &v, &data, &TreeSettings::default(), &mut rng).unwrap();
        }
        forest.log_fit().to_vec()
    };
    let (a, b) = (run(), run());
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn leaves_stay_finite_and_cache_consistent(seed in 0u64..10_000, scale in 0.01f64..50.0, m in 1usize..12) {
        let n = 30;
        let (_, data) = line_data(n);
        let mut forest = Forest::new(m, LeafPrior::new(1.0, m).unwrap(), &data);
        let mut rng = RngStream::new(seed, 1);
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(0..20) as f64).collect();
        let v: Vec<f64> = (0..n).map(|_| scale * rng.random::<f64>()).collect();
        for _ in 0..10 {
            forest.sweep(&u, &v, &data, &TreeSettings::default(), &mut rng).unwrap();
        }
        prop_assert!(forest.cache_drift() < 1e-8);
        for t in forest.trees() {
            for l in t.leaves() {
                prop_assert!(t.value(l).is_finite());
            }
        }
    }
}
