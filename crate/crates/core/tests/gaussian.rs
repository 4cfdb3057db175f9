mod common;

use common::batch_mean_and_se;
use llbart::forest::TreeSettings;
use llbart::gaussian::{
    default_sigma_mu, leaf_log_marginal_full, leaf_posterior, sample_sigma0, GaussForest, GaussLeafStat, SigmaPrior,
};
use llbart::models::{HetModel, HetSettings, Model, SamplerOptions, Sweep};
use llbart::special::RngStream;
use llbart::tree::{BinnedData, CutpointGrid, Design};
use llbart_oracle::{integrate, log_integral, mean_and_se, variance_and_se};
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn line_data(n: usize) -> BinnedData {
    let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![(i as f64 + 0.5) / n as f64]).collect();
    let design = Design::from_rows(&rows);
    BinnedData::new(&design, &CutpointGrid::from_design(&design, 100))
}

fn normal_log_pdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (2.0 * std::f64::consts::PI * var).ln() - 0.5 * (x - mean).powi(2) / var
}

#[test]
fn leaf_marginal_matches_quadrature() {
    let cases: [(&[f64], &[f64], f64); 4] = [
        (&[0.3], &[0.5], 0.2),
        (&[1.0, -0.4, 2.2], &[1.0, 0.25, 4.0], 0.7),
        (&[-3.0, -2.5, -2.9, -3.3], &[0.1, 0.1, 0.2, 0.1], 0.05),
        (&[10.0, 8.0], &[2.0, 3.0], 5.0),
    ];
    for (r, w, sigma_mu) in cases {
        let g = |mu: f64| {
            normal_log_pdf(mu, 0.0, sigma_mu * sigma_mu)
                + r.iter().zip(w).map(|(&ri, &wi)| normal_log_pdf(ri, mu, wi)).sum::<f64>()
        };
        let want = log_integral(g, 0.0, sigma_mu);
        let got = leaf_log_marginal_full(r, w, sigma_mu);
        assert!((got - want).abs() < 1e-8, "{r:?}: {got} vs {want}");
    }
}

#[test]
fn equal_precision_single_row() {
    let sigma_mu: f64 = 0.4;
    let (mean, var) = leaf_posterior(GaussLeafStat { precision: 1.0 / sigma_mu.powi(2), weighted: 1.3 / sigma_mu.powi(2) }, sigma_mu);
    assert!((mean - 0.65).abs() < 1e-14);
    assert!((var - sigma_mu * sigma_mu / 2.0).abs() < 1e-14);
}

#[test]
fn single_leaf_draws_match_conjugate_posterior() {
    // A constant covariate admits no split, so the stump's mean is redrawn every step.
    let design = Design::from_rows(&vec![vec![0.0]; 4]);
    let data = BinnedData::new(&design, &CutpointGrid::from_design(&design, 100));
    let sigma_mu = 0.5;
    let mut forest = GaussForest::new(1, sigma_mu, &data);
    let y = [0.4, 1.1, 0.9, -0.2];
    let w = [0.3, 0.5, 1.0, 2.0];
    let mut rng = RngStream::new(3, 1);
    let draws: Vec<f64> = (0..100_000)
        .map(|_| {
            forest.update_tree(0, &y, &w, &data, &TreeSettings::default(), &mut rng).unwrap();
            forest.fit()[0]
        })
        .collect();
    // Posterior moments by quadrature of prior × likelihood.
    let log_post = |mu: f64| {
        normal_log_pdf(mu, 0.0, sigma_mu * sigma_mu) + y.iter().zip(&w).map(|(&r, &v)| normal_log_pdf(r, mu, v)).sum::<f64>()
    };
    let z = integrate(|mu| log_post(mu).exp(), -10.0, 10.0, 1e-12, 0.0);
    let want_mean = integrate(|mu| mu * log_post(mu).exp(), -10.0, 10.0, 1e-12, 0.0) / z;
    let want_var = integrate(|mu| (mu - want_mean).powi(2) * log_post(mu).exp(), -10.0, 10.0, 1e-12, 0.0) / z;
    let (mean, se) = mean_and_se(&draws);
    assert!((mean - want_mean).abs() < 4.0 * se, "mean {mean} vs {want_mean}");
    let (var, vse) = variance_and_se(&draws);
    assert!((var - want_var).abs() < 4.0 * vse, "var {var} vs {want_var}");
}

#[test]
fn sigma_prior_places_estimate_at_quantile() {
    let prior = SigmaPrior::from_sd_estimate(2.0, 3.0, 0.9).unwrap();
    // σ² = νλ / X with X ~ χ²_ν, so Pr(σ < 2) = Pr(X > νλ / 4).
    let chi = ChiSquared::new(3.0).unwrap();
    let p = 1.0 - chi.cdf(prior.nu * prior.lambda / 4.0);
    assert!((p - 0.9).abs() < 1e-10, "{p}");
}

#[test]
fn sigma_posterior_mean_matches_quadrature() {
    let e = [0.3, -1.2, 0.8, 2.1, -0.4];
    let mult = [1.0, 2.0, 0.5, 3.0, 1.0];
    let prior = SigmaPrior { nu: 3.0, lambda: 0.7 };
    // Density of σ² ∝ (σ²)^{-ν/2-1} e^{-νλ/2σ²} Π N(e_i | 0, σ² v_i), integrated over t = ln σ².
    let log_post = |t: f64| {
        let s2 = t.exp();
        -(0.5 * prior.nu + 1.0) * t - 0.5 * prior.nu * prior.lambda / s2
            + e.iter().zip(&mult).map(|(&ei, &vi)| normal_log_pdf(ei, 0.0, s2 * vi)).sum::<f64>()
            + t
    };
    let log_z = log_integral(log_post, 0.0, 0.5);
    let want = (log_integral(|t| log_post(t) + t, 0.0, 0.5) - log_z).exp();
    let mut rng = RngStream::new(21, 0);
    let draws: Vec<f64> = (0..100_000).map(|_| sample_sigma0(&e, &mult, prior, &mut rng).unwrap()).collect();
    let (mean, se) = mean_and_se(&draws);
    assert!((mean - want).abs() < 4.0 * se, "{mean} vs {want} (se {se})");
}

#[test]
fn huge_prior_df_pins_sigma_at_scale() {
    let prior = SigmaPrior { nu: 1e10, lambda: 0.37 };
    let mut rng = RngStream::new(2, 0);
    for _ in 0..100 {
        let s2 = sample_sigma0(&[5.0, -3.0, 8.0], &[1.0, 1.0, 1.0], prior, &mut rng).unwrap();
        assert!((s2 / 0.37 - 1.0).abs() < 1e-3, "{s2}");
    }
}

#[test]
fn unit_multipliers_are_the_homoscedastic_update() {
    // Scaling residuals by √v with unit multipliers must give the same draw.
    let prior = SigmaPrior { nu: 3.0, lambda: 0.5 };
    let e = [0.4, -0.9, 1.7];
    let v = [2.0f64, 0.5, 3.0];
    let standardized: Vec<f64> = e.iter().zip(&v).map(|(x, w)| x / w.sqrt()).collect();
    let mut a = RngStream::new(8, 0);
    let mut b = RngStream::new(8, 0);
    for _ in 0..50 {
        let x = sample_sigma0(&e, &v, prior, &mut a).unwrap();
        let y = sample_sigma0(&standardized, &[1.0; 3], prior, &mut b).unwrap();
        assert!(((x - y) / y).abs() < 1e-12);
    }
}

#[test]
fn sigma_update_rejects_empty_and_bad_multipliers() {
    let prior = SigmaPrior { nu: 3.0, lambda: 1.0 };
    let mut rng = RngStream::new(0, 0);
    assert!(sample_sigma0(&[], &[], prior, &mut rng).is_err());
    assert!(sample_sigma0(&[1.0], &[0.0], prior, &mut rng).is_err());
}

#[test]
fn prior_only_forest_variance_is_m_sigma_mu_squared() {
    let n = 30;
    let data = line_data(n);
    let m = 20;
    let sigma_mu = default_sigma_mu(-1.0, 3.0, 2.0, m);
    let mut forest = GaussForest::new(m, sigma_mu, &data);
    let y = vec![0.0; n];
    let w = vec![f64::INFINITY; n];
    let mut rng = RngStream::new(4, 1);
    let probes = [0, 11, 29];
    let mut traces = vec![Vec::new(); probes.len()];
    for it in 0..20_500 {
        forest.sweep(&y, &w, &data, &TreeSettings::default(), &mut rng).unwrap();
        if it >= 500 {
            for (k, &i) in probes.iter().enumerate() {
                traces[k].push(forest.fit()[i]);
            }
        }
    }
    let target = m as f64 * sigma_mu * sigma_mu;
    for trace in &traces {
        let (mean, se) = batch_mean_and_se(trace, 50);
        assert!(mean.abs() < 4.0 * se);
        let squares: Vec<f64> = trace.iter().map(|x| x * x).collect();
        let (var, vse) = batch_mean_and_se(&squares, 50);
        assert!((var - target).abs() < 4.0 * vse, "{var} vs {target} (se {vse})");
    }
}

#[test]
fn constant_variance_model_is_homoscedastic_backfitting() {
    let n = 40;
    let data = line_data(n);
    let y: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.37).sin() + 0.1 * i as f64 / n as f64).collect();
    let settings = HetSettings { mean_trees: 10, precision: None, ..HetSettings::default() };
    let options = SamplerOptions::new(5);
    let mut model = HetModel::new(data.clone(), y.clone(), settings, options).unwrap();

    // Reference: plain backfitting plus the conjugate noise update on the same streams.
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let centered: Vec<f64> = y.iter().map(|v| v - 0.5 * (lo + hi)).collect();
    let mean_y = y.iter().sum::<f64>() / n as f64;
    let sd = (y.iter().map(|v| (v - mean_y).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
    let prior = SigmaPrior::from_sd_estimate(sd, 3.0, 0.9).unwrap();
    let mut forest = GaussForest::new(10, default_sigma_mu(lo, hi, 2.0, 10), &data);
    let mut sigma2 = sd * sd;
    let mut tree_rng = RngStream::new(5, 1);
    let mut noise_rng = RngStream::new(5, 0);
    let ones = vec![1.0; n];
    for it in 0..30 {
        model.step(Sweep { iteration: it, burn_in: false }).unwrap();
        let w = vec![sigma2; n];
        forest.sweep(&centered, &w, &data, &TreeSettings::default(), &mut tree_rng).unwrap();
        let resid: Vec<f64> = centered.iter().zip(forest.fit()).map(|(a, b)| a - b).collect();
        sigma2 = sample_sigma0(&resid, &ones, prior, &mut noise_rng).unwrap();
        assert_eq!(model.sigma2().to_bits(), sigma2.to_bits(), "iteration {it}");
        assert!(model.log_fits()[0].iter().zip(forest.fit()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}

proptest! {
    #[test]
    fn equal_variances_scale_out(r in prop::collection::vec(-5.0f64..5.0, 1..8), w in 0.05f64..5.0, sigma_mu in 0.05f64..3.0) {
        // A common variance is the homoscedastic marginal with the rows' stats.
        let ws = vec![w; r.len()];
        let got = leaf_log_marginal_full(&r, &ws, sigma_mu);
        let n = r.len() as f64;
        let sum: f64 = r.iter().sum();
        let ss: f64 = r.iter().map(|x| x * x).sum();
        let s2 = sigma_mu * sigma_mu;
        let want = -0.5 * n * (2.0 * std::f64::consts::PI * w).ln() - 0.5 * ss / w
            - 0.5 * (1.0 + n * s2 / w).ln()
            + 0.5 * (sum / w).powi(2) / (1.0 / s2 + n / w);
        prop_assert!((got - want).abs() < 1e-10 * want.abs().max(1.0));
    }
}
