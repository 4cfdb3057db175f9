use std::collections::HashMap;

use rand_distr::{Binomial, Distribution};

use super::likelihood::multinomial_log_pmf;
use super::{sweep_forests, Draw, Family, ForestSpec, Model, PredictionContext, Response, SamplerOptions, Sweep};
use crate::error::{Error, Result};
use crate::forest::{Forest, MoveStats};
use crate::special::{log_sum_exp, sample_gamma, RngStream};
use crate::tree::{BinnedData, Design};

/// Class probabilities from per-class `ln f` values.
pub fn predict_probs(log_f: &[f64]) -> Vec<f64> {
    let norm = log_f.iter().copied().fold(f64::NEG_INFINITY, log_sum_exp);
    let mut probs: Vec<f64> = log_f.iter().map(|l| (l - norm).exp()).collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    probs
}

/// Distinct covariate rows with their pooled class counts.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupedRows {
    pub design: Design,
    pub counts: Vec<Vec<u32>>,
    /// Group index of every input row.
    pub group_of: Vec<usize>,
}

/// Merge identical covariate rows, in order of first appearance.
pub fn group_rows(design: &Design, counts: &[Vec<u32>]) -> GroupedRows {
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut pooled: Vec<Vec<u32>> = Vec::new();
    let mut group_of = Vec::with_capacity(design.n_rows());
    for (i, c) in counts.iter().enumerate() {
        let row = design.row(i);
        let key: Vec<u64> = row.iter().map(|x| x.to_bits()).collect();
        let g = *index.entry(key).or_insert_with(|| {
            rows.push(row.to_vec());
            pooled.push(vec![0; c.len()]);
            rows.len() - 1
        });
        for (p, &y) in pooled[g].iter_mut().zip(c) {
            *p += y;
        }
        group_of.push(g);
    }
    GroupedRows { design: Design::new(rows.len(), design.n_cols(), rows.concat()), counts: pooled, group_of }
}

pub(super) fn check_counts(counts: &[Vec<u32>], n_rows: usize, n_classes: usize) -> Result<()> {
    if counts.len() != n_rows {
        return Err(Error::InvalidParameter(format!("{} count rows for {} design rows", counts.len(), n_rows)));
    }
    if counts.iter().any(|c| c.len() != n_classes) {
        return Err(Error::InvalidParameter(format!("every count row needs {n_classes} classes")));
    }
    Ok(())
}

/// Multinomial logistic regression with one log-linear function per class,
/// updated through a per-row gamma latent.
pub struct Multinomial {
    family: Family,
    data: BinnedData,
    counts: Vec<Vec<u32>>,
    /// Class-major copy of the counts used as forest weights.
    class_counts: Vec<Vec<f64>>,
    forests: Vec<Forest>,
    phi: Vec<f64>,
    latent_rng: RngStream,
    forest_rngs: Vec<RngStream>,
    options: SamplerOptions,
    zeros: Vec<f64>,
}

impl Multinomial {
    pub fn new(data: BinnedData, counts: Vec<Vec<u32>>, n_classes: usize, spec: ForestSpec, options: SamplerOptions) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::InvalidParameter("multinomial model needs at least two classes".into()));
        }
        check_counts(&counts, data.n_rows(), n_classes)?;
        let prior = spec.leaf_prior()?;
        let family = if n_classes == 2 { Family::BinaryLogitUnidentified } else { Family::Multinomial };
        let n = data.n_rows();
        let mut model = Self {
            family,
            forests: (0..n_classes).map(|_| Forest::new(spec.m, prior, &data)).collect(),
            forest_rngs: (0..n_classes).map(|j| options.function_stream(j)).collect(),
            latent_rng: options.latent_stream(),
            class_counts: Vec::new(),
            counts: Vec::new(),
            phi: vec![0.0; n],
            zeros: vec![0.0; n],
            data,
            options,
        };
        model.set_counts(counts);
        Ok(model)
    }

    /// Treat a two-class fit as a general multinomial.
    pub fn with_family(mut self, family: Family) -> Self {
        self.family = family;
        self
    }

    fn set_counts(&mut self, counts: Vec<Vec<u32>>) {
        let n_classes = self.forests.len();
        self.class_counts = (0..n_classes).map(|j| counts.iter().map(|c| c[j] as f64).collect()).collect();
        self.counts = counts;
    }

    pub fn forests(&self) -> &[Forest] {
        &self.forests
    }

    pub fn n_classes(&self) -> usize {
        self.forests.len()
    }

    pub fn latents(&self) -> &[f64] {
        &self.phi
    }

    fn log_f_row(&self, i: usize) -> Vec<f64> {
        self.forests.iter().map(|f| f.log_fit()[i]).collect()
    }
}

impl Model for Multinomial {
    fn family(&self) -> Family {
        self.family
    }

    fn n_rows(&self) -> usize {
        self.data.n_rows()
    }

    fn step(&mut self, _sweep: Sweep) -> Result<()> {
        if !self.options.prior_only {
            for i in 0..self.phi.len() {
                let n: u32 = self.counts[i].iter().sum();
                self.phi[i] = if n == 0 {
                    0.0
                } else {
                    let log_rate = self.forests.iter().map(|f| f.log_fit()[i]).fold(f64::NEG_INFINITY, log_sum_exp);
                    sample_gamma(n as f64, log_rate.exp(), &mut self.latent_rng)?
                };
            }
        }
        let Self { forests, forest_rngs, class_counts, phi, zeros, data, options, .. } = self;
        let v: &[f64] = if options.prior_only { zeros } else { phi };
        let jobs = forests
            .iter_mut()
            .zip(forest_rngs.iter_mut())
            .zip(class_counts.iter())
            .map(|((f, rng), u)| (f, rng, if options.prior_only { zeros.as_slice() } else { u.as_slice() }, v))
            .collect();
        sweep_forests(jobs, data, &options.trees)
    }

    fn log_likelihood(&self) -> Vec<f64> {
        (0..self.n_rows()).map(|i| multinomial_log_pmf(&self.counts[i], &self.log_f_row(i))).collect()
    }

    fn draw(&self) -> Draw {
        Draw {
            functions: self.forests.iter().map(|f| f.trees().to_vec()).collect(),
            kappa: None,
            sigma2: None,
            count_component: None,
        }
    }

    fn log_fits(&self) -> Vec<&[f64]> {
        self.forests.iter().map(|f| f.log_fit()).collect()
    }

    fn move_stats(&self) -> Vec<MoveStats> {
        self.forests.iter().map(Forest::move_stats).collect()
    }

    fn simulate_response(&self, rng: &mut RngStream) -> Result<Response> {
        // Sequential binomial splitting of each row's total.
        let mut out = Vec::with_capacity(self.n_rows());
        for i in 0..self.n_rows() {
            let probs = predict_probs(&self.log_f_row(i));
            let mut left: u32 = self.counts[i].iter().sum();
            let mut mass = 1.0;
            let mut row = vec![0u32; probs.len()];
            for (j, &p) in probs.iter().enumerate() {
                if left == 0 {
                    break;
                }
                if j + 1 == probs.len() || mass <= 0.0 {
                    row[j] = left;
                    break;
                }
                let q = (p / mass).clamp(0.0, 1.0);
                let k = Binomial::new(left as u64, q).map_err(|e| Error::Numerical(e.to_string()))?.sample(rng) as u32;
                row[j] = k;
                left -= k;
                mass -= p;
            }
            out.push(row);
        }
        Ok(Response::Classes(out))
    }

    fn set_response(&mut self, response: Response) -> Result<()> {
        match response {
            Response::Classes(counts) => {
                check_counts(&counts, self.n_rows(), self.n_classes())?;
                self.set_counts(counts);
                Ok(())
            }
            _ => Err(Error::InvalidParameter("multinomial model needs class counts".into())),
        }
    }

    fn prediction_context(&self) -> PredictionContext {
        PredictionContext { offset: 1.0, center: 0.0, n_classes: self.n_classes() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::CutpointGrid;

    #[test]
    fn equal_functions_give_uniform_probs() {
        let p = predict_probs(&[0.7; 4]);
        assert!(p.iter().all(|&x| (x - 0.25).abs() < 1e-15));
        let shifted = predict_probs(&[0.1 + 3.0, -0.4 + 3.0, 1.2 + 3.0]);
        let base = predict_probs(&[0.1, -0.4, 1.2]);
        for (a, b) in shifted.iter().zip(&base) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((base.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grouping_pools_identical_rows() {
        let design = Design::from_rows(&[vec![0.0, 1.0], vec![1.0, 1.0], vec![0.0, 1.0]]);
        let g = group_rows(&design, &[vec![1, 0], vec![0, 1], vec![2, 1]]);
        assert_eq!(g.design.n_rows(), 2);
        assert_eq!(g.counts, vec![vec![3, 1], vec![0, 1]]);
        assert_eq!(g.group_of, vec![0, 1, 0]);
    }

    #[test]
    fn cache_consistent_after_steps() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64 / 30.0]).collect();
        let design = Design::from_rows(&rows);
        let data = BinnedData::new(&design, &CutpointGrid::from_design(&design, 100));
        let counts: Vec<Vec<u32>> = (0..30).map(|i| if i < 15 { vec![2, 0, 1] } else { vec![0, 3, 0] }).collect();
        let mut model = Multinomial::new(data, counts, 3, ForestSpec::new(10, 2.0), SamplerOptions::new(4)).unwrap();
        for it in 0..20 {
            model.step(Sweep { iteration: it, burn_in: true }).unwrap();
        }
        for f in model.forests() {
            assert!(f.cache_drift() < 1e-10);
        }
        assert!(model.log_likelihood().iter().all(|l| l.is_finite() && *l <= 0.0));
    }
}
