use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ConfigError, ResolvedPriors, RunConfig};
use super::dataset::{Dataset, IngestError, ResponseData};
use super::store::{read_draws, read_manifest, write_manifest, DrawRecord, DrawWriter, Manifest};
use super::CliError;
use crate::diagnostics::{partial_dependence, waic, LogLikMatrix, PartialDependence, PdOptions, Waic};
use crate::leaf_prior::{calibrate, calibrate_approx};
use crate::models::{
    group_rows, CountKind, CountModel, Draw, Family, ForestSpec, HetModel, IdentifiedLogit, Model, Multinomial, PredictionContext, Sweep,
};
use crate::tree::{BinnedData, CutpointGrid, Design};

/// A model ready to sample, with everything the manifest records about it.
pub struct Prepared {
    pub model: Box<dyn Model>,
    pub grid: CutpointGrid,
    pub priors: ResolvedPriors,
    pub class_labels: Vec<String>,
    /// Categorical responses: model row of every input row after identical
    /// covariate rows are pooled.
    pub group_of: Vec<usize>,
}

pub fn prepare(config: &RunConfig, data: &Dataset) -> Result<Prepared, CliError> {
    config.validate()?;
    let family = config.family()?;
    let priors = config.resolve(data)?;
    let grid = CutpointGrid::from_design(&data.design, config.max_cuts);
    let binned = BinnedData::new(&data.design, &grid);
    let options = config.sampler_options();
    let mut class_labels = Vec::new();
    let mut group_of = Vec::new();
    let model: Box<dyn Model> = match &data.response {
        ResponseData::Classes { labels, counts } => {
            class_labels = labels.clone();
            let grouped = group_rows(&data.design, counts);
            let binned = BinnedData::new(&grouped.design, &grid);
            let counts = &grouped.counts;
            group_of = grouped.group_of;
            let spec = priors.function_spec()?;
            let n_classes = labels.len();
            let needed = if family == Family::Multinomial { n_classes >= 2 } else { n_classes == 2 };
            if !needed {
                return Err(IngestError::InvalidResponse(format!("{family} cannot model {n_classes} classes")).into());
            }
            match family {
                Family::BinaryLogitIdentified => Box::new(IdentifiedLogit::new(binned, counts.clone(), spec, options)?),
                _ => Box::new(Multinomial::new(binned, counts.clone(), n_classes, spec, options)?.with_family(family)),
            }
        }
        ResponseData::Counts(y) => {
            let kind = CountKind::from_family(family).ok_or_else(|| ConfigError(format!("{family} is not a count model")))?;
            let mu0 = priors.mu0.expect("count priors carry a base rate");
            let offset = data.offset.clone().unwrap_or_else(|| vec![mu0; y.len()]);
            let zero = priors.zero.unwrap_or(ForestSpec::new(config.zero_m, config.zero_a0));
            Box::new(CountModel::new(
                kind,
                binned,
                y.clone(),
                offset,
                mu0,
                priors.function_spec()?,
                zero,
                config.kappa_prior(),
                options,
            )?)
        }
        ResponseData::Continuous(y) => Box::new(HetModel::new(binned, y.clone(), config.het_settings(family), options)?),
    };
    Ok(Prepared { model, grid, priors, class_labels, group_of })
}

pub struct FitOutput {
    pub manifest: Manifest,
    /// Kept draws, when requested.
    pub draws: Vec<Draw>,
}

fn sampling_error(iteration: usize) -> impl Fn(crate::error::Error) -> CliError {
    move |e| CliError::Numerical(format!("sweep {iteration}: {e}"))
}

/// Run the configured chain and persist every kept draw to `out_dir`.
pub fn fit(config: &RunConfig, data: &Dataset, out_dir: &Path, keep_draws: bool) -> Result<FitOutput, CliError> {
    let start = Instant::now();
    let Prepared { mut model, grid, priors, class_labels, group_of } = prepare(config, data)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| CliError::Output(format!("cannot start worker pool: {e}")))?;
    let mut writer = DrawWriter::create(out_dir)?;
    let mut kept = Vec::new();
    let mut n_draws = 0;
    let report_every = (config.iterations / 10).max(1);
    pool.install(|| -> Result<(), CliError> {
        for it in 0..config.iterations {
            model.step(Sweep { iteration: it, burn_in: it < config.burn_in }).map_err(sampling_error(it))?;
            if it >= config.burn_in && (it - config.burn_in + 1).is_multiple_of(config.thin) {
                let record = DrawRecord::capture(n_draws, it, model.as_ref());
                if let Some(i) = record.log_lik.iter().position(|v| !v.is_finite()) {
                    return Err(CliError::Numerical(format!("sweep {it}: log likelihood of row {i} is {}", record.log_lik[i])));
                }
                if record.fitted.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(CliError::Numerical(format!("sweep {it}: non-finite fitted function value")));
                }
                writer.write(&record)?;
                if keep_draws {
                    kept.push(model.draw());
                }
                n_draws += 1;
            }
            if (it + 1) % report_every == 0 {
                log::info!("sweep {}/{}", it + 1, config.iterations);
            }
        }
        Ok(())
    })?;
    writer.finish()?;
    let acceptance =
        model.move_stats().iter().map(|s| if s.proposed == 0 { 0.0 } else { s.accepted as f64 / s.proposed as f64 }).collect();
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        family: model.family(),
        config: config.clone(),
        priors,
        seed: config.seed,
        workers: config.workers,
        n_rows: model.n_rows(),
        n_draws,
        wall_time_secs: start.elapsed().as_secs_f64(),
        grid,
        encoding: data.encoding.clone(),
        context: model.prediction_context(),
        class_labels,
        group_of,
        acceptance,
    };
    write_manifest(out_dir, &manifest)?;
    Ok(FitOutput { manifest, draws: kept })
}

/// Per-draw predictive summaries, indexed `[draw][row][output]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Predictions {
    pub names: Vec<String>,
    pub values: Vec<Vec<Vec<f64>>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
}

fn bins_of(grid: &CutpointGrid, row: &[f64]) -> Vec<u16> {
    row.iter().enumerate().map(|(j, &x)| grid.bin(j, x)).collect()
}

pub fn predict_draws(
    family: Family,
    context: PredictionContext,
    grid: &CutpointGrid,
    draws: &[Draw],
    design: &Design,
    offsets: Option<&[f64]>,
) -> Predictions {
    let bins: Vec<Vec<u16>> = (0..design.n_rows()).map(|i| bins_of(grid, design.row(i))).collect();
    let values = draws
        .par_iter()
        .map(|d| {
            bins.iter()
                .enumerate()
                .map(|(i, b)| {
                    let offset = offsets.map_or(context.offset, |o| o[i]);
                    family.evaluate(&d.function_values(b), d, offset, context.center)
                })
                .collect()
        })
        .collect();
    Predictions { names: family.output_names(context.n_classes), values }
}

impl Predictions {
    pub fn n_rows(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// Posterior mean and 5/50/95% quantiles per row and output.
    pub fn summary(&self) -> Vec<Vec<Summary>> {
        use statrs::statistics::{Data, OrderStatistics};
        let s = self.values.len() as f64;
        (0..self.n_rows())
            .map(|i| {
                (0..self.names.len())
                    .map(|k| {
                        let col: Vec<f64> = self.values.iter().map(|d| d[i][k]).collect();
                        let mean = col.iter().sum::<f64>() / s;
                        let mut data = Data::new(col);
                        Summary { mean, q05: data.quantile(0.05), q50: data.quantile(0.5), q95: data.quantile(0.95) }
                    })
                    .collect()
            })
            .collect()
    }

    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["row".to_string()];
        for n in &self.names {
            header.extend(["mean", "q05", "q50", "q95"].iter().map(|s| format!("{n}_{s}")));
        }
        w.write_record(&header).map_err(output_error)?;
        for (i, row) in self.summary().iter().enumerate() {
            let mut rec = vec![i.to_string()];
            for s in row {
                rec.extend([s.mean, s.q05, s.q50, s.q95].iter().map(f64::to_string));
            }
            w.write_record(&rec).map_err(output_error)?;
        }
        w.flush().map_err(|e| CliError::Output(e.to_string()))
    }

    pub fn write_draws_csv<W: Write>(&self, out: W) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["draw".to_string(), "row".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header).map_err(output_error)?;
        for (s, draw) in self.values.iter().enumerate() {
            for (i, row) in draw.iter().enumerate() {
                let mut rec = vec![s.to_string(), i.to_string()];
                rec.extend(row.iter().map(f64::to_string));
                w.write_record(&rec).map_err(output_error)?;
            }
        }
        w.flush().map_err(|e| CliError::Output(e.to_string()))
    }
}

fn output_error(e: csv::Error) -> CliError {
    CliError::Output(e.to_string())
}

/// Stored draws of a run, rebuilt as trees.
pub fn load_run(dir: &Path) -> Result<(Manifest, Vec<Draw>), CliError> {
    let manifest = read_manifest(dir)?;
    let draws = read_draws(dir)?.iter().map(DrawRecord::to_draw).collect();
    Ok((manifest, draws))
}

/// Predictions from a stored run at the rows of `data_path`.
pub fn predict_stored(dir: &Path, data_path: &Path) -> Result<Predictions, CliError> {
    let (manifest, draws) = load_run(dir)?;
    let (design, offsets) = manifest.encoding.apply_path(data_path)?;
    Ok(predict_draws(manifest.family, manifest.context, &manifest.grid, &draws, &design, offsets.as_deref()))
}

pub fn waic_report(dir: &Path) -> Result<Waic, CliError> {
    let rows: Vec<Vec<f64>> = read_draws(dir)?.into_iter().map(|r| r.log_lik).collect();
    Ok(waic(&LogLikMatrix::from_rows(&rows)?)?)
}

/// What to compute partial dependence of, and where.
#[derive(Clone, Debug, PartialEq)]
pub struct PdRequest {
    pub variable: String,
    /// Output name as listed by the family, e.g. `prob_1` or `omega`.
    pub output: String,
    /// Explicit grid; otherwise `points` evenly spaced values over the
    /// observed range.
    pub grid: Option<Vec<f64>>,
    pub points: usize,
    pub options: PdOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PdReport {
    pub variable: String,
    pub output: String,
    #[serde(flatten)]
    pub curves: PartialDependence,
}

pub fn pd_report(dir: &Path, data_path: &Path, request: &PdRequest) -> Result<PdReport, CliError> {
    let (manifest, draws) = load_run(dir)?;
    let (design, _) = manifest.encoding.apply_path(data_path)?;
    let names = manifest.encoding.column_names();
    let var = names
        .iter()
        .position(|n| *n == request.variable)
        .ok_or_else(|| ConfigError(format!("unknown predictor '{}'; expected one of {names:?}", request.variable)))?;
    let outputs = manifest.family.output_names(manifest.context.n_classes);
    let k = outputs
        .iter()
        .position(|n| *n == request.output)
        .ok_or_else(|| ConfigError(format!("unknown output '{}'; expected one of {outputs:?}", request.output)))?;
    let rows: Vec<Vec<f64>> = (0..design.n_rows()).map(|i| design.row(i).to_vec()).collect();
    let grid = match &request.grid {
        Some(g) => g.clone(),
        None => {
            if request.points < 2 {
                return Err(ConfigError("partial dependence needs at least 2 grid points".into()).into());
            }
            let lo = design.column(var).fold(f64::INFINITY, f64::min);
            let hi = design.column(var).fold(f64::NEG_INFINITY, f64::max);
            let step = (hi - lo) / (request.points - 1) as f64;
            (0..request.points).map(|i| lo + step * i as f64).collect()
        }
    };
    let (family, ctx, cuts) = (manifest.family, manifest.context, &manifest.grid);
    let functional = |d: &Draw, row: &[f64]| family.evaluate(&d.function_values(&bins_of(cuts, row)), d, ctx.offset, ctx.center)[k];
    let curves = partial_dependence(&rows, var, &grid, &draws, functional, &request.options)?;
    Ok(PdReport { variable: request.variable.clone(), output: request.output.clone(), curves })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CalibrationPair {
    pub c: f64,
    pub d: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub a0: f64,
    pub m: usize,
    pub exact: CalibrationPair,
    pub approximate: CalibrationPair,
}

pub fn calibrate_report(a0: f64, m: usize) -> Result<CalibrationReport, CliError> {
    let (c, d) = calibrate(a0, m)?;
    let (ca, da) = calibrate_approx(a0, m)?;
    Ok(CalibrationReport { a0, m, exact: CalibrationPair { c, d }, approximate: CalibrationPair { c: ca, d: da } })
}
