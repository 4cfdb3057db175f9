use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use llbart::diagnostics::PdOptions;
use llbart::io::{
    calibrate_report, ess_experiment, fit, ingest, pd_report, predict_stored, waic_report, CliError, ConfigError, EssConfig,
    PdRequest, RunConfig,
};
use llbart::models::Family;

#[derive(Parser)]
#[command(name = "llbart", version, about = "Log-linear Bayesian additive regression trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the posterior and write draws.jsonl and manifest.json.
    Fit(FitArgs),
    /// Posterior predictive summaries at new rows.
    Predict(PredictArgs),
    /// Partial dependence of one output on one predictor.
    Pd(PdArgs),
    /// WAIC from the stored pointwise log likelihoods.
    Waic(WaicArgs),
    /// Compare mixing of the identified and unidentified binary logit.
    EssExperiment(EssArgs),
    /// Leaf prior parameters for a given spread and tree count.
    Calibrate(CalibrateArgs),
}

#[derive(Args)]
struct FitArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    model: Option<Family>,
    #[arg(long, value_delimiter = ',')]
    response: Option<Vec<String>>,
    #[arg(long)]
    offset_column: Option<String>,
    #[arg(long, value_delimiter = ',')]
    categorical: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    ordinal: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    exclude: Option<Vec<String>>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    a0: Option<f64>,
    #[arg(long)]
    zero_m: Option<usize>,
    #[arg(long)]
    zero_a0: Option<f64>,
    #[arg(long)]
    variance_m: Option<usize>,
    #[arg(long)]
    variance_a0: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    sigma_quantile: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    mu0: Option<f64>,
    #[arg(long)]
    a_kappa: Option<f64>,
    #[arg(long)]
    b_kappa: Option<f64>,
    #[arg(long)]
    y_star_quantile: Option<f64>,
    #[arg(long)]
    max_cuts: Option<usize>,
    /// Ignore the likelihood and sample the prior.
    #[arg(long)]
    prior_only: bool,
}

macro_rules! override_fields {
    ($args:expr, $config:expr, [$($field:ident),*], [$($opt:ident),*]) => {
        $(if let Some(v) = $args.$field.take() { $config.$field = v; })*
        $(if let Some(v) = $args.$opt.take() { $config.$opt = Some(v); })*
    };
}

impl FitArgs {
    fn into_config(mut self) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => RunConfig::from_path(path)?,
            None => RunConfig::default(),
        };
        override_fields!(
            self,
            c,
            [
                response, categorical, ordinal, exclude, zero_m, zero_a0, variance_m, variance_a0, k, nu, sigma_quantile, alpha,
                beta, iterations, burn_in, thin, seed, workers, a_kappa, b_kappa, y_star_quantile, max_cuts
            ],
            [data, out, model, offset_column, m, a0, mu0]
        );
        c.prior_only |= self.prior_only;
        Ok(c)
    }
}

#[derive(Args)]
struct PredictArgs {
    /// Directory written by `fit`.
    #[arg(long)]
    run: PathBuf,
    /// CSV with the predictor columns used in training.
    #[arg(long)]
    data: PathBuf,
    /// Summary CSV; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write every draw's predictions to this CSV.
    #[arg(long)]
    per_draw: Option<PathBuf>,
}

#[derive(Args)]
struct PdArgs {
    #[arg(long)]
    run: PathBuf,
    /// Training CSV whose rows are averaged over.
    #[arg(long)]
    data: PathBuf,
    /// Design column name; categorical indicators are named `column=level`.
    #[arg(long)]
    var: String,
    /// Output name, e.g. `prob_1`, `mean` or `omega`.
    #[arg(long)]
    output: String,
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 20)]
    points: usize,
    /// Fraction of rows whose individual curves are reported.
    #[arg(long, default_value_t = 0.1)]
    subsample: f64,
    /// Subtract each curve's value at this point.
    #[arg(long)]
    center_at: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct WaicArgs {
    #[arg(long)]
    run: PathBuf,
}

#[derive(Args)]
struct EssArgs {
    /// JSON experiment configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    a0: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl EssArgs {
    fn to_config(&mut self) -> Result<EssConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => {
                let text =
                    std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| ConfigError(format!("invalid experiment config: {e}")))?
            }
            None => EssConfig::default(),
        };
        override_fields!(self, c, [replicates, n, iterations, burn_in, m, a0, alpha, beta, seed], []);
        Ok(c)
    }
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    a0: f64,
    #[arg(long)]
    m: usize,
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
    with_output(out, |w| writeln!(w, "{text}").map_err(|e| CliError::Output(e.to_string())))
}

fn with_output(out: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<(), CliError>) -> Result<(), CliError> {
    match out {
        Some(path) => {
            let file =
                File::create(path).map_err(|e| CliError::Output(format!("cannot create {}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            f(&mut w)?;
            w.flush().map_err(|e| CliError::Output(e.to_string()))
        }
        None => f(&mut io::stdout().lock()),
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Fit(args) => {
            let config = args.into_config()?;
            config.validate()?;
            let data_path = config.data.clone().ok_or_else(|| ConfigError("no data file given".into()))?;
            let out = config.out.clone().ok_or_else(|| ConfigError("no output directory given".into()))?;
            let dataset = ingest(&data_path, &config.schema(), config.response_kind()?)?;
            let result = fit(&config, &dataset, &out, false)?;
            log::info!(
                "{} draws written to {} in {:.1}s",
                result.manifest.n_draws,
                out.display(),
                result.manifest.wall_time_secs
            );
            Ok(())
        }
        Command::Predict(args) => {
            let predictions = predict_stored(&args.run, &args.data)?;
            if let Some(path) = &args.per_draw {
                with_output(Some(path), |w| predictions.write_draws_csv(w))?;
            }
            with_output(args.out.as_deref(), |w| predictions.write_summary_csv(w))
        }
        Command::Pd(args) => {
            let request = PdRequest {
                variable: args.var,
                output: args.output,
                grid: args.grid,
                points: args.points,
                options: PdOptions { subsample: args.subsample, center_at: args.center_at, seed: args.seed },
            };
            let report = pd_report(&args.run, &args.data, &request)?;
            write_json(&report, args.out.as_deref())
        }
        Command::Waic(args) => write_json(&waic_report(&args.run)?, None),
        Command::EssExperiment(mut args) => {
            let config = args.to_config()?;
            if args.workers == 0 {
                return Err(ConfigError("workers must be at least 1".into()).into());
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(args.workers)
                .build()
                .map_err(|e| CliError::Output(format!("cannot start worker pool: {e}")))?;
            let report = pool.install(|| ess_experiment(&config))?;
            write_json(&report, args.out.as_deref())
        }
        Command::Calibrate(args) => write_json(&calibrate_report(args.a0, args.m)?, None),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
