//! On-disk draw store: `draws.jsonl` with one record per kept draw and
//! `manifest.json` describing the run.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ResolvedPriors, RunConfig};
use super::dataset::Encoding;
use crate::models::{Draw, Family, Model, PredictionContext};
use crate::tree::{CutpointGrid, DecisionTree, NestedTree};

pub const DRAWS_FILE: &str = "draws.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrawRecord {
    pub draw: usize,
    pub iteration: usize,
    /// Trees of every function in model order.
    pub functions: Vec<Vec<NestedTree>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
    /// Zero-inflated models: 1 where the count component produced the row.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count_component: Option<Vec<u8>>,
    /// Summed leaf values of every function at the model rows.
    pub fitted: Vec<Vec<f64>>,
    /// Pointwise log likelihood at the model rows.
    pub log_lik: Vec<f64>,
}

impl DrawRecord {
    pub fn capture(draw_index: usize, iteration: usize, model: &dyn Model) -> Self {
        let d = model.draw();
        Self {
            draw: draw_index,
            iteration,
            functions: d.functions.iter().map(|ts| ts.iter().map(DecisionTree::to_nested).collect()).collect(),
            kappa: d.kappa,
            sigma2: d.sigma2,
            count_component: d.count_component.map(|z| z.into_iter().map(u8::from).collect()),
            fitted: model.log_fits().into_iter().map(<[f64]>::to_vec).collect(),
            log_lik: model.log_likelihood(),
        }
    }

    pub fn to_draw(&self) -> Draw {
        Draw {
            functions: self.functions.iter().map(|ts| ts.iter().map(DecisionTree::from_nested).collect()).collect(),
            kappa: self.kappa,
            sigma2: self.sigma2,
            count_component: self.count_component.as_ref().map(|z| z.iter().map(|&b| b == 1).collect()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub family: Family,
    pub config: RunConfig,
    pub priors: ResolvedPriors,
    pub seed: u64,
    pub workers: usize,
    pub n_rows: usize,
    pub n_draws: usize,
    pub wall_time_secs: f64,
    pub grid: CutpointGrid,
    pub encoding: Encoding,
    pub context: PredictionContext,
    /// Class names in model order for categorical responses.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub class_labels: Vec<String>,
    /// Categorical responses: model row of every input row, identical
    /// covariate rows being pooled into one.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub group_of: Vec<usize>,
    /// Accepted over proposed structural moves, per function.
    pub acceptance: Vec<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {source}")]
    Parse { path: PathBuf, line: usize, source: serde_json::Error },
}

type Result<T> = std::result::Result<T, StoreError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

/// Appends draw records to `draws.jsonl`.
pub struct DrawWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl DrawWriter {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let path = dir.join(DRAWS_FILE);
        let file = File::create(&path).map_err(io_err(&path))?;
        Ok(Self { out: BufWriter::new(file), path })
    }

    pub fn write(&mut self, record: &DrawRecord) -> Result<()> {
        let line = serde_json::to_string(record).expect("draw records serialize");
        writeln!(self.out, "{line}").map_err(io_err(&self.path))
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(io_err(&self.path))
    }
}

pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<()> {
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(io_err(&path))
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|source| StoreError::Parse { path, line: 0, source })
}

/// Stream records from `draws.jsonl` in order.
pub fn read_draws(dir: &Path) -> Result<Vec<DrawRecord>> {
    let path = dir.join(DRAWS_FILE);
    let file = File::open(&path).map_err(io_err(&path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(&path))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|source| StoreError::Parse { path: path.clone(), line: i + 1, source })?;
        out.push(rec);
    }
    Ok(out)
}
