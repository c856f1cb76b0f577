//! The `run` and `sweep` commands, independent of argument parsing.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use cants_core::rnn;
use cants_core::{ColonyConfig, Sequence};

use crate::config::{ConfigError, DataSource, Settings};
use crate::dataio::{self, DataError, Dataset, Split};
use crate::search::{self, RunOutcome, SearchError, SequenceTrainer};
use crate::sweep::{self, SweepParam, SweepRow, SweepValue};
use crate::trace;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("data: {0}")]
    Data(#[from] DataError),
    #[error("search: {0}")]
    Search(#[from] SearchError),
    #[error("{0}")]
    Io(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 1,
            AppError::Data(_) => 2,
            AppError::Search(_) | AppError::Io(_) => 3,
        }
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        AppError::Io(format!("{}: {e}", path.display()))
    }
}

/// A normalized, split dataset and its network-ready sequences.
pub struct Prepared {
    pub dataset: Dataset,
    pub train: Sequence,
    pub validation: Sequence,
    pub test: Sequence,
}

pub fn prepare(settings: &Settings) -> Result<Prepared, AppError> {
    let raw = match settings.data.as_ref().ok_or(ConfigError::NoData)? {
        DataSource::Csv { path, inputs, outputs } => {
            let inputs: Vec<&str> = inputs.iter().map(String::as_str).collect();
            let outputs: Vec<&str> = outputs.iter().map(String::as_str).collect();
            let ds = dataio::load_csv(path, &inputs, &outputs)?;
            if !ds.rejected_lines.is_empty() {
                log::warn!("rejected {} rows with non-finite values (lines {:?})", ds.rejected_lines.len(), ds.rejected_lines);
            }
            ds
        }
        DataSource::Synth { kind, length, noise, seed } => dataio::synth_generate(*kind, *length, *noise, *seed)?,
    };
    let dataset = raw.normalize_and_split(settings.fractions)?;
    let h = settings.colony.horizon;
    let prepared = Prepared {
        train: dataset.sequence(Split::Train, h)?,
        validation: dataset.sequence(Split::Validation, h)?,
        test: dataset.sequence(Split::Test, h)?,
        dataset,
    };
    if prepared.train.is_empty() || prepared.validation.is_empty() || prepared.test.is_empty() {
        return Err(DataError::TooShort { rows: prepared.dataset.len(), needed: h + 1 }.into());
    }
    Ok(prepared)
}

pub fn trainer(config: &ColonyConfig, data: &Prepared) -> SequenceTrainer {
    SequenceTrainer {
        train: data.train.clone(),
        validation: data.validation.clone(),
        test: data.test.clone(),
        config: config.train_config(),
    }
}

/// Runs one search on prepared data.
pub fn search(
    config: &ColonyConfig,
    data: &Prepared,
    on_frame: impl FnMut(&trace::ReplayFrame),
) -> Result<RunOutcome, AppError> {
    let t = trainer(config, data);
    Ok(search::run(config, data.dataset.inputs.len(), data.dataset.outputs.len(), &t, on_frame)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub candidates: usize,
    pub accepted: usize,
    pub best_fitness: f64,
    pub validation_mae: f64,
    pub test_mse: f64,
    pub test_mae: f64,
    /// Test MAE in the units of the output columns.
    pub test_mae_original: f64,
    pub hidden_nodes: usize,
    pub edges: usize,
    pub recurrent_edges: usize,
}

impl Summary {
    fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "candidates: {}", self.candidates)?;
        writeln!(w, "accepted: {}", self.accepted)?;
        writeln!(w, "best_validation_mse: {}", self.best_fitness)?;
        writeln!(w, "validation_mae: {}", self.validation_mae)?;
        writeln!(w, "test_mse: {}", self.test_mse)?;
        writeln!(w, "test_mae: {}", self.test_mae)?;
        writeln!(w, "test_mae_original_units: {}", self.test_mae_original)?;
        writeln!(w, "hidden_nodes: {}", self.hidden_nodes)?;
        writeln!(w, "edges: {}", self.edges)?;
        writeln!(w, "recurrent_edges: {}", self.recurrent_edges)
    }
}

fn denormalized_mae(data: &Prepared, genome: &cants_core::RnnGenome) -> f64 {
    let Ok(pred) = rnn::forward(genome, &data.test.inputs) else {
        return f64::NAN;
    };
    let ds = &data.dataset;
    let mut sum = 0.0;
    for (p, y) in pred.iter().zip(&data.test.targets) {
        for (j, &col) in ds.outputs.iter().enumerate() {
            sum += (ds.denormalize(col, p[j]) - ds.denormalize(col, y[j])).abs();
        }
    }
    sum / (pred.len() * ds.outputs.len()).max(1) as f64
}

/// Runs a search and writes `best_genome.json`, `history.csv`,
/// `trace.jsonl` and `summary.txt` into `out_dir`.
pub fn cmd_run(settings: &Settings, out_dir: &Path) -> Result<Summary, AppError> {
    let data = prepare(settings)?;
    fs::create_dir_all(out_dir).map_err(|e| AppError::io(out_dir, e))?;
    let path = |name: &str| -> PathBuf { out_dir.join(name) };
    let create = |p: &Path| File::create(p).map(BufWriter::new).map_err(|e| AppError::io(p, e));

    let trace_path = path("trace.jsonl");
    let mut trace_out = create(&trace_path)?;
    let mut trace_err = None;
    let outcome = search(&settings.colony, &data, |frame| {
        if trace_err.is_none() {
            trace_err = trace::write_frame(&mut trace_out, frame).err();
        }
    })?;
    if let Some(e) = trace_err {
        return Err(AppError::io(&trace_path, e));
    }
    trace_out.flush().map_err(|e| AppError::io(&trace_path, e))?;

    let history_path = path("history.csv");
    let mut w = csv::Writer::from_writer(create(&history_path)?);
    for row in outcome.colony.history() {
        w.serialize(row).map_err(|e| AppError::io(&history_path, e))?;
    }
    w.flush().map_err(|e| AppError::io(&history_path, e))?;

    let best = outcome.best.as_ref().ok_or(SearchError::NothingAccepted)?;
    let genome_path = path("best_genome.json");
    let mut g = create(&genome_path)?;
    serde_json::to_writer_pretty(&mut g, &best.genome).map_err(|e| AppError::io(&genome_path, e))?;
    g.write_all(b"\n").and_then(|_| g.flush()).map_err(|e| AppError::io(&genome_path, e))?;

    let history = outcome.colony.history();
    let summary = Summary {
        candidates: history.len(),
        accepted: history.iter().filter(|r| r.accepted).count(),
        best_fitness: best.report.fitness,
        validation_mae: best.report.validation_mae,
        test_mse: best.report.test_mse,
        test_mae: best.report.test_mae,
        test_mae_original: denormalized_mae(&data, &best.genome),
        hidden_nodes: best.genome.hidden_count(),
        edges: best.genome.edge_count(),
        recurrent_edges: best.genome.recurrent_count(),
    };
    let summary_path = path("summary.txt");
    summary
        .write(create(&summary_path)?)
        .map_err(|e| AppError::io(&summary_path, e))?;
    Ok(summary)
}

/// Runs `trials` searches per value and writes `sweep.csv` into `out_dir`.
pub fn cmd_sweep(
    settings: &Settings,
    param: SweepParam,
    values: &[SweepValue],
    trials: usize,
    out_dir: &Path,
) -> Result<Vec<SweepRow>, AppError> {
    let data = prepare(settings)?;
    let rows = sweep::sweep(&settings.colony, param, values, trials, |cfg| {
        cfg.validate().map_err(|e| match e {
            cants_core::ColonyError::Config { field, reason } => {
                AppError::Config(ConfigError::Invalid { field: field.into(), reason: reason.into() })
            }
            other => AppError::Search(other.into()),
        })?;
        let outcome = search(cfg, &data, |_| {})?;
        let best = outcome.best.map_or(f64::INFINITY, |b| b.report.fitness);
        log::info!("{param}: seed {} best {best}", cfg.seed);
        Ok::<f64, AppError>(best)
    })?;
    fs::create_dir_all(out_dir).map_err(|e| AppError::io(out_dir, e))?;
    let table = out_dir.join("sweep.csv");
    let file = File::create(&table).map_err(|e| AppError::io(&table, e))?;
    sweep::write_table(&rows, file).map_err(|e| AppError::io(&table, e))?;
    Ok(rows)
}
