//! Time-series ingestion, min-max normalization, splitting and synthetic
//! series.

use std::f64::consts::PI;
use std::fmt;
use std::io::Read;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use cants_core::Sequence;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("line {line}, column `{column}`: cannot parse {value:?} as a number")]
    Parse { line: u64, column: String, value: String },
    #[error("line {line}: expected {expected} fields, found {found}")]
    RowLength { line: u64, expected: usize, found: usize },
    #[error("dataset has no usable rows")]
    NoRows,
    #[error("split fractions must be positive and sum to 1 (got {0:?})")]
    BadFractions([f64; 3]),
    #[error("{rows} rows are too few to give every split at least {needed} rows")]
    TooShort { rows: usize, needed: usize },
    #[error("dataset has not been split yet")]
    NotSplit,
    #[error("synthetic series need at least 200 steps (got {0})")]
    SynthTooShort(usize),
    #[error("unknown synthetic series `{0}` (expected noisy-sine, mackey-glass or linear-ar)")]
    UnknownSynth(String),
}

/// Contiguous row ranges of the three roles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Splits {
    pub train: Range<usize>,
    pub validation: Range<usize>,
    pub test: Range<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnStats {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub names: Vec<String>,
    /// Column indices fed to the network.
    pub inputs: Vec<usize>,
    /// Column indices the network predicts.
    pub outputs: Vec<usize>,
    /// `T x F`, file order.
    pub rows: Vec<Vec<f64>>,
    /// 1-based file line numbers of rows dropped for non-finite values.
    pub rejected_lines: Vec<u64>,
    pub splits: Option<Splits>,
    /// Present once normalized; `rows` then hold normalized values.
    pub stats: Option<Vec<ColumnStats>>,
}

impl Dataset {
    fn from_columns(names: Vec<String>, rows: Vec<Vec<f64>>, inputs: &[&str], outputs: &[&str]) -> Result<Self, DataError> {
        let find = |c: &str| names.iter().position(|n| n == c).ok_or_else(|| DataError::MissingColumn(c.to_string()));
        let outputs: Vec<usize> = outputs.iter().map(|c| find(c)).collect::<Result<_, _>>()?;
        let inputs: Vec<usize> = if inputs.is_empty() {
            (0..names.len()).collect()
        } else {
            inputs.iter().map(|c| find(c)).collect::<Result<_, _>>()?
        };
        Ok(Dataset { names, inputs, outputs, rows, rejected_lines: Vec::new(), splits: None, stats: None })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn width(&self) -> usize {
        self.names.len()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.names.iter().position(|n| n == name)?;
        Some(self.rows.iter().map(|r| r[c]).collect())
    }

    pub fn range(&self, split: Split) -> Result<Range<usize>, DataError> {
        let s = self.splits.as_ref().ok_or(DataError::NotSplit)?;
        Ok(match split {
            Split::Train => s.train.clone(),
            Split::Validation => s.validation.clone(),
            Split::Test => s.test.clone(),
        })
    }

    /// Network-ready pairs for one split: inputs at `t`, outputs at
    /// `t + horizon`, both inside the split.
    pub fn sequence(&self, split: Split, horizon: usize) -> Result<Sequence, DataError> {
        let r = self.range(split)?;
        let end = r.end.saturating_sub(horizon).max(r.start);
        let pick = |row: &Vec<f64>, cols: &[usize]| cols.iter().map(|&c| row[c]).collect::<Vec<f64>>();
        Ok(Sequence {
            inputs: (r.start..end).map(|t| pick(&self.rows[t], &self.inputs)).collect(),
            targets: (r.start..end).map(|t| pick(&self.rows[t + horizon], &self.outputs)).collect(),
        })
    }

    /// Maps a normalized value of `column` back to its original scale.
    pub fn denormalize(&self, column: usize, value: f64) -> f64 {
        match &self.stats {
            Some(stats) => value * (stats[column].max - stats[column].min) + stats[column].min,
            None => value,
        }
    }

    /// Splits rows into train/validation/test by `fractions` and min-max
    /// normalizes every column with statistics from the training rows only.
    /// Constant columns become 0.
    pub fn normalize_and_split(mut self, fractions: [f64; 3]) -> Result<Dataset, DataError> {
        let sum: f64 = fractions.iter().sum();
        if fractions.iter().any(|f| !f.is_finite() || *f <= 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(DataError::BadFractions(fractions));
        }
        let t = self.rows.len();
        let n_train = (t as f64 * fractions[0]).floor() as usize;
        let n_val = (t as f64 * fractions[1]).floor() as usize;
        if n_train < 2 || n_val < 2 || t - n_train - n_val < 2 {
            return Err(DataError::TooShort { rows: t, needed: 2 });
        }
        let splits = Splits { train: 0..n_train, validation: n_train..n_train + n_val, test: n_train + n_val..t };
        let stats: Vec<ColumnStats> = (0..self.width())
            .map(|c| {
                let (min, max) = self.rows[splits.train.clone()]
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r[c]), hi.max(r[c])));
                ColumnStats { min, max }
            })
            .collect();
        for (c, s) in stats.iter().enumerate() {
            if s.max == s.min {
                log::warn!("column `{}` is constant on the training split; it normalizes to 0", self.names[c]);
            }
        }
        for row in &mut self.rows {
            for (v, s) in row.iter_mut().zip(&stats) {
                *v = if s.max > s.min { (*v - s.min) / (s.max - s.min) } else { 0.0 };
            }
        }
        self.splits = Some(splits);
        self.stats = Some(stats);
        Ok(self)
    }
}

/// Reads a headered CSV. Rows holding a non-finite value are dropped and
/// their line numbers kept in [`Dataset::rejected_lines`]. An empty `inputs`
/// list means every column is an input.
pub fn read_csv<R: Read>(reader: R, inputs: &[&str], outputs: &[&str]) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(reader);
    let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    let mut rejected = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != names.len() {
            return Err(DataError::RowLength { line, expected: names.len(), found: record.len() });
        }
        let row = record
            .iter()
            .zip(&names)
            .map(|(cell, name)| {
                cell.parse::<f64>().map_err(|_| DataError::Parse {
                    line,
                    column: name.clone(),
                    value: cell.to_string(),
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if row.iter().all(|v| v.is_finite()) {
            rows.push(row);
        } else {
            log::warn!("line {line}: non-finite value, row rejected");
            rejected.push(line);
        }
    }
    let mut ds = Dataset::from_columns(names, rows, inputs, outputs)?;
    ds.rejected_lines = rejected;
    if ds.is_empty() {
        return Err(DataError::NoRows);
    }
    Ok(ds)
}

pub fn load_csv(path: &Path, inputs: &[&str], outputs: &[&str]) -> Result<Dataset, DataError> {
    let file = std::fs::File::open(path).map_err(|source| DataError::Io { path: path.display().to_string(), source })?;
    read_csv(std::io::BufReader::new(file), inputs, outputs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    /// `target = sin(2 pi t / 50) + noise`, with the matching cosine as a
    /// second input.
    NoisySine,
    /// Discretized Mackey-Glass delay equation (tau 17) plus noise, with a
    /// lag-6 copy as a second input.
    MackeyGlass,
    /// `y_t = 0.8 y_{t-1} + e_t`, `e_t ~ N(0, noise)`, with `y_{t-2}` as a
    /// second input.
    LinearAr,
}

impl FromStr for SynthKind {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "noisy-sine" => Ok(SynthKind::NoisySine),
            "mackey-glass" => Ok(SynthKind::MackeyGlass),
            "linear-ar" => Ok(SynthKind::LinearAr),
            other => Err(DataError::UnknownSynth(other.to_string())),
        }
    }
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynthKind::NoisySine => "noisy-sine",
            SynthKind::MackeyGlass => "mackey-glass",
            SynthKind::LinearAr => "linear-ar",
        })
    }
}

/// Deterministic synthetic series of `len` rows. Every column is an input;
/// the `target` column is also the output.
pub fn synth_generate(kind: SynthKind, len: usize, noise: f64, seed: u64) -> Result<Dataset, DataError> {
    if len < 200 {
        return Err(DataError::SynthTooShort(len));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise.max(0.0)).expect("finite standard deviation");
    let mut eps = move || if noise > 0.0 { normal.sample(&mut rng) } else { 0.0 };
    let (names, rows): (Vec<&str>, Vec<Vec<f64>>) = match kind {
        SynthKind::NoisySine => (
            vec!["cos", "target"],
            (0..len)
                .map(|t| {
                    let phase = 2.0 * PI * t as f64 / 50.0;
                    vec![phase.cos(), phase.sin() + eps()]
                })
                .collect(),
        ),
        SynthKind::MackeyGlass => {
            const TAU: usize = 17;
            const BURN_IN: usize = 500;
            let mut x: Vec<f64> = vec![1.2; TAU + 1];
            while x.len() < BURN_IN + len + TAU + 1 {
                let cur = x[x.len() - 1];
                let lagged = x[x.len() - 1 - TAU];
                x.push(cur + 0.2 * lagged / (1.0 + lagged.powi(10)) - 0.1 * cur);
            }
            let x = &x[x.len() - len..];
            (
                vec!["lag6", "target"],
                (0..len)
                    .map(|t| vec![if t >= 6 { x[t - 6] } else { x[0] }, x[t] + eps()])
                    .collect(),
            )
        }
        SynthKind::LinearAr => {
            let mut y = Vec::with_capacity(len);
            let mut prev = 0.0;
            for _ in 0..len {
                prev = 0.8 * prev + eps();
                y.push(prev);
            }
            (
                vec!["lag2", "target"],
                (0..len).map(|t| vec![if t >= 2 { y[t - 2] } else { 0.0 }, y[t]]).collect(),
            )
        }
    };
    Dataset::from_columns(names.into_iter().map(String::from).collect(), rows, &[], &["target"])
}
