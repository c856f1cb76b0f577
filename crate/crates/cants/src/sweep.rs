//! Parameter sweeps over the ant count and the sensing radius.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use cants_core::{AgentParam, ColonyConfig};
use serde::Serialize;

/// Ant counts of the reference ablation.
pub const ANT_GRID: [usize; 6] = [10, 30, 60, 100, 150, 210];
/// Fixed sensing radii of the reference ablation; random mode is added on top.
pub const RADIUS_GRID: [f64; 6] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
pub const DEFAULT_TRIALS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    NumAnts,
    SensingRadius,
}

impl FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "num_ants" => Ok(SweepParam::NumAnts),
            "sensing_radius" => Ok(SweepParam::SensingRadius),
            other => Err(format!("cannot sweep `{other}` (expected num_ants or sensing_radius)")),
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::NumAnts => "num_ants",
            SweepParam::SensingRadius => "sensing_radius",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepValue {
    Ants(usize),
    Radius(AgentParam),
}

impl SweepValue {
    pub fn apply(self, cfg: &mut ColonyConfig) {
        match self {
            SweepValue::Ants(n) => cfg.num_ants = n,
            SweepValue::Radius(r) => cfg.sensing_radius = r,
        }
    }
}

impl fmt::Display for SweepValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepValue::Ants(n) => write!(f, "{n}"),
            SweepValue::Radius(AgentParam::Fixed(r)) => write!(f, "{r}"),
            SweepValue::Radius(AgentParam::Random) => f.write_str("random"),
        }
    }
}

/// The reference grid for a parameter.
pub fn default_grid(param: SweepParam) -> Vec<SweepValue> {
    match param {
        SweepParam::NumAnts => ANT_GRID.iter().map(|&n| SweepValue::Ants(n)).collect(),
        SweepParam::SensingRadius => RADIUS_GRID
            .iter()
            .map(|&r| SweepValue::Radius(AgentParam::Fixed(r)))
            .chain([SweepValue::Radius(AgentParam::Random)])
            .collect(),
    }
}

/// Parses a comma-separated value list such as `10,30` or `0.2,random`.
pub fn parse_values(param: SweepParam, text: &str) -> Result<Vec<SweepValue>, String> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| match param {
            SweepParam::NumAnts => match s.parse::<usize>() {
                Ok(n) if n >= 1 => Ok(SweepValue::Ants(n)),
                _ => Err(format!("bad ant count {s:?}")),
            },
            SweepParam::SensingRadius if s == "random" => Ok(SweepValue::Radius(AgentParam::Random)),
            SweepParam::SensingRadius => match s.parse::<f64>() {
                Ok(r) if r > 0.0 && r < 1.0 => Ok(SweepValue::Radius(AgentParam::Fixed(r))),
                _ => Err(format!("bad sensing radius {s:?}")),
            },
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: String,
    pub value: String,
    pub trials: usize,
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Runs `trials` searches per value; trial `i` uses seed `base.seed + i`
/// so every value sees the same seeds. `trial` returns the best fitness.
pub fn sweep<E>(
    base: &ColonyConfig,
    param: SweepParam,
    values: &[SweepValue],
    trials: usize,
    mut trial: impl FnMut(&ColonyConfig) -> Result<f64, E>,
) -> Result<Vec<SweepRow>, E> {
    values
        .iter()
        .map(|&value| {
            let mut best: Vec<f64> = (0..trials)
                .map(|i| {
                    let mut cfg = *base;
                    value.apply(&mut cfg);
                    cfg.seed = base.seed.wrapping_add(i as u64);
                    trial(&cfg)
                })
                .collect::<Result<_, E>>()?;
            best.sort_by(f64::total_cmp);
            Ok(SweepRow {
                param: param.to_string(),
                value: value.to_string(),
                trials,
                min: best.first().copied().unwrap_or(f64::NAN),
                median: if best.is_empty() { f64::NAN } else { median(&best) },
                max: best.last().copied().unwrap_or(f64::NAN),
            })
        })
        .collect()
}

pub fn write_table<W: Write>(rows: &[SweepRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
