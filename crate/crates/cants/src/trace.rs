//! Replay traces: one self-contained JSON line per accepted candidate.

use std::io::{BufRead, Write};

use cants_core::{AgentPath, PheromoneSpace, RnnGenome};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub level: usize,
    pub x: f64,
    pub y: f64,
    pub pheromone: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathStep {
    pub level: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenomeSummary {
    pub nodes: usize,
    pub edges: usize,
    pub recurrent_edges: usize,
    pub fitness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayFrame {
    /// Position of the report in arrival order.
    pub iteration: usize,
    pub candidate: u64,
    /// Every point in the space after the report was folded in.
    pub points: Vec<TracePoint>,
    /// The agents' waypoints, starting at their input.
    pub paths: Vec<Vec<PathStep>>,
    pub genome: GenomeSummary,
}

impl ReplayFrame {
    pub fn capture(iteration: usize, candidate: u64, space: &PheromoneSpace, paths: &[AgentPath], genome: &RnnGenome, fitness: f64) -> Self {
        let points = space
            .points()
            .map(|p| TracePoint { level: p.level, x: p.x, y: p.y, pheromone: p.pheromone })
            .collect();
        let paths = paths
            .iter()
            .map(|p| {
                let start = PathStep { level: p.input.level, x: space.input_x(p.input.index), y: 0.0 };
                std::iter::once(start)
                    .chain(p.waypoints.iter().map(|w| PathStep { level: w.level, x: w.x, y: w.y }))
                    .collect()
            })
            .collect();
        ReplayFrame {
            iteration,
            candidate,
            points,
            paths,
            genome: GenomeSummary {
                nodes: genome.nodes.len(),
                edges: genome.edge_count(),
                recurrent_edges: genome.recurrent_count(),
                fitness,
            },
        }
    }
}

pub fn write_frame<W: Write>(out: &mut W, frame: &ReplayFrame) -> std::io::Result<()> {
    serde_json::to_writer(&mut *out, frame)?;
    out.write_all(b"\n")
}

pub fn read_frames<R: BufRead>(input: R) -> Result<Vec<ReplayFrame>, serde_json::Error> {
    input
        .lines()
        .map(|l| l.map_err(serde_json::Error::io))
        .filter(|l| !matches!(l, Ok(s) if s.trim().is_empty()))
        .map(|l| serde_json::from_str(&l?))
        .collect()
}
