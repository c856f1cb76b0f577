//! Cant agents and path construction.
//!
//! An agent starts at an input node on a level picked by level pheromone and
//! repeatedly (1) decides whether to climb toward level 1, then (2) either
//! exploits, moving to the pheromone centre of mass it senses, or explores,
//! stepping `ρ` in a random direction. It stops once it is on level 1 and
//! within `ρ` of an output, or once `y ≥ 0.99` (climbing straight to level 1
//! first if needed), and then picks an output node.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::math::{ceil, clamp01, cos, sin, sqrt};
use crate::pheromone::{CenterOfMass, PheromoneSpace, PointId, SenseMode};

/// `y` at which a path is considered to have reached the output edge.
pub const OUTPUT_EDGE: f64 = 0.99;

/// Restarts allowed before an agent gives up on a path.
pub const MAX_RESTARTS: usize = 32;

/// Bounds for randomly drawn agent parameters.
pub const RANDOM_PARAM_RANGE: (f64, f64) = (0.01, 0.98);

/// How an agent parameter is chosen when an agent is created.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AgentParam {
    Fixed(f64),
    /// Drawn per agent from `U(0.01, 0.98)`.
    Random,
}

impl AgentParam {
    pub fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            AgentParam::Fixed(v) => v,
            AgentParam::Random => rng.random_range(RANDOM_PARAM_RANGE.0..RANDOM_PARAM_RANGE.1),
        }
    }

    /// Largest value this parameter can take.
    pub fn upper_bound(self) -> f64 {
        match self {
            AgentParam::Fixed(v) => v,
            AgentParam::Random => RANDOM_PARAM_RANGE.1,
        }
    }

    pub fn is_valid(self) -> bool {
        match self {
            AgentParam::Fixed(v) => v > 0.0 && v < 1.0,
            AgentParam::Random => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CantAgent {
    /// `ρ`: sensing range and exploration step length.
    pub sensing_radius: f64,
    /// `ε`: probability of following pheromone instead of exploring.
    pub exploitation: f64,
}

impl CantAgent {
    pub fn new(sensing_radius: f64, exploitation: f64) -> CantAgent {
        assert!(sensing_radius > 0.0 && sensing_radius < 1.0, "ρ must lie in (0, 1)");
        assert!((0.0..=1.0).contains(&exploitation), "ε must lie in [0, 1]");
        CantAgent { sensing_radius, exploitation }
    }

    pub fn spawn<R: Rng + ?Sized>(radius: AgentParam, exploitation: AgentParam, rng: &mut R) -> Self {
        let r = radius.draw(rng);
        let e = exploitation.draw(rng);
        CantAgent::new(r, e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InputChoice {
    pub level: usize,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum WaypointKind {
    /// A new point this agent created (and inserted into the space).
    Explored(PointId),
    /// A centre of mass of existing points; not itself in the space.
    Followed(Vec<PointId>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub level: usize,
    pub x: f64,
    pub y: f64,
    pub kind: WaypointKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentPath {
    pub input: InputChoice,
    pub waypoints: Vec<Waypoint>,
    pub output: usize,
}

impl AgentPath {
    /// Checks the structural invariants: levels never move away from level 1,
    /// `y` strictly increases between consecutive same-level waypoints
    /// (starting from the input at `y = 0`), and every coordinate is in
    /// `[0, 1]`. The last waypoint sits on level 1.
    pub fn is_well_formed(&self) -> bool {
        let mut level = self.input.level;
        let mut y = 0.0;
        for w in &self.waypoints {
            if w.level > level || !(0.0..=1.0).contains(&w.x) || !(0.0..=1.0).contains(&w.y) {
                return false;
            }
            if w.level == level && w.y <= y {
                return false;
            }
            level = w.level;
            y = w.y;
        }
        matches!(self.waypoints.last(), Some(w) if w.level == 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PathError {
    #[error("path exceeded {max_steps} steps on every one of {attempts} attempts")]
    Aborted { max_steps: usize, attempts: usize },
}

/// Safety bound on the number of waypoints: `4·⌈1/ρ⌉ + 8·L`.
pub fn max_path_steps(sensing_radius: f64, levels: usize) -> usize {
    4 * ceil(1.0 / sensing_radius) as usize + 8 * levels
}

/// Chooses the next level among the current one and those closer to level 1,
/// proportionally to level pheromone.
pub fn decide_climb<R: Rng + ?Sized>(space: &PheromoneSpace, level: usize, rng: &mut R) -> usize {
    space.select_climb_level(level, rng)
}

/// Deterministic part of an exploration step: move `ρ` along
/// `θ = bisect·π`, clamped to the unit square.
pub fn explore_move(x: f64, y: f64, radius: f64, bisect: f64) -> (f64, f64) {
    let theta = bisect * PI;
    (clamp01(x + radius * cos(theta)), clamp01(y + radius * sin(theta)))
}

/// Random exploration step. The bisector is drawn from `[0, 1]` on the same
/// level (forward half-disc) and from `[-1, 1]` right after a climb.
pub fn step_explore<R: Rng + ?Sized>(
    x: f64,
    y: f64,
    radius: f64,
    level_changed: bool,
    rng: &mut R,
) -> (f64, f64) {
    let bisect = if level_changed {
        rng.random_range(-1.0..=1.0)
    } else {
        rng.random_range(0.0..=1.0)
    };
    explore_move(x, y, radius, bisect)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Explore(f64, f64),
    Exploit(CenterOfMass),
}

/// With probability `ε` the agent senses the pheromone centre of mass on
/// `level` and moves there; otherwise, or when nothing is sensed, it explores.
pub fn step_exploit<R: Rng + ?Sized>(
    agent: &CantAgent,
    space: &PheromoneSpace,
    level: usize,
    (x, y): (f64, f64),
    level_changed: bool,
    rng: &mut R,
) -> Step {
    let wants_exploit = rng.random::<f64>() < agent.exploitation;
    if wants_exploit {
        let mode = if level_changed { SenseMode::AfterClimb } else { SenseMode::SameLevel };
        if let Some(com) = space.sense_center_of_mass(level, x, y, agent.sensing_radius, mode) {
            // Rounding in the weighted mean must not stall forward progress.
            if level_changed || com.y > y {
                return Step::Exploit(com);
            }
        }
    }
    loop {
        let (nx, ny) = step_explore(x, y, agent.sensing_radius, level_changed, rng);
        if level_changed || ny > y {
            return Step::Explore(nx, ny);
        }
    }
}

fn output_in_range(space: &PheromoneSpace, x: f64, y: f64, radius: f64) -> bool {
    (0..space.num_outputs()).any(|j| {
        let dx = space.output_x(j) - x;
        let dy = 1.0 - y;
        sqrt(dx * dx + dy * dy) <= radius
    })
}

/// Builds one agent path, inserting every explored waypoint into the space.
///
/// Returns the path and the number of restarts it took. An attempt that
/// exceeds [`max_path_steps`] is rolled back (its inserted points removed)
/// and retried with fresh draws.
pub fn create_path<R: Rng + ?Sized>(
    agent: &CantAgent,
    space: &mut PheromoneSpace,
    rng: &mut R,
) -> Result<(AgentPath, usize), PathError> {
    let max_steps = max_path_steps(agent.sensing_radius, space.levels());
    for attempt in 0..=MAX_RESTARTS {
        if let Some(path) = try_path(agent, space, max_steps, rng) {
            return Ok((path, attempt));
        }
    }
    Err(PathError::Aborted { max_steps, attempts: MAX_RESTARTS + 1 })
}

fn try_path<R: Rng + ?Sized>(
    agent: &CantAgent,
    space: &mut PheromoneSpace,
    max_steps: usize,
    rng: &mut R,
) -> Option<AgentPath> {
    let level = space.select_start_level(rng);
    let index = space.select_input(level, rng);
    let input = InputChoice { level, index };

    let mut level = input.level;
    let mut pos = (space.input_x(index), 0.0);
    let mut waypoints: Vec<Waypoint> = Vec::new();

    let rollback = |space: &mut PheromoneSpace, waypoints: &[Waypoint]| {
        for w in waypoints {
            if let WaypointKind::Explored(id) = w.kind {
                space.remove_point(id);
            }
        }
    };

    loop {
        if waypoints.len() >= max_steps {
            rollback(space, &waypoints);
            return None;
        }
        let next = decide_climb(space, level, rng);
        let changed = next != level;
        let waypoint = match step_exploit(agent, space, next, pos, changed, rng) {
            Step::Exploit(com) => Waypoint {
                level: next,
                x: com.x,
                y: com.y,
                kind: WaypointKind::Followed(com.contributors),
            },
            Step::Explore(x, y) => {
                let id = space.insert_point(next, x, y);
                Waypoint { level: next, x, y, kind: WaypointKind::Explored(id) }
            }
        };
        pos = (waypoint.x, waypoint.y);
        level = next;
        waypoints.push(waypoint);

        if pos.1 >= OUTPUT_EDGE {
            if level != 1 {
                if waypoints.len() >= max_steps {
                    rollback(space, &waypoints);
                    return None;
                }
                let id = space.insert_point(1, pos.0, pos.1);
                waypoints.push(Waypoint { level: 1, x: pos.0, y: pos.1, kind: WaypointKind::Explored(id) });
            }
            break;
        }
        if level == 1 && output_in_range(space, pos.0, pos.1, agent.sensing_radius) {
            break;
        }
    }
    let output = space.select_output(rng);
    Some(AgentPath { input, waypoints, output })
}
