//! Candidate generation, the best-K population and run history.
//!
//! A [`Colony`] owns all mutable search state. It hands out candidates
//! (one swarm of agents each) and folds fitness reports back in, one at a
//! time, in whatever order they arrive. It never trains anything itself, so
//! a driver can keep any number of candidates in flight.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{create_path, AgentParam, AgentPath, CantAgent};
use crate::cluster::condense_paths;
use crate::genome::{build_genome, InitScheme, RnnGenome};
use crate::pheromone::{PheromoneConfig, PheromoneSpace, SpaceError};
use crate::rnn::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColonyConfig {
    /// Deepest recurrent lag; the space has `max_lag + 1` levels.
    pub max_lag: usize,
    pub num_ants: usize,
    pub sensing_radius: AgentParam,
    pub exploitation: AgentParam,
    pub dbscan_eps: f64,
    pub dbscan_min_pts: usize,
    pub pheromone_decay: f64,
    pub pheromone_update: f64,

    pub population_size: usize,
    pub epochs: usize,
    /// Forecast offset in steps; applied when the dataset is windowed.
    pub horizon: usize,
    pub seed: u64,
    pub workers: usize,
    /// Candidates to evaluate before a run stops.
    pub max_iterations: usize,
    pub learning_rate: f64,
    pub grad_clip: f64,
    pub init_scheme: InitScheme,
    pub pheromone_max: f64,
    pub initial_pheromone: f64,
    pub evict_threshold: f64,
}

impl Default for ColonyConfig {
    fn default() -> Self {
        ColonyConfig {
            max_lag: 5,
            num_ants: 30,
            sensing_radius: AgentParam::Random,
            exploitation: AgentParam::Random,
            dbscan_eps: 0.05,
            dbscan_min_pts: 2,
            pheromone_decay: 0.05,
            pheromone_update: 0.5,
            population_size: 20,
            epochs: 40,
            horizon: 1,
            seed: 0,
            workers: 1,
            max_iterations: 2000,
            learning_rate: 1e-3,
            grad_clip: 1.0,
            init_scheme: InitScheme::Uniform,
            pheromone_max: 10.0,
            initial_pheromone: 1.0,
            evict_threshold: 0.05,
        }
    }
}

impl ColonyConfig {
    pub fn levels(&self) -> usize {
        self.max_lag + 1
    }

    pub fn validate(&self) -> Result<(), ColonyError> {
        let bad = |field: &'static str, reason: &'static str| Err(ColonyError::Config { field, reason });
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if self.num_ants == 0 {
            return bad("num_ants", "must be at least 1");
        }
        if !matches!(self.sensing_radius, AgentParam::Random)
            && !matches!(self.sensing_radius, AgentParam::Fixed(r) if r > 0.0 && r < 1.0)
        {
            return bad("sensing_radius", "must be in (0, 1) or random");
        }
        if !self.exploitation.is_valid() {
            return bad("exploitation", "must be in [0, 1] or random");
        }
        if !positive(self.dbscan_eps) {
            return bad("dbscan_eps", "must be positive");
        }
        if self.dbscan_min_pts == 0 {
            return bad("dbscan_min_pts", "must be at least 1");
        }
        if !positive(self.pheromone_decay) {
            return bad("pheromone_decay", "must be positive");
        }
        if !positive(self.pheromone_update) {
            return bad("pheromone_update", "must be positive");
        }
        if self.population_size == 0 {
            return bad("population_size", "must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs", "must be at least 1");
        }
        if self.horizon == 0 {
            return bad("horizon", "must be at least 1");
        }
        if self.workers == 0 {
            return bad("workers", "must be at least 1");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations", "must be at least 1");
        }
        if !positive(self.learning_rate) {
            return bad("learning_rate", "must be positive");
        }
        if !positive(self.grad_clip) {
            return bad("grad_clip", "must be positive");
        }
        if !positive(self.pheromone_max) {
            return bad("pheromone_max", "must be positive");
        }
        if !(positive(self.initial_pheromone) && self.initial_pheromone <= self.pheromone_max) {
            return bad("initial_pheromone", "must be in (0, pheromone_max]");
        }
        if !(self.evict_threshold >= 0.0 && self.evict_threshold < self.initial_pheromone) {
            return bad("evict_threshold", "must be in [0, initial_pheromone)");
        }
        Ok(())
    }

    pub fn pheromone_config(&self) -> PheromoneConfig {
        PheromoneConfig {
            initial: self.initial_pheromone,
            max: self.pheromone_max,
            decay: self.pheromone_decay,
            reward: self.pheromone_update,
            evict_threshold: self.evict_threshold,
            grid_cell: self.sensing_radius.upper_bound(),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig { epochs: self.epochs, learning_rate: self.learning_rate, grad_clip: self.grad_clip }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ColonyError {
    #[error("invalid `{field}`: {reason}")]
    Config { field: &'static str, reason: &'static str },
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("all {ants} agents failed to reach an output")]
    AllPathsAborted { ants: usize },
    #[error("no candidate {0} is in flight")]
    UnknownCandidate(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub candidate: u64,
    pub fitness: f64,
    pub genome: RnnGenome,
}

/// The best `capacity` genomes seen so far, ascending by fitness.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    capacity: usize,
    members: Vec<Member>,
}

impl Population {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "population capacity must be at least 1");
        Population { capacity, members: Vec::with_capacity(capacity + 1) }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.members.len() >= self.capacity
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn best(&self) -> Option<&Member> {
        self.members.first()
    }

    pub fn worst(&self) -> Option<&Member> {
        self.members.last()
    }

    /// Admits a genome while there is room, afterwards only if it is strictly
    /// better than the worst member (which is then evicted). Non-finite
    /// fitness is never admitted. Equal fitness values keep arrival order.
    pub fn insert(&mut self, candidate: u64, genome: RnnGenome, fitness: f64) -> bool {
        if !fitness.is_finite() {
            return false;
        }
        if self.is_full() {
            match self.worst() {
                Some(w) if fitness < w.fitness => {
                    self.members.pop();
                }
                _ => return false,
            }
        }
        let at = self.members.partition_point(|m| m.fitness <= fitness);
        self.members.insert(at, Member { candidate, fitness, genome });
        true
    }
}

/// A generated genome waiting to be trained.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub id: u64,
    pub genome: RnnGenome,
    /// The raw agent paths, before condensation.
    pub paths: Vec<AgentPath>,
    /// Agents that gave up after every restart.
    pub aborted_paths: usize,
}

/// A trained candidate coming back from a worker.
#[derive(Debug, Clone, PartialEq)]
pub struct FitnessReport {
    pub candidate: u64,
    pub genome: RnnGenome,
    /// Validation MSE, or `f64::INFINITY` if training diverged.
    pub fitness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    /// Position in arrival order, from 0.
    pub iteration: usize,
    pub candidate: u64,
    pub fitness: f64,
    pub accepted: bool,
    /// Best and worst population fitness after this report (infinite while
    /// the population is empty).
    pub best: f64,
    pub worst: f64,
    pub hidden_nodes: usize,
    pub edges: usize,
    pub recurrent_edges: usize,
    /// Set when the worker failed and no fitness was produced.
    pub failed: bool,
}

#[derive(Debug, Clone, Copy)]
struct Shape {
    hidden_nodes: usize,
    edges: usize,
    recurrent_edges: usize,
}

impl Shape {
    fn of(g: &RnnGenome) -> Self {
        Shape { hidden_nodes: g.hidden_count(), edges: g.edge_count(), recurrent_edges: g.recurrent_count() }
    }
}

pub struct Colony {
    config: ColonyConfig,
    space: PheromoneSpace,
    population: Population,
    rng: ChaCha8Rng,
    next_id: u64,
    decay_passes: usize,
    in_flight: BTreeMap<u64, Shape>,
    history: Vec<HistoryRow>,
}

impl Colony {
    pub fn new(config: ColonyConfig, num_inputs: usize, num_outputs: usize) -> Result<Self, ColonyError> {
        config.validate()?;
        let space = PheromoneSpace::new(num_inputs, num_outputs, config.levels(), config.pheromone_config())?;
        Ok(Colony {
            population: Population::new(config.population_size),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            space,
            next_id: 0,
            decay_passes: 0,
            in_flight: BTreeMap::new(),
            history: Vec::new(),
        })
    }

    pub fn config(&self) -> &ColonyConfig {
        &self.config
    }

    pub fn space(&self) -> &PheromoneSpace {
        &self.space
    }

    pub fn population(&self) -> &Population {
        &self.population
    }

    pub fn history(&self) -> &[HistoryRow] {
        &self.history
    }

    pub fn generated(&self) -> u64 {
        self.next_id
    }

    pub fn decay_passes(&self) -> usize {
        self.decay_passes
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight.len()
    }

    /// Runs one swarm: every agent builds a path, the paths are condensed
    /// and turned into a genome, and the space decays once.
    pub fn generate_candidate(&mut self) -> Result<Candidate, ColonyError> {
        let cfg = self.config;
        let mut paths = Vec::with_capacity(cfg.num_ants);
        let mut aborted_paths = 0;
        for _ in 0..cfg.num_ants {
            let agent = CantAgent::spawn(cfg.sensing_radius, cfg.exploitation, &mut self.rng);
            match create_path(&agent, &mut self.space, &mut self.rng) {
                Ok((path, _)) => paths.push(path),
                Err(_) => aborted_paths += 1,
            }
        }
        if paths.is_empty() {
            return Err(ColonyError::AllPathsAborted { ants: cfg.num_ants });
        }
        let condensed = condense_paths(&paths, &mut self.space, cfg.dbscan_eps, cfg.dbscan_min_pts);
        let genome = build_genome(&condensed, &self.space, cfg.init_scheme, &mut self.rng);
        self.space.decay_all();
        self.decay_passes += 1;
        let id = self.next_id;
        self.next_id += 1;
        self.in_flight.insert(id, Shape::of(&genome));
        Ok(Candidate { id, genome, paths, aborted_paths })
    }

    /// Folds one trained candidate in. Accepted genomes reward the space,
    /// including their trained weights. Returns whether it was accepted.
    pub fn report_fitness(&mut self, report: FitnessReport) -> Result<bool, ColonyError> {
        self.in_flight.remove(&report.candidate).ok_or(ColonyError::UnknownCandidate(report.candidate))?;
        let shape = Shape::of(&report.genome);
        let mut genome = report.genome;
        genome.fitness = Some(report.fitness);
        let accepted = if self.population.insert(report.candidate, genome, report.fitness) {
            let g = &self.population.members().iter().find(|m| m.candidate == report.candidate).unwrap().genome;
            self.space.reward_genome(g);
            true
        } else {
            false
        };
        self.record(report.candidate, report.fitness, accepted, shape, false);
        Ok(accepted)
    }

    /// Records a candidate whose worker failed; it counts as rejected.
    pub fn report_failure(&mut self, candidate: u64) -> Result<(), ColonyError> {
        let shape = self.in_flight.remove(&candidate).ok_or(ColonyError::UnknownCandidate(candidate))?;
        self.record(candidate, f64::INFINITY, false, shape, true);
        Ok(())
    }

    fn record(&mut self, candidate: u64, fitness: f64, accepted: bool, shape: Shape, failed: bool) {
        let best = self.population.best().map_or(f64::INFINITY, |m| m.fitness);
        let worst = self.population.worst().map_or(f64::INFINITY, |m| m.fitness);
        self.history.push(HistoryRow {
            iteration: self.history.len(),
            candidate,
            fitness,
            accepted,
            best,
            worst,
            hidden_nodes: shape.hidden_nodes,
            edges: shape.edges,
            recurrent_edges: shape.recurrent_edges,
            failed,
        });
    }

    /// Short human-readable state line for logs.
    pub fn describe(&self) -> String {
        alloc::format!(
            "generated {} reported {} population {}/{} points {} best {:?}",
            self.next_id,
            self.history.len(),
            self.population.len(),
            self.population.capacity(),
            self.space.len(),
            self.population.best().map(|m| m.fitness)
        )
    }
}
