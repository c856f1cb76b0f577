//! The stacked continuous search space and all pheromone state.
//!
//! Levels are numbered from 1. Level 1 is the current time step and level `l`
//! holds lag `l - 1`. Every level is the unit square: input nodes sit on the
//! `y = 0` edge, uniformly spaced in `x`, and output nodes sit on the `y = 1`
//! edge of level 1.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cell::CellType;
use crate::genome::RnnGenome;
use crate::math::{ceil, floor, sqrt};
use crate::roulette;

pub type PointId = u64;

/// Destination key of a remembered outgoing-edge weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EdgeTarget {
    Node(PointId),
    Output(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PheromoneConfig {
    /// Pheromone of new points and of every discrete selector at start.
    pub initial: f64,
    pub max: f64,
    /// Subtracted from every point on each decay pass.
    pub decay: f64,
    /// Added to every point, level, input, output and node type a successful
    /// genome used.
    pub reward: f64,
    /// Points at or below this after a decay pass are removed.
    pub evict_threshold: f64,
    /// Side length of the spatial hash cells; the largest sensing radius in use.
    pub grid_cell: f64,
}

impl Default for PheromoneConfig {
    fn default() -> Self {
        PheromoneConfig {
            initial: 1.0,
            max: 10.0,
            decay: 0.05,
            reward: 0.5,
            evict_threshold: 0.05,
            grid_cell: 0.98,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpaceError {
    #[error("{0} must be at least 1")]
    ZeroCount(&'static str),
    #[error("pheromone setting `{0}` is out of range")]
    BadConstant(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PheromonePoint {
    pub id: PointId,
    pub level: usize,
    pub x: f64,
    pub y: f64,
    pub pheromone: f64,
    pub type_pheromones: [f64; CellType::COUNT],
    pub weight_memory: BTreeMap<EdgeTarget, f64>,
}

/// Whether a sensing agent stayed on its level (forward-only view) or just
/// climbed onto it (all directions).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SenseMode {
    SameLevel,
    AfterClimb,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CenterOfMass {
    pub x: f64,
    pub y: f64,
    /// Points that fell inside the sensing disc, ascending by id.
    pub contributors: Vec<PointId>,
}

/// Uniform bucket grid over the unit square.
#[derive(Debug, Clone)]
struct Grid {
    cell: f64,
    n: usize,
    buckets: Vec<Vec<PointId>>,
}

impl Grid {
    fn new(cell: f64) -> Grid {
        let n = (ceil(1.0 / cell) as usize).clamp(1, 512);
        Grid { cell: 1.0 / n as f64, n, buckets: vec![Vec::new(); n * n] }
    }

    fn coord(&self, v: f64) -> usize {
        let c = floor(v / self.cell);
        if c <= 0.0 {
            0
        } else {
            (c as usize).min(self.n - 1)
        }
    }

    fn bucket(&self, x: f64, y: f64) -> usize {
        self.coord(y) * self.n + self.coord(x)
    }

    fn insert(&mut self, id: PointId, x: f64, y: f64) {
        let b = self.bucket(x, y);
        self.buckets[b].push(id);
    }

    fn remove(&mut self, id: PointId, x: f64, y: f64) {
        let b = self.bucket(x, y);
        self.buckets[b].retain(|&p| p != id);
    }

    fn query(&self, x: f64, y: f64, r: f64, out: &mut Vec<PointId>) {
        let (x0, x1) = (self.coord(x - r), self.coord(x + r));
        let (y0, y1) = (self.coord(y - r), self.coord(y + r));
        for cy in y0..=y1 {
            for cx in x0..=x1 {
                out.extend_from_slice(&self.buckets[cy * self.n + cx]);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct PheromoneSpace {
    levels: usize,
    num_inputs: usize,
    num_outputs: usize,
    cfg: PheromoneConfig,
    points: BTreeMap<PointId, PheromonePoint>,
    grids: Vec<Grid>,
    level_pheromones: Vec<f64>,
    input_pheromones: Vec<Vec<f64>>,
    output_pheromones: Vec<f64>,
    next_id: PointId,
}

impl PheromoneSpace {
    pub fn new(
        num_inputs: usize,
        num_outputs: usize,
        levels: usize,
        cfg: PheromoneConfig,
    ) -> Result<PheromoneSpace, SpaceError> {
        if num_inputs == 0 {
            return Err(SpaceError::ZeroCount("num_inputs"));
        }
        if num_outputs == 0 {
            return Err(SpaceError::ZeroCount("num_outputs"));
        }
        if levels == 0 {
            return Err(SpaceError::ZeroCount("levels"));
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(cfg.max) {
            return Err(SpaceError::BadConstant("max"));
        }
        if !positive(cfg.initial) || cfg.initial > cfg.max {
            return Err(SpaceError::BadConstant("initial"));
        }
        if !positive(cfg.decay) {
            return Err(SpaceError::BadConstant("decay"));
        }
        if !positive(cfg.reward) {
            return Err(SpaceError::BadConstant("reward"));
        }
        if !(cfg.evict_threshold.is_finite() && cfg.evict_threshold >= 0.0)
            || cfg.evict_threshold >= cfg.initial
        {
            return Err(SpaceError::BadConstant("evict_threshold"));
        }
        if !positive(cfg.grid_cell) {
            return Err(SpaceError::BadConstant("grid_cell"));
        }
        Ok(PheromoneSpace {
            levels,
            num_inputs,
            num_outputs,
            cfg,
            points: BTreeMap::new(),
            grids: (0..levels).map(|_| Grid::new(cfg.grid_cell)).collect(),
            level_pheromones: (1..=levels).map(|l| 2.0 * l as f64).collect(),
            input_pheromones: vec![vec![cfg.initial; num_inputs]; levels],
            output_pheromones: vec![cfg.initial; num_outputs],
            next_id: 0,
        })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    pub fn num_outputs(&self) -> usize {
        self.num_outputs
    }

    pub fn config(&self) -> &PheromoneConfig {
        &self.cfg
    }

    /// `x` of input `i`; inputs sit at `y = 0` on every level.
    pub fn input_x(&self, i: usize) -> f64 {
        (i as f64 + 0.5) / self.num_inputs as f64
    }

    /// `x` of output `j`; outputs sit at `y = 1` on level 1.
    pub fn output_x(&self, j: usize) -> f64 {
        (j as f64 + 0.5) / self.num_outputs as f64
    }

    pub fn level_pheromones(&self) -> &[f64] {
        &self.level_pheromones
    }

    pub fn input_pheromones(&self, level: usize) -> &[f64] {
        &self.input_pheromones[level - 1]
    }

    pub fn output_pheromones(&self) -> &[f64] {
        &self.output_pheromones
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, id: PointId) -> Option<&PheromonePoint> {
        self.points.get(&id)
    }

    /// All points, ascending by id.
    pub fn points(&self) -> impl Iterator<Item = &PheromonePoint> {
        self.points.values()
    }

    pub fn points_on_level(&self, level: usize) -> impl Iterator<Item = &PheromonePoint> {
        self.points.values().filter(move |p| p.level == level)
    }

    pub fn level_is_empty(&self, level: usize) -> bool {
        self.grids[level - 1].buckets.iter().all(Vec::is_empty)
    }

    /// Picks a starting level with probability `p_l / Σ p_k`.
    pub fn select_start_level<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        roulette::select(&self.level_pheromones, rng).expect("level pheromones stay positive") + 1
    }

    /// Picks a level among `1..=current` proportionally to level pheromone.
    pub fn select_climb_level<R: Rng + ?Sized>(&self, current: usize, rng: &mut R) -> usize {
        assert!((1..=self.levels).contains(&current), "level {current} out of range");
        roulette::select(&self.level_pheromones[..current], rng).expect("positive") + 1
    }

    pub fn select_input<R: Rng + ?Sized>(&self, level: usize, rng: &mut R) -> usize {
        roulette::select(&self.input_pheromones[level - 1], rng).expect("positive")
    }

    pub fn select_output<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        roulette::select(&self.output_pheromones, rng).expect("positive")
    }

    /// Adds a fresh point carrying the initial pheromone and a uniform
    /// node-type prior.
    pub fn insert_point(&mut self, level: usize, x: f64, y: f64) -> PointId {
        assert!((1..=self.levels).contains(&level), "level {level} out of range");
        debug_assert!((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y));
        let id = self.next_id;
        self.next_id += 1;
        self.grids[level - 1].insert(id, x, y);
        self.points.insert(
            id,
            PheromonePoint {
                id,
                level,
                x,
                y,
                pheromone: self.cfg.initial,
                type_pheromones: [self.cfg.initial; CellType::COUNT],
                weight_memory: BTreeMap::new(),
            },
        );
        id
    }

    pub fn remove_point(&mut self, id: PointId) -> Option<PheromonePoint> {
        let p = self.points.remove(&id)?;
        self.grids[p.level - 1].remove(id, p.x, p.y);
        Some(p)
    }

    /// Ids of the points on `level` within distance `radius` of `(x, y)`,
    /// ascending.
    pub fn points_within(&self, level: usize, x: f64, y: f64, radius: f64) -> Vec<PointId> {
        let mut ids = Vec::new();
        self.grids[level - 1].query(x, y, radius, &mut ids);
        ids.retain(|id| {
            let p = &self.points[id];
            let (dx, dy) = (p.x - x, p.y - y);
            sqrt(dx * dx + dy * dy) <= radius
        });
        ids.sort_unstable();
        ids
    }

    /// Pheromone-weighted mean position of the points an agent at
    /// `(level, x, y)` senses within `radius`. In [`SenseMode::SameLevel`]
    /// only points strictly ahead (`y' > y`) count.
    pub fn sense_center_of_mass(
        &self,
        level: usize,
        x: f64,
        y: f64,
        radius: f64,
        mode: SenseMode,
    ) -> Option<CenterOfMass> {
        let mut ids = self.points_within(level, x, y, radius);
        if mode == SenseMode::SameLevel {
            ids.retain(|id| self.points[id].y > y);
        }
        if ids.is_empty() {
            return None;
        }
        let (mut mass, mut mx, mut my) = (0.0, 0.0, 0.0);
        for id in &ids {
            let p = &self.points[id];
            mass += p.pheromone;
            mx += p.pheromone * p.x;
            my += p.pheromone * p.y;
        }
        Some(CenterOfMass { x: mx / mass, y: my / mass, contributors: ids })
    }

    /// Mean of the weight memories of `ids`, entry by entry.
    pub fn merged_weight_memory(&self, ids: &[PointId]) -> BTreeMap<EdgeTarget, f64> {
        let mut acc: BTreeMap<EdgeTarget, (f64, usize)> = BTreeMap::new();
        for p in ids.iter().filter_map(|id| self.points.get(id)) {
            for (&k, &w) in &p.weight_memory {
                let e = acc.entry(k).or_insert((0.0, 0));
                e.0 += w;
                e.1 += 1;
            }
        }
        acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
    }

    /// One volatility pass: every point loses `decay`, and points left at or
    /// below the eviction threshold are removed. Discrete selectors (level,
    /// input, output and node-type pheromones) do not decay.
    pub fn decay_all(&mut self) -> usize {
        let mut evicted = Vec::new();
        for p in self.points.values_mut() {
            p.pheromone -= self.cfg.decay;
            if p.pheromone <= self.cfg.evict_threshold {
                evicted.push(p.id);
            }
        }
        for &id in &evicted {
            self.remove_point(id);
        }
        if !evicted.is_empty() {
            // `evicted` is ascending because the map iterates by id.
            for p in self.points.values_mut() {
                p.weight_memory.retain(|k, _| match k {
                    EdgeTarget::Node(id) => evicted.binary_search(id).is_err(),
                    EdgeTarget::Output(_) => true,
                });
            }
        }
        evicted.len()
    }

    /// Adds `reward` to a point's pheromone, clamped at the maximum. Missing
    /// (evicted or absorbed) points are skipped.
    pub fn reward_point(&mut self, id: PointId) -> bool {
        let (reward, max) = (self.cfg.reward, self.cfg.max);
        match self.points.get_mut(&id) {
            Some(p) => {
                p.pheromone = (p.pheromone + reward).min(max);
                true
            }
            None => false,
        }
    }

    pub fn reward_level(&mut self, level: usize) {
        self.level_pheromones[level - 1] += self.cfg.reward;
    }

    pub fn reward_input(&mut self, level: usize, input: usize) {
        self.input_pheromones[level - 1][input] += self.cfg.reward;
    }

    pub fn reward_output(&mut self, output: usize) {
        self.output_pheromones[output] += self.cfg.reward;
    }

    pub fn reward_node_type(&mut self, id: PointId, cell: CellType) -> bool {
        let (reward, max) = (self.cfg.reward, self.cfg.max);
        match self.points.get_mut(&id) {
            Some(p) => {
                let t = &mut p.type_pheromones[cell.index()];
                *t = (*t + reward).min(max);
                true
            }
            None => false,
        }
    }

    /// Folds trained outgoing weights into a point's memory: known
    /// destinations move to the mean of stored and trained values, new ones
    /// are inserted as trained.
    pub fn update_weight_memory(&mut self, id: PointId, trained: &[(EdgeTarget, f64)]) -> bool {
        let Some(p) = self.points.get_mut(&id) else {
            return false;
        };
        for &(target, w) in trained {
            p.weight_memory
                .entry(target)
                .and_modify(|stored| *stored = 0.5 * (*stored + w))
                .or_insert(w);
        }
        true
    }

    /// Rewards everything a successful genome was built from: its centroid
    /// and followed points, their selected node types, the levels, inputs and
    /// outputs it used. The genome's current (trained) outgoing weights are
    /// folded into each surviving centroid's memory. Points that disappeared
    /// since the genome was built are skipped.
    pub fn reward_genome(&mut self, genome: &RnnGenome) {
        let prov = &genome.provenance;
        let mut rewarded: Vec<PointId> = Vec::new();
        for &(id, cell) in &prov.nodes {
            if self.reward_point(id) {
                self.reward_node_type(id, cell);
            }
            rewarded.push(id);
        }
        rewarded.sort_unstable();
        for id in &prov.followed {
            if rewarded.binary_search(id).is_err() {
                self.reward_point(*id);
            }
        }
        for &level in &prov.levels {
            self.reward_level(level);
        }
        for &(level, input) in &prov.inputs {
            self.reward_input(level, input);
        }
        for &output in &prov.outputs {
            self.reward_output(output);
        }
        for (point, weights) in genome.outgoing_weights() {
            self.update_weight_memory(point, &weights);
        }
    }

    /// Collapses `members` (all on `level`) into one point at `(x, y)`.
    ///
    /// The smallest member id survives. It takes the largest member
    /// pheromone, the per-type sum of node-type pheromones (clamped at the
    /// maximum) and the entry-wise mean of the members' weight memories. The
    /// other members are removed; the returned map sends each absorbed id to
    /// the survivor so callers can rewrite references.
    pub fn merge_points(
        &mut self,
        members: &[PointId],
        x: f64,
        y: f64,
    ) -> (PointId, BTreeMap<PointId, PointId>) {
        let survivor = *members.iter().min().expect("at least one member");
        let memory = self.merged_weight_memory(members);
        let max = self.cfg.max;
        let mut pheromone: f64 = 0.0;
        let mut types = [0.0; CellType::COUNT];
        let mut absorbed = BTreeMap::new();
        for &id in members {
            let p = if id == survivor {
                self.points[&id].clone()
            } else {
                absorbed.insert(id, survivor);
                self.remove_point(id).expect("member exists")
            };
            pheromone = pheromone.max(p.pheromone);
            for (t, v) in types.iter_mut().zip(p.type_pheromones) {
                *t += v;
            }
        }
        let p = self.points.get_mut(&survivor).expect("survivor exists");
        let (ox, oy, level) = (p.x, p.y, p.level);
        p.x = x;
        p.y = y;
        p.pheromone = pheromone.min(max);
        p.type_pheromones = types.map(|t| t.min(max));
        p.weight_memory = memory;
        let grid = &mut self.grids[level - 1];
        grid.remove(survivor, ox, oy);
        grid.insert(survivor, x, y);
        (survivor, absorbed)
    }

    /// Rewrites weight-memory keys of absorbed points to their survivors;
    /// colliding entries are averaged.
    pub fn remap_memory_targets(&mut self, map: &BTreeMap<PointId, PointId>) {
        if map.is_empty() {
            return;
        }
        for p in self.points.values_mut() {
            if !p
                .weight_memory
                .keys()
                .any(|k| matches!(k, EdgeTarget::Node(id) if map.contains_key(id)))
            {
                continue;
            }
            let mut acc: BTreeMap<EdgeTarget, (f64, usize)> = BTreeMap::new();
            for (&k, &w) in &p.weight_memory {
                let k = match k {
                    EdgeTarget::Node(id) => EdgeTarget::Node(*map.get(&id).unwrap_or(&id)),
                    other => other,
                };
                let e = acc.entry(k).or_insert((0.0, 0));
                e.0 += w;
                e.1 += 1;
            }
            p.weight_memory = acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect();
        }
    }

    #[cfg(test)]
    pub(crate) fn set_pheromone(&mut self, id: PointId, value: f64) {
        self.points.get_mut(&id).unwrap().pheromone = value;
    }

    #[cfg(test)]
    pub(crate) fn set_type_pheromones(&mut self, id: PointId, values: [f64; CellType::COUNT]) {
        self.points.get_mut(&id).unwrap().type_pheromones = values;
    }

    #[cfg(test)]
    pub(crate) fn set_weight_memory(&mut self, id: PointId, mem: &[(EdgeTarget, f64)]) {
        self.points.get_mut(&id).unwrap().weight_memory = mem.iter().copied().collect();
    }
}
