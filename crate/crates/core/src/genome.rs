//! Recurrent network genomes and their construction from condensed paths.
//!
//! Nodes are scalar cells. Feedforward edges connect nodes within one time
//! step; recurrent edges read the source's output `skip` steps earlier.
//! Along a path, a move from level `la` to level `lb` becomes an edge with
//! skip `la - lb`: information flows from the larger lag to the smaller one.
//! Within a level, hidden-to-hidden edges are feedforward only when they
//! advance in `(y, point id)` order; the reverse direction is a recurrent
//! edge with skip 1. That keeps the feedforward subgraph acyclic.

use alloc::collections::{BTreeMap, BTreeSet, BinaryHeap};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;
use core::fmt;
use core::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cell::CellType;
use crate::cluster::Condensed;
use crate::math::sqrt;
use crate::pheromone::{EdgeTarget, PheromonePoint, PheromoneSpace, PointId};
use crate::roulette;

/// Distribution for weights without a remembered value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitScheme {
    /// `U[-0.5, 0.5]`.
    #[default]
    Uniform,
    /// `U[-b, b]` with `b = sqrt(6 / fan_in)`.
    Kaiming,
    /// `U[-b, b]` with `b = sqrt(6 / (fan_in + fan_out))`.
    Xavier,
}

impl InitScheme {
    pub fn bound(self, fan_in: usize, fan_out: usize) -> f64 {
        match self {
            InitScheme::Uniform => 0.5,
            InitScheme::Kaiming => sqrt(6.0 / fan_in.max(1) as f64),
            InitScheme::Xavier => sqrt(6.0 / (fan_in + fan_out).max(1) as f64),
        }
    }

    pub fn sample<R: Rng + ?Sized>(self, fan_in: usize, fan_out: usize, rng: &mut R) -> f64 {
        let b = self.bound(fan_in, fan_out);
        rng.random_range(-b..=b)
    }
}

impl FromStr for InitScheme {
    type Err = UnknownScheme;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(InitScheme::Uniform),
            "kaiming" => Ok(InitScheme::Kaiming),
            "xavier" => Ok(InitScheme::Xavier),
            _ => Err(UnknownScheme),
        }
    }
}

impl fmt::Display for InitScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitScheme::Uniform => "uniform",
            InitScheme::Kaiming => "kaiming",
            InitScheme::Xavier => "xavier",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("init scheme must be one of uniform, kaiming, xavier")]
pub struct UnknownScheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    /// Emits input column `index`; sits on `level` at `y = 0`.
    Input { level: usize, index: usize },
    Hidden { point: PointId },
    Output { index: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub kind: NodeKind,
    pub level: usize,
    pub x: f64,
    pub y: f64,
    /// Ignored for input nodes. Output nodes are `Simple`.
    pub cell: CellType,
    /// Cell parameters, `cell.param_count()` long; empty for inputs.
    pub params: Vec<f64>,
}

impl Node {
    pub fn is_input(&self) -> bool {
        matches!(self.kind, NodeKind::Input { .. })
    }

    pub fn is_output(&self) -> bool {
        matches!(self.kind, NodeKind::Output { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub source: usize,
    pub dest: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecurrentEdge {
    pub source: usize,
    pub dest: usize,
    pub weight: f64,
    pub skip: usize,
    pub orientation: Orientation,
}

/// What a genome was built from, so a successful genome can reward it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Centroid of every hidden node and the cell type picked for it.
    pub nodes: Vec<(PointId, CellType)>,
    /// Points sensed while exploiting, ascending.
    pub followed: Vec<PointId>,
    pub levels: Vec<usize>,
    /// `(level, index)` of every input used.
    pub inputs: Vec<(usize, usize)>,
    pub outputs: Vec<usize>,
    /// Paths dropped because condensation left them empty.
    pub skipped_paths: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenomeError {
    #[error("edge {0} has an endpoint out of range or points into an input / out of an output")]
    BadEndpoint(usize),
    #[error("duplicate edge {source_node} -> {dest} with skip {skip}")]
    Duplicate { source_node: usize, dest: usize, skip: usize },
    #[error("recurrent edge {0} has skip 0")]
    ZeroSkip(usize),
    #[error("feedforward edges contain a cycle")]
    Cycle,
    #[error("node {0} has the wrong number of parameters")]
    ParamCount(usize),
    #[error("node {0} is not on any input-to-output path")]
    Disconnected(usize),
    #[error("output node {0} is missing")]
    MissingOutput(usize),
    #[error("expected {expected} parameters, got {got}")]
    ParamLength { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnnGenome {
    pub num_inputs: usize,
    pub num_outputs: usize,
    /// Inputs, then hidden nodes ascending by `(level, point)`, then outputs
    /// ascending by index.
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub recurrent_edges: Vec<RecurrentEdge>,
    /// Validation MSE once trained.
    pub fitness: Option<f64>,
    pub provenance: Provenance,
}

impl RnnGenome {
    /// A genome with output nodes only (each a zero-bias `Simple` cell).
    pub fn empty(num_inputs: usize, num_outputs: usize) -> Self {
        let nodes = (0..num_outputs)
            .map(|index| Node {
                kind: NodeKind::Output { index },
                level: 1,
                x: (index as f64 + 0.5) / num_outputs as f64,
                y: 1.0,
                cell: CellType::Simple,
                params: vec![0.0],
            })
            .collect();
        RnnGenome {
            num_inputs,
            num_outputs,
            nodes,
            edges: Vec::new(),
            recurrent_edges: Vec::new(),
            fitness: None,
            provenance: Provenance::default(),
        }
    }

    pub fn hidden_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n.kind, NodeKind::Hidden { .. })).count()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn recurrent_count(&self) -> usize {
        self.recurrent_edges.len()
    }

    pub fn output_node(&self, index: usize) -> Option<usize> {
        self.nodes.iter().position(|n| n.kind == NodeKind::Output { index })
    }

    /// Number of trainable values: edge weights, recurrent weights and cell
    /// parameters, in that order.
    pub fn param_count(&self) -> usize {
        self.edges.len() + self.recurrent_edges.len() + self.nodes.iter().map(|n| n.params.len()).sum::<usize>()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        p.extend(self.edges.iter().map(|e| e.weight));
        p.extend(self.recurrent_edges.iter().map(|e| e.weight));
        for n in &self.nodes {
            p.extend_from_slice(&n.params);
        }
        p
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<(), GenomeError> {
        let expected = self.param_count();
        if p.len() != expected {
            return Err(GenomeError::ParamLength { expected, got: p.len() });
        }
        let mut it = p.iter().copied();
        for e in &mut self.edges {
            e.weight = it.next().unwrap();
        }
        for e in &mut self.recurrent_edges {
            e.weight = it.next().unwrap();
        }
        for n in &mut self.nodes {
            for v in &mut n.params {
                *v = it.next().unwrap();
            }
        }
        Ok(())
    }

    /// Current outgoing weights of every hidden node, keyed by destination.
    pub fn outgoing_weights(&self) -> Vec<(PointId, Vec<(EdgeTarget, f64)>)> {
        let mut out: BTreeMap<PointId, Vec<(EdgeTarget, f64)>> = BTreeMap::new();
        let all = self
            .edges
            .iter()
            .map(|e| (e.source, e.dest, e.weight))
            .chain(self.recurrent_edges.iter().map(|e| (e.source, e.dest, e.weight)));
        for (s, d, w) in all {
            let NodeKind::Hidden { point } = self.nodes[s].kind else {
                continue;
            };
            let target = match self.nodes[d].kind {
                NodeKind::Hidden { point } => EdgeTarget::Node(point),
                NodeKind::Output { index } => EdgeTarget::Output(index),
                NodeKind::Input { .. } => continue,
            };
            out.entry(point).or_default().push((target, w));
        }
        out.into_iter().collect()
    }

    /// Kahn's algorithm over the feedforward edges, lowest index first.
    pub fn topological_order(&self) -> Result<Vec<usize>, GenomeError> {
        let n = self.nodes.len();
        let mut indegree = vec![0usize; n];
        let mut succ = vec![Vec::new(); n];
        for e in &self.edges {
            indegree[e.dest] += 1;
            succ[e.source].push(e.dest);
        }
        let mut ready: BinaryHeap<Reverse<usize>> = (0..n).filter(|&i| indegree[i] == 0).map(Reverse).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse(i)) = ready.pop() {
            order.push(i);
            for &d in &succ[i] {
                indegree[d] -= 1;
                if indegree[d] == 0 {
                    ready.push(Reverse(d));
                }
            }
        }
        if order.len() == n {
            Ok(order)
        } else {
            Err(GenomeError::Cycle)
        }
    }

    /// Checks the structural invariants.
    ///
    /// Output nodes must all exist but may be unconnected (their prediction
    /// is then the constant `tanh(bias)`); every other node has to lie on a
    /// path from an input to an output, counting recurrent edges.
    pub fn validate(&self) -> Result<(), GenomeError> {
        let n = self.nodes.len();
        for j in 0..self.num_outputs {
            self.output_node(j).ok_or(GenomeError::MissingOutput(j))?;
        }
        for (i, node) in self.nodes.iter().enumerate() {
            let expected = if node.is_input() { 0 } else { node.cell.param_count() };
            if node.params.len() != expected {
                return Err(GenomeError::ParamCount(i));
            }
        }
        let all: Vec<(usize, usize, usize)> = self
            .edges
            .iter()
            .map(|e| (e.source, e.dest, 0))
            .chain(self.recurrent_edges.iter().map(|e| (e.source, e.dest, e.skip)))
            .collect();
        let mut seen = BTreeSet::new();
        for (k, &(s, d, skip)) in all.iter().enumerate() {
            if s >= n || d >= n || self.nodes[d].is_input() || self.nodes[s].is_output() {
                return Err(GenomeError::BadEndpoint(k));
            }
            if k >= self.edges.len() && skip == 0 {
                return Err(GenomeError::ZeroSkip(k - self.edges.len()));
            }
            if !seen.insert((s, d, skip)) {
                return Err(GenomeError::Duplicate { source_node: s, dest: d, skip });
            }
        }
        self.topological_order()?;

        let mut fwd = vec![Vec::new(); n];
        let mut bwd = vec![Vec::new(); n];
        for &(s, d, _) in &all {
            fwd[s].push(d);
            bwd[d].push(s);
        }
        let reach = |starts: Vec<usize>, adj: &[Vec<usize>]| {
            let mut seen = vec![false; n];
            let mut stack = starts;
            while let Some(i) = stack.pop() {
                if !core::mem::replace(&mut seen[i], true) {
                    stack.extend(adj[i].iter().copied());
                }
            }
            seen
        };
        let from_inputs = reach((0..n).filter(|&i| self.nodes[i].is_input()).collect(), &fwd);
        let to_outputs = reach((0..n).filter(|&i| self.nodes[i].is_output()).collect(), &bwd);
        for (i, node) in self.nodes.iter().enumerate() {
            if !node.is_output() && !(from_inputs[i] && to_outputs[i]) {
                return Err(GenomeError::Disconnected(i));
            }
        }
        Ok(())
    }
}

/// Roulette over a point's node-type pheromones. Merged points carry the
/// per-type sum of their members, so this covers them too.
pub fn select_node_type<R: Rng + ?Sized>(point: &PheromonePoint, rng: &mut R) -> CellType {
    roulette::select(&point.type_pheromones, rng).and_then(CellType::from_index).unwrap_or(CellType::Simple)
}

/// Initial weight of an edge leaving `source` towards `target`: the value
/// remembered at the source centroid if there is one, otherwise a draw from
/// `scheme`.
pub fn seed_weight<R: Rng + ?Sized>(
    source: Option<&PheromonePoint>,
    target: EdgeTarget,
    scheme: InitScheme,
    fan_in: usize,
    fan_out: usize,
    rng: &mut R,
) -> f64 {
    match source.and_then(|p| p.weight_memory.get(&target)) {
        Some(&w) => w,
        None => scheme.sample(fan_in, fan_out, rng),
    }
}

/// Turns condensed paths into a genome.
///
/// Every centroid the paths visit becomes one hidden node; each path
/// contributes an edge from its input, one between each pair of consecutive
/// centroids and one into its output. Repeated edges are merged. Cell types
/// come from [`select_node_type`], edge weights from [`seed_weight`], cell
/// biases start at zero and the other cell parameters are drawn from
/// `scheme`.
pub fn build_genome<R: Rng + ?Sized>(
    condensed: &Condensed,
    space: &PheromoneSpace,
    scheme: InitScheme,
    rng: &mut R,
) -> RnnGenome {
    let usable: Vec<_> = condensed.paths.iter().filter(|p| !p.nodes.is_empty()).collect();
    let skipped_paths = condensed.paths.len() - usable.len();

    let inputs: BTreeSet<(usize, usize)> = usable.iter().map(|p| (p.input.level, p.input.index)).collect();
    let hidden: BTreeSet<(usize, PointId)> = usable
        .iter()
        .flat_map(|p| p.nodes.iter())
        .map(|id| {
            let c = condensed.centroid(*id).expect("path node is a centroid");
            (c.level, c.id)
        })
        .collect();

    let mut genome = RnnGenome::empty(space.num_inputs(), space.num_outputs());
    let outputs = core::mem::take(&mut genome.nodes);
    let mut input_idx = BTreeMap::new();
    for &(level, index) in &inputs {
        input_idx.insert((level, index), genome.nodes.len());
        genome.nodes.push(Node {
            kind: NodeKind::Input { level, index },
            level,
            x: space.input_x(index),
            y: 0.0,
            cell: CellType::Simple,
            params: Vec::new(),
        });
    }
    let mut hidden_idx = BTreeMap::new();
    for &(level, point) in &hidden {
        let c = condensed.centroid(point).unwrap();
        hidden_idx.insert(point, genome.nodes.len());
        genome.nodes.push(Node {
            kind: NodeKind::Hidden { point },
            level,
            x: c.x,
            y: c.y,
            cell: CellType::Simple,
            params: Vec::new(),
        });
    }
    let first_output = genome.nodes.len();
    genome.nodes.extend(outputs);

    // (source, dest, skip) -> orientation
    let mut links: BTreeMap<(usize, usize, usize), Orientation> = BTreeMap::new();
    let nodes = &genome.nodes;
    let mut link = |a: usize, b: usize| {
        let (na, nb) = (&nodes[a], &nodes[b]);
        debug_assert!(na.level >= nb.level);
        let skip = na.level - nb.level;
        let orientation = if nb.y >= na.y { Orientation::Forward } else { Orientation::Backward };
        let key = match (na.kind, nb.kind) {
            _ if skip > 0 => (a, b, skip),
            (NodeKind::Hidden { point: pa }, NodeKind::Hidden { point: pb }) if (nb.y, pb) <= (na.y, pa) => (a, b, 1),
            _ => (a, b, 0),
        };
        links.entry(key).or_insert(orientation);
    };
    for path in &usable {
        let mut prev = input_idx[&(path.input.level, path.input.index)];
        for id in &path.nodes {
            let h = hidden_idx[id];
            link(prev, h);
            prev = h;
        }
        link(prev, first_output + path.output);
    }

    let mut node_types = Vec::with_capacity(hidden.len());
    for &(_, point) in &hidden {
        let cell = match space.point(point) {
            Some(p) => select_node_type(p, rng),
            None => CellType::ALL[rng.random_range(0..CellType::COUNT)],
        };
        genome.nodes[hidden_idx[&point]].cell = cell;
        node_types.push((point, cell));
    }

    let n = genome.nodes.len();
    let (mut fan_in, mut fan_out) = (vec![0usize; n], vec![0usize; n]);
    for &(s, d, _) in links.keys() {
        fan_out[s] += 1;
        fan_in[d] += 1;
    }
    for (&(s, d, skip), &orientation) in &links {
        let source = match genome.nodes[s].kind {
            NodeKind::Hidden { point } => space.point(point),
            _ => None,
        };
        let target = match genome.nodes[d].kind {
            NodeKind::Hidden { point } => EdgeTarget::Node(point),
            NodeKind::Output { index } => EdgeTarget::Output(index),
            NodeKind::Input { .. } => unreachable!("edges never enter inputs"),
        };
        let weight = seed_weight(source, target, scheme, fan_in[d], fan_out[s], rng);
        if skip == 0 {
            genome.edges.push(Edge { source: s, dest: d, weight });
        } else {
            genome.recurrent_edges.push(RecurrentEdge { source: s, dest: d, weight, skip, orientation });
        }
    }
    for node in genome.nodes.iter_mut().filter(|n| !n.is_input()) {
        let cell = node.cell;
        node.params = (0..cell.param_count())
            .map(|i| if cell.is_bias(i) { 0.0 } else { scheme.sample(1, 1, rng) })
            .collect();
    }

    let mut followed: Vec<PointId> = usable.iter().flat_map(|p| p.followed.iter().copied()).collect();
    followed.sort_unstable();
    followed.dedup();
    let levels: BTreeSet<usize> = inputs.iter().map(|&(l, _)| l).chain(hidden.iter().map(|&(l, _)| l)).collect();
    let outputs: BTreeSet<usize> = usable.iter().map(|p| p.output).collect();
    genome.provenance = Provenance {
        nodes: node_types,
        followed,
        levels: levels.into_iter().collect(),
        inputs: inputs.into_iter().collect(),
        outputs: outputs.into_iter().collect(),
        skipped_paths,
    };
    genome
}
