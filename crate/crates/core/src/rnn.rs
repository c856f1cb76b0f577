//! Time-unrolled execution and training of genomes.
//!
//! At step `t` every non-input node sums `w * out[t - skip][source]` over its
//! incoming edges (skip 0 for feedforward edges; history before `t = 0` reads
//! as 0) and feeds the sum through its cell. Gradients come from full-sequence
//! backpropagation through time, training is plain gradient descent with
//! gradient-norm clipping, and the loss is the mean squared error over all
//! steps and outputs.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::cell::{cell_backward_with, cell_forward, CellState, CellType, Gates, GATE_SLOTS};
use crate::genome::{GenomeError, NodeKind, RnnGenome};
use crate::math::sqrt;

/// Aligned inputs and targets: `targets[t]` is what the network should emit
/// after seeing `inputs[0..=t]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Sequence {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Gradients with a larger Euclidean norm are rescaled to this norm.
    pub grad_clip: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 40, learning_rate: 1e-3, grad_clip: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Training MSE measured before each epoch's update.
    pub epoch_mse: Vec<f64>,
    /// Training MSE after the last update.
    pub train_mse: f64,
    /// Validation MSE; `f64::INFINITY` when training diverged.
    pub fitness: f64,
    pub validation_mae: f64,
    pub test_mse: f64,
    pub test_mae: f64,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RnnError {
    #[error("step {step}: expected {expected} values, got {got}")]
    Dimension { step: usize, expected: usize, got: usize },
    #[error("inputs and targets differ in length ({inputs} vs {targets})")]
    Length { inputs: usize, targets: usize },
    #[error("sequence is empty")]
    Empty,
    #[error("epochs must be at least 1")]
    ZeroEpochs,
    #[error(transparent)]
    Genome(#[from] GenomeError),
}

struct Incoming {
    source: usize,
    /// Index of the weight in the flat parameter vector.
    weight: usize,
    skip: usize,
}

#[derive(Clone, Copy)]
enum Unit {
    Input(usize),
    /// Cell type and the range of its parameters in the flat vector.
    Cell(CellType, usize, usize),
}

/// A genome flattened for execution.
struct Net {
    order: Vec<usize>,
    units: Vec<Unit>,
    /// Incoming edges of node `i` are `incoming[starts[i]..starts[i + 1]]`.
    starts: Vec<usize>,
    incoming: Vec<Incoming>,
    outputs: Vec<usize>,
}

struct Trace {
    /// `a[t * n + i]`: aggregated input of node `i` at step `t`.
    a: Vec<f64>,
    out: Vec<f64>,
    state: Vec<CellState>,
    gates: Vec<Gates>,
}

impl Net {
    fn compile(g: &RnnGenome) -> Result<Net, RnnError> {
        let n = g.nodes.len();
        let order = g.topological_order()?;
        let mut lists: Vec<Vec<Incoming>> = (0..n).map(|_| Vec::new()).collect();
        for (k, e) in g.edges.iter().enumerate() {
            lists[e.dest].push(Incoming { source: e.source, weight: k, skip: 0 });
        }
        let base = g.edges.len();
        for (k, e) in g.recurrent_edges.iter().enumerate() {
            lists[e.dest].push(Incoming { source: e.source, weight: base + k, skip: e.skip });
        }
        let mut starts = Vec::with_capacity(n + 1);
        let mut incoming = Vec::new();
        for list in lists {
            starts.push(incoming.len());
            incoming.extend(list);
        }
        starts.push(incoming.len());
        let mut units = Vec::with_capacity(n);
        let mut at = base + g.recurrent_edges.len();
        for node in &g.nodes {
            units.push(match node.kind {
                NodeKind::Input { index, .. } => Unit::Input(index),
                _ => Unit::Cell(node.cell, at, at + node.params.len()),
            });
            at += node.params.len();
        }
        let outputs = (0..g.num_outputs)
            .map(|j| g.output_node(j).ok_or(GenomeError::MissingOutput(j)))
            .collect::<Result<_, _>>()?;
        Ok(Net { order, units, starts, incoming, outputs })
    }

    fn n(&self) -> usize {
        self.units.len()
    }

    fn forward(&self, p: &[f64], inputs: &[Vec<f64>]) -> Trace {
        let mut tr = Trace { a: Vec::new(), out: Vec::new(), state: Vec::new(), gates: Vec::new() };
        self.forward_into(p, inputs, &mut tr);
        tr
    }

    /// Runs the network, reusing the buffers of `tr`. Every slot that
    /// [`Net::backward`] reads is overwritten.
    fn forward_into(&self, p: &[f64], inputs: &[Vec<f64>], tr: &mut Trace) {
        let n = self.n();
        let steps = inputs.len();
        tr.a.resize(steps * n, 0.0);
        tr.out.resize(steps * n, 0.0);
        tr.state.resize(steps * n, CellState::default());
        tr.gates.resize(steps * n, [0.0; GATE_SLOTS]);
        for (t, x) in inputs.iter().enumerate() {
            for &i in &self.order {
                let (cell, lo, hi) = match self.units[i] {
                    Unit::Input(index) => {
                        tr.out[t * n + i] = x[index];
                        continue;
                    }
                    Unit::Cell(cell, lo, hi) => (cell, lo, hi),
                };
                let mut a = 0.0;
                for e in &self.incoming[self.starts[i]..self.starts[i + 1]] {
                    if t >= e.skip {
                        a += p[e.weight] * tr.out[(t - e.skip) * n + e.source];
                    }
                }
                let prev = if t > 0 { tr.state[(t - 1) * n + i] } else { CellState::default() };
                let k = t * n + i;
                let (o, s) = cell_forward(cell, &p[lo..hi], a, prev, &mut tr.gates[k]);
                tr.a[k] = a;
                tr.out[k] = o;
                tr.state[k] = s;
            }
        }
    }

    fn mse(&self, tr: &Trace, targets: &[Vec<f64>]) -> f64 {
        let n = self.n();
        let mut sum = 0.0;
        for (t, y) in targets.iter().enumerate() {
            for (j, &o) in self.outputs.iter().enumerate() {
                let d = tr.out[t * n + o] - y[j];
                sum += d * d;
            }
        }
        sum / (targets.len() * self.outputs.len()).max(1) as f64
    }

    fn backward(&self, p: &[f64], seq: &Sequence, tr: &Trace) -> Vec<f64> {
        let mut grad = vec![0.0; p.len()];
        self.backward_into(p, seq, tr, &mut Vec::new(), &mut grad);
        grad
    }

    /// Writes the loss gradient into `grad`, using `d_out` as scratch.
    fn backward_into(&self, p: &[f64], seq: &Sequence, tr: &Trace, d_out: &mut Vec<f64>, grad: &mut [f64]) {
        let n = self.n();
        let steps = seq.len();
        let scale = 2.0 / (steps * self.outputs.len()).max(1) as f64;
        grad.fill(0.0);
        d_out.clear();
        d_out.resize(steps * n, 0.0);
        let mut d_next = vec![CellState::default(); n];
        for t in (0..steps).rev() {
            for (j, &o) in self.outputs.iter().enumerate() {
                d_out[t * n + o] += scale * (tr.out[t * n + o] - seq.targets[t][j]);
            }
            for &i in self.order.iter().rev() {
                let Unit::Cell(cell, lo, hi) = self.units[i] else {
                    continue;
                };
                let k = t * n + i;
                let prev = if t > 0 { tr.state[k - n] } else { CellState::default() };
                let (d_a, d_prev) = cell_backward_with(
                    cell,
                    &p[lo..hi],
                    tr.a[k],
                    prev,
                    &tr.gates[k],
                    d_out[k],
                    d_next[i],
                    &mut grad[lo..hi],
                );
                d_next[i] = d_prev;
                for e in &self.incoming[self.starts[i]..self.starts[i + 1]] {
                    if t >= e.skip {
                        let src = (t - e.skip) * n + e.source;
                        grad[e.weight] += d_a * tr.out[src];
                        d_out[src] += d_a * p[e.weight];
                    }
                }
            }
        }
    }
}

fn check(g: &RnnGenome, seq: &Sequence) -> Result<(), RnnError> {
    if seq.is_empty() {
        return Err(RnnError::Empty);
    }
    if seq.inputs.len() != seq.targets.len() {
        return Err(RnnError::Length { inputs: seq.inputs.len(), targets: seq.targets.len() });
    }
    check_inputs(g, &seq.inputs)?;
    for (step, y) in seq.targets.iter().enumerate() {
        if y.len() != g.num_outputs {
            return Err(RnnError::Dimension { step, expected: g.num_outputs, got: y.len() });
        }
    }
    Ok(())
}

fn check_inputs(g: &RnnGenome, inputs: &[Vec<f64>]) -> Result<(), RnnError> {
    for (step, x) in inputs.iter().enumerate() {
        if x.len() != g.num_inputs {
            return Err(RnnError::Dimension { step, expected: g.num_inputs, got: x.len() });
        }
    }
    Ok(())
}

/// Predictions for every step, `T x num_outputs`.
pub fn forward(g: &RnnGenome, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, RnnError> {
    check_inputs(g, inputs)?;
    let net = Net::compile(g)?;
    let n = net.n();
    let tr = net.forward(&g.params(), inputs);
    Ok((0..inputs.len()).map(|t| net.outputs.iter().map(|&o| tr.out[t * n + o]).collect()).collect())
}

/// Mean squared error over the sequence and its gradient with respect to
/// [`RnnGenome::params`].
pub fn loss_and_gradient(g: &RnnGenome, seq: &Sequence) -> Result<(f64, Vec<f64>), RnnError> {
    check(g, seq)?;
    let net = Net::compile(g)?;
    let p = g.params();
    let tr = net.forward(&p, &seq.inputs);
    let loss = net.mse(&tr, &seq.targets);
    Ok((loss, net.backward(&p, seq, &tr)))
}

/// `(MSE, MAE)` of the genome's predictions over a sequence.
pub fn evaluate(g: &RnnGenome, seq: &Sequence) -> Result<(f64, f64), RnnError> {
    check(g, seq)?;
    let pred = forward(g, &seq.inputs)?;
    let (mut se, mut ae) = (0.0, 0.0);
    for (p, y) in pred.iter().zip(&seq.targets) {
        for (a, b) in p.iter().zip(y) {
            se += (a - b) * (a - b);
            ae += (a - b).abs();
        }
    }
    let count = (seq.len() * g.num_outputs).max(1) as f64;
    Ok((se / count, ae / count))
}

/// Trains a copy of `genome` on `train` and scores it on `validation` and
/// `test`. Divergence (a non-finite loss or parameter) stops training early
/// and reports an infinite fitness.
pub fn train(
    genome: &RnnGenome,
    train: &Sequence,
    validation: &Sequence,
    test: &Sequence,
    cfg: &TrainConfig,
) -> Result<(RnnGenome, TrainReport), RnnError> {
    if cfg.epochs == 0 {
        return Err(RnnError::ZeroEpochs);
    }
    check(genome, train)?;
    check(genome, validation)?;
    check(genome, test)?;
    let net = Net::compile(genome)?;
    let mut g = genome.clone();
    let mut p = g.params();
    let mut epoch_mse = Vec::with_capacity(cfg.epochs);
    let mut diverged = false;
    let mut tr = Trace { a: Vec::new(), out: Vec::new(), state: Vec::new(), gates: Vec::new() };
    let mut d_out = Vec::new();
    let mut grad = vec![0.0; p.len()];
    for _ in 0..cfg.epochs {
        net.forward_into(&p, &train.inputs, &mut tr);
        let loss = net.mse(&tr, &train.targets);
        epoch_mse.push(loss);
        if !loss.is_finite() {
            diverged = true;
            break;
        }
        net.backward_into(&p, train, &tr, &mut d_out, &mut grad);
        let norm = sqrt(grad.iter().map(|v| v * v).sum());
        if !norm.is_finite() {
            diverged = true;
            break;
        }
        if norm > cfg.grad_clip {
            let s = cfg.grad_clip / norm;
            grad.iter_mut().for_each(|v| *v *= s);
        }
        for (w, d) in p.iter_mut().zip(&grad) {
            *w -= cfg.learning_rate * d;
        }
    }
    g.set_params(&p)?;
    net.forward_into(&p, &train.inputs, &mut tr);
    let train_mse = net.mse(&tr, &train.targets);
    let (val_mse, val_mae) = evaluate(&g, validation)?;
    let (test_mse, test_mae) = evaluate(&g, test)?;
    diverged |= !(train_mse.is_finite() && val_mse.is_finite());
    let fitness = if diverged { f64::INFINITY } else { val_mse };
    g.fitness = Some(fitness);
    Ok((
        g,
        TrainReport { epoch_mse, train_mse, fitness, validation_mae: val_mae, test_mse, test_mae, diverged },
    ))
}
