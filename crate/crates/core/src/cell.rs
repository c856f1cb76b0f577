//! Recurrent cell types and their single-step updates.
//!
//! Every node of a genome is a scalar unit: it receives one aggregated input
//! `a` (the weighted sum of its incoming edges) and keeps its own previous
//! output `h` (plus a memory cell `c` for the LSTM). Gated cells use scalar
//! versions of their usual equations; `σ` is the logistic sigmoid.
//!
//! | cell    | parameters (in order)                                   |
//! |---------|---------------------------------------------------------|
//! | Simple  | `b`                                                     |
//! | DeltaRnn| `α β1 β2 v b_r b_z`                                     |
//! | Gru     | `w_z u_z b_z  w_r u_r b_r  w_h u_h b_h`                 |
//! | Lstm    | `w_i u_i b_i  w_f u_f b_f  w_o u_o b_o  w_g u_g b_g`    |
//! | Mgu     | `w_f u_f b_f  w_h u_h b_h`                              |
//! | Ugrnn   | `w_c u_c b_c  w_g u_g b_g`                              |

use serde::{Deserialize, Serialize};

use crate::math::{sigmoid, tanh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CellType {
    Simple,
    DeltaRnn,
    Gru,
    Lstm,
    Mgu,
    Ugrnn,
}

impl CellType {
    pub const COUNT: usize = 6;

    pub const ALL: [CellType; Self::COUNT] = [
        CellType::Simple,
        CellType::DeltaRnn,
        CellType::Gru,
        CellType::Lstm,
        CellType::Mgu,
        CellType::Ugrnn,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<CellType> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            CellType::Simple => "simple",
            CellType::DeltaRnn => "delta",
            CellType::Gru => "gru",
            CellType::Lstm => "lstm",
            CellType::Mgu => "mgu",
            CellType::Ugrnn => "ugrnn",
        }
    }

    pub fn param_count(self) -> usize {
        match self {
            CellType::Simple => 1,
            CellType::DeltaRnn => 6,
            CellType::Gru => 9,
            CellType::Lstm => 12,
            CellType::Mgu => 6,
            CellType::Ugrnn => 6,
        }
    }

    /// Whether parameter `i` is a bias term (biases start at zero).
    pub fn is_bias(self, i: usize) -> bool {
        match self {
            CellType::Simple => true,
            CellType::DeltaRnn => i >= 4,
            _ => i % 3 == 2,
        }
    }
}

/// Recurrent state carried by a node between time steps.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CellState {
    pub h: f64,
    /// LSTM memory cell; zero and unused for the other types.
    pub c: f64,
}

/// Slots of intermediate activations kept by [`cell_forward`] for the
/// backward pass.
pub const GATE_SLOTS: usize = 5;

pub type Gates = [f64; GATE_SLOTS];

/// One forward step. Returns the node output, which is also the new `h`.
pub fn cell_step(cell: CellType, p: &[f64], a: f64, prev: CellState) -> (f64, CellState) {
    cell_forward(cell, p, a, prev, &mut [0.0; GATE_SLOTS])
}

/// [`cell_step`] that also records the gate activations in `gates`.
pub fn cell_forward(cell: CellType, p: &[f64], a: f64, prev: CellState, gates: &mut Gates) -> (f64, CellState) {
    debug_assert_eq!(p.len(), cell.param_count());
    let hp = prev.h;
    match cell {
        // h = tanh(a + b)
        CellType::Simple => {
            let h = tanh(a + p[0]);
            gates[0] = h;
            (h, CellState { h, c: 0.0 })
        }
        // z = tanh(α·a·(v·hp) + β1·(v·hp) + β2·a + b_z)
        // r = σ(a + b_r)
        // h = tanh((1 − r)·z + r·hp)
        CellType::DeltaRnn => {
            let vh = p[3] * hp;
            let z = tanh(p[0] * a * vh + p[1] * vh + p[2] * a + p[5]);
            let r = sigmoid(a + p[4]);
            let h = tanh((1.0 - r) * z + r * hp);
            gates[..3].copy_from_slice(&[z, r, h]);
            (h, CellState { h, c: 0.0 })
        }
        // z = σ(w_z·a + u_z·hp + b_z),  r = σ(w_r·a + u_r·hp + b_r)
        // n = tanh(w_h·a + u_h·(r·hp) + b_h)
        // h = (1 − z)·hp + z·n
        CellType::Gru => {
            let z = sigmoid(p[0] * a + p[1] * hp + p[2]);
            let r = sigmoid(p[3] * a + p[4] * hp + p[5]);
            let n = tanh(p[6] * a + p[7] * r * hp + p[8]);
            let h = (1.0 - z) * hp + z * n;
            gates[..3].copy_from_slice(&[z, r, n]);
            (h, CellState { h, c: 0.0 })
        }
        // i, f, o = σ(w·a + u·hp + b),  g = tanh(w_g·a + u_g·hp + b_g)
        // c = f·cp + i·g,  h = o·tanh(c)
        CellType::Lstm => {
            let i = sigmoid(p[0] * a + p[1] * hp + p[2]);
            let f = sigmoid(p[3] * a + p[4] * hp + p[5]);
            let o = sigmoid(p[6] * a + p[7] * hp + p[8]);
            let g = tanh(p[9] * a + p[10] * hp + p[11]);
            let c = f * prev.c + i * g;
            let tc = tanh(c);
            let h = o * tc;
            *gates = [i, f, o, g, tc];
            (h, CellState { h, c })
        }
        // f = σ(w_f·a + u_f·hp + b_f)
        // n = tanh(w_h·a + u_h·(f·hp) + b_h)
        // h = (1 − f)·hp + f·n
        CellType::Mgu => {
            let f = sigmoid(p[0] * a + p[1] * hp + p[2]);
            let n = tanh(p[3] * a + p[4] * f * hp + p[5]);
            let h = (1.0 - f) * hp + f * n;
            gates[..2].copy_from_slice(&[f, n]);
            (h, CellState { h, c: 0.0 })
        }
        // c = tanh(w_c·a + u_c·hp + b_c),  g = σ(w_g·a + u_g·hp + b_g)
        // h = g·hp + (1 − g)·c
        CellType::Ugrnn => {
            let c = tanh(p[0] * a + p[1] * hp + p[2]);
            let g = sigmoid(p[3] * a + p[4] * hp + p[5]);
            let h = g * hp + (1.0 - g) * c;
            gates[..2].copy_from_slice(&[c, g]);
            (h, CellState { h, c: 0.0 })
        }
    }
}

/// Backward through one [`cell_step`].
///
/// `d_out` is the loss gradient w.r.t. this step's output arriving through
/// outgoing edges, `d_next` the gradient w.r.t. the state handed to the next
/// step. Parameter gradients are accumulated into `grad`. Returns the
/// gradient w.r.t. the aggregated input and w.r.t. the previous state.
pub fn cell_backward(
    cell: CellType,
    p: &[f64],
    a: f64,
    prev: CellState,
    d_out: f64,
    d_next: CellState,
    grad: &mut [f64],
) -> (f64, CellState) {
    let mut gates = [0.0; GATE_SLOTS];
    cell_forward(cell, p, a, prev, &mut gates);
    cell_backward_with(cell, p, a, prev, &gates, d_out, d_next, grad)
}

/// [`cell_backward`] reusing the gates recorded by [`cell_forward`].
#[allow(clippy::too_many_arguments)]
pub fn cell_backward_with(
    cell: CellType,
    p: &[f64],
    a: f64,
    prev: CellState,
    gates: &Gates,
    d_out: f64,
    d_next: CellState,
    grad: &mut [f64],
) -> (f64, CellState) {
    let hp = prev.h;
    let dh = d_out + d_next.h;
    match cell {
        CellType::Simple => {
            let h = gates[0];
            let dz = dh * (1.0 - h * h);
            grad[0] += dz;
            (dz, CellState::default())
        }
        CellType::DeltaRnn => {
            let vh = p[3] * hp;
            let [z, r, h, ..] = *gates;

            let du = dh * (1.0 - h * h);
            let dz = du * (1.0 - r);
            let dr = du * (hp - z);
            let mut dhp = du * r;

            let zz = dz * (1.0 - z * z);
            grad[0] += zz * a * vh;
            grad[1] += zz * vh;
            grad[2] += zz * a;
            grad[5] += zz;
            let dvh = zz * (p[0] * a + p[1]);
            let mut da = zz * (p[0] * vh + p[2]);
            grad[3] += dvh * hp;
            dhp += dvh * p[3];

            let zr = dr * r * (1.0 - r);
            grad[4] += zr;
            da += zr;
            (da, CellState { h: dhp, c: 0.0 })
        }
        CellType::Gru => {
            let [z, r, n, ..] = *gates;

            let dz = dh * (n - hp);
            let dn = dh * z;
            let mut dhp = dh * (1.0 - z);

            let zn = dn * (1.0 - n * n);
            grad[6] += zn * a;
            grad[7] += zn * r * hp;
            grad[8] += zn;
            let mut da = zn * p[6];
            let dr = zn * p[7] * hp;
            dhp += zn * p[7] * r;

            let zr = dr * r * (1.0 - r);
            da += gate_grads(&mut grad[3..6], &p[3..6], zr, a, hp, &mut dhp);
            let zz = dz * z * (1.0 - z);
            da += gate_grads(&mut grad[0..3], &p[0..3], zz, a, hp, &mut dhp);
            (da, CellState { h: dhp, c: 0.0 })
        }
        CellType::Lstm => {
            let [i, f, o, g, tc] = *gates;

            let dc = d_next.c + dh * o * (1.0 - tc * tc);
            let d_o = dh * tc;
            let di = dc * g;
            let dg = dc * i;
            let df = dc * prev.c;
            let dcp = dc * f;

            let mut dhp = 0.0;
            let mut da = 0.0;
            da += gate_grads(&mut grad[0..3], &p[0..3], di * i * (1.0 - i), a, hp, &mut dhp);
            da += gate_grads(&mut grad[3..6], &p[3..6], df * f * (1.0 - f), a, hp, &mut dhp);
            da += gate_grads(&mut grad[6..9], &p[6..9], d_o * o * (1.0 - o), a, hp, &mut dhp);
            da += gate_grads(&mut grad[9..12], &p[9..12], dg * (1.0 - g * g), a, hp, &mut dhp);
            (da, CellState { h: dhp, c: dcp })
        }
        CellType::Mgu => {
            let [f, n, ..] = *gates;

            let mut df = dh * (n - hp);
            let dn = dh * f;
            let mut dhp = dh * (1.0 - f);

            let zn = dn * (1.0 - n * n);
            grad[3] += zn * a;
            grad[4] += zn * f * hp;
            grad[5] += zn;
            let mut da = zn * p[3];
            df += zn * p[4] * hp;
            dhp += zn * p[4] * f;

            da += gate_grads(&mut grad[0..3], &p[0..3], df * f * (1.0 - f), a, hp, &mut dhp);
            (da, CellState { h: dhp, c: 0.0 })
        }
        CellType::Ugrnn => {
            let [c, g, ..] = *gates;

            let dg = dh * (hp - c);
            let dc = dh * (1.0 - g);
            let mut dhp = dh * g;

            let mut da = 0.0;
            da += gate_grads(&mut grad[0..3], &p[0..3], dc * (1.0 - c * c), a, hp, &mut dhp);
            da += gate_grads(&mut grad[3..6], &p[3..6], dg * g * (1.0 - g), a, hp, &mut dhp);
            (da, CellState { h: dhp, c: 0.0 })
        }
    }
}

/// Accumulates gradients of a `w·a + u·hp + b` pre-activation whose
/// gradient is `dz`; returns the contribution to `d a`.
#[inline]
fn gate_grads(grad: &mut [f64], p: &[f64], dz: f64, a: f64, hp: f64, dhp: &mut f64) -> f64 {
    grad[0] += dz * a;
    grad[1] += dz * hp;
    grad[2] += dz;
    *dhp += dz * p[1];
    dz * p[0]
}
