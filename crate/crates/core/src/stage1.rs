//! Stage 1: the synchronous iteration `y(t+1) = W y(t)` run for `N` rounds
//! over a simulated message bus.
//!
//! Each node owns exactly one row of `W` (its diagonal entry and the weights
//! toward its neighbors) and its own scalar history; the only information
//! that crosses node boundaries is [`RoundMessage`] values between
//! neighbors. After `N` rounds node `i`'s history `y_i(0..=N)` yields its
//! private equation row `a_i^T x = b_i` with `a_i = (y_i(0), ..., y_i(N-1))`
//! and `b_i = -y_i(N)`; stacking all rows gives `A x* = b` whose unique
//! solution (when `A` is nonsingular) is the ascending coefficient vector of
//! the characteristic polynomial of `W`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::WAssignment;
use crate::{Error, Result};

/// One value sent from a node to a neighbor during a round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundMessage {
    pub from: usize,
    pub to: usize,
    pub payload: f64,
    pub round: usize,
}

/// A node's private view: its row of `W` and its own history. Constructed
/// from that row alone, so reading another node's weights is structurally
/// impossible.
#[derive(Debug, Clone)]
struct NodeState {
    id: usize,
    w_self: f64,
    /// Weight toward each neighbor, keyed by neighbor id.
    w_neighbors: BTreeMap<usize, f64>,
    history: Vec<f64>,
}

impl NodeState {
    fn update(&mut self, inbox: &[RoundMessage]) -> Result<()> {
        let current = *self.history.last().expect("history starts non-empty");
        // Accumulate in ascending sender order with the node's own term at
        // its sorted position: the exact summation order of a dense row
        // product, so the assembled rows match the Krylov matrix bit for
        // bit (the inbox arrives sorted by sender).
        let mut next = 0.0;
        let mut self_added = false;
        for msg in inbox {
            debug_assert_eq!(msg.to, self.id);
            let w = self.w_neighbors.get(&msg.from).ok_or_else(|| {
                Error::Invalid(format!(
                    "node {} received a message from non-neighbor {}",
                    self.id, msg.from
                ))
            })?;
            if !self_added && self.id < msg.from {
                next += self.w_self * current;
                self_added = true;
            }
            next += w * msg.payload;
        }
        if !self_added {
            next += self.w_self * current;
        }
        self.history.push(next);
        Ok(())
    }
}

/// Node `i`'s assembled equation row: `a^T x = b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalEquation {
    pub node: usize,
    pub a: Vec<f64>,
    pub b: f64,
}

/// Everything a Stage-1 run produces.
#[derive(Debug, Clone)]
pub struct Stage1Output {
    /// One equation per node, ordered by node id.
    pub equations: Vec<LocalEquation>,
    /// `trace[t][i-1] = y_i(t)` for rounds `t = 0..=N`.
    pub trace: Vec<Vec<f64>>,
    /// Every message exchanged, in delivery order.
    pub messages: Vec<RoundMessage>,
}

/// Draw the start vector: each component independent uniform on [-1, 1),
/// deterministic per seed.
pub fn init_y0(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Run `N` synchronous rounds on the message bus and assemble each node's
/// equation row. The round barrier is strict: all round-`t` messages are
/// delivered before any node computes its round-`t+1` value.
pub fn run_stage1(wa: &WAssignment, y0: &[f64]) -> Result<Stage1Output> {
    let n = wa.n();
    if y0.len() != n {
        return Err(Error::Dimension(format!(
            "start vector length {} for {n} nodes",
            y0.len()
        )));
    }
    let mut nodes: Vec<NodeState> = (1..=n)
        .map(|i| NodeState {
            id: i,
            w_self: wa.w.get(i - 1, i - 1),
            w_neighbors: wa
                .graph
                .neighbors(i)
                .into_iter()
                .map(|j| (j, wa.w.get(i - 1, j - 1)))
                .collect(),
            history: vec![y0[i - 1]],
        })
        .collect();

    let mut all_messages = Vec::new();
    for round in 0..n {
        // Send phase: every node posts its current value to each neighbor.
        let mut inboxes: Vec<Vec<RoundMessage>> = vec![Vec::new(); n + 1];
        for node in &nodes {
            let payload = *node.history.last().unwrap();
            for &to in node.w_neighbors.keys() {
                let msg = RoundMessage { from: node.id, to, payload, round };
                inboxes[to].push(msg);
                all_messages.push(msg);
            }
        }
        // Update phase: barrier reached, everyone advances one step.
        for node in &mut nodes {
            node.update(&inboxes[node.id])?;
        }
    }

    let trace: Vec<Vec<f64>> =
        (0..=n).map(|t| nodes.iter().map(|nd| nd.history[t]).collect()).collect();
    let equations = nodes
        .iter()
        .map(|nd| LocalEquation {
            node: nd.id,
            a: nd.history[..n].to_vec(),
            b: -nd.history[n],
        })
        .collect();
    Ok(Stage1Output { equations, trace, messages: all_messages })
}

impl Stage1Output {
    /// Stack the per-node rows `a_i` into the system matrix `A`.
    pub fn a_matrix(&self) -> crate::linalg::DenseMatrix {
        let n = self.equations.len();
        let mut data = Vec::with_capacity(n * n);
        for eq in &self.equations {
            data.extend_from_slice(&eq.a);
        }
        crate::linalg::DenseMatrix::new(n, n, data).expect("rows are length n")
    }

    /// Stack the per-node right-hand sides into `b`.
    pub fn b_vector(&self) -> Vec<f64> {
        self.equations.iter().map(|eq| eq.b).collect()
    }
}
