//! Stage 2: the continuous-time consensus flow that drives every node's
//! local coefficient estimate to the shared solution of the stacked system.
//!
//! Node `i` holds an estimate `x_i(t)` and follows
//!
//! ```text
//! dx_i/dt = -alpha_i (a_i^T x_i - b_i) a_i - sum_(j in N_i) beta_(i,j) (x_i - x_j)
//! ```
//!
//! using only its own equation row, its own estimate, and its neighbors'
//! estimates. The quadratic Lyapunov value
//! `V = sum_i alpha_i (a_i^T x_i - b_i)^2 + sum_(i,j) beta_(i,j) ||x_i - x_j||^2`
//! is non-increasing along the flow and vanishes exactly at the consensus
//! solution, which makes monotone decay a checkable runtime contract for the
//! fixed-step integrator.

use std::collections::BTreeMap;

use crate::graph::Graph;
use crate::linalg::dot;
use crate::stage1::LocalEquation;
use crate::{Error, Result};

/// Gains and integrator controls for a consensus-flow run.
#[derive(Debug, Clone)]
pub struct ConsensusParams {
    alpha: Vec<f64>,
    beta: BTreeMap<(usize, usize), f64>,
    /// Integrator step in time units.
    pub h: f64,
    /// Time horizon.
    pub t_max: f64,
    /// Stop once the Lyapunov value falls to or below this.
    pub v_tol: f64,
}

impl ConsensusParams {
    /// Per-node gains `alpha` (index 0 is node 1) and per-edge gains `beta`
    /// keyed by `(i, j)` with `i < j`. All gains must be strictly positive.
    pub fn new(
        alpha: Vec<f64>,
        beta: BTreeMap<(usize, usize), f64>,
        h: f64,
        t_max: f64,
        v_tol: f64,
    ) -> Result<Self> {
        if alpha.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::Invalid("every alpha gain must be > 0".into()));
        }
        if beta.values().any(|b| !(*b > 0.0)) {
            return Err(Error::Invalid("every beta gain must be > 0".into()));
        }
        if !(h > 0.0) {
            return Err(Error::Invalid("step size h must be > 0".into()));
        }
        if !(t_max > 0.0) {
            return Err(Error::Invalid("t_max must be > 0".into()));
        }
        if !(v_tol >= 0.0) {
            return Err(Error::Invalid("v_tol must be >= 0".into()));
        }
        Ok(Self { alpha, beta, h, t_max, v_tol })
    }

    /// Same `alpha` for every node and same `beta` for every edge of `graph`.
    pub fn uniform(graph: &Graph, alpha: f64, beta: f64, h: f64, t_max: f64, v_tol: f64) -> Result<Self> {
        let alphas = vec![alpha; graph.node_count()];
        let betas = graph.edges().map(|e| (e, beta)).collect();
        Self::new(alphas, betas, h, t_max, v_tol)
    }

    /// Gain for node `i` (1-based).
    pub fn alpha(&self, i: usize) -> f64 {
        self.alpha[i - 1]
    }

    /// Gain for edge `{i, j}`; zero if absent (callers only ask for real edges).
    pub fn beta(&self, i: usize, j: usize) -> f64 {
        *self.beta.get(&(i.min(j), i.max(j))).unwrap_or(&0.0)
    }

    pub fn node_count(&self) -> usize {
        self.alpha.len()
    }
}

/// The flow's state: per-node estimate vectors at a point in time.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusState {
    pub time: f64,
    /// `estimates[i-1]` is node `i`'s length-`N` coefficient estimate.
    pub estimates: Vec<Vec<f64>>,
}

/// One recorded trace point.
#[derive(Debug, Clone)]
pub struct FlowSample {
    pub t: f64,
    /// Per-node estimates at time `t`.
    pub estimates: Vec<Vec<f64>>,
    /// Lyapunov value at time `t`.
    pub v: f64,
}

/// Samples recorded during integration, at strictly increasing times.
#[derive(Debug, Clone, Default)]
pub struct FlowTrace {
    pub samples: Vec<FlowSample>,
}

impl FlowTrace {
    pub fn last(&self) -> Option<&FlowSample> {
        self.samples.last()
    }
}

fn check_shapes(
    state: &ConsensusState,
    eqs: &[LocalEquation],
    graph: &Graph,
    params: &ConsensusParams,
) -> Result<usize> {
    let n = graph.node_count();
    if eqs.len() != n
        || state.estimates.len() != n
        || params.node_count() != n
        || eqs.iter().any(|e| e.a.len() != n)
        || state.estimates.iter().any(|x| x.len() != n)
    {
        return Err(Error::Dimension(format!(
            "consensus system expects {n} nodes with length-{n} rows and estimates"
        )));
    }
    Ok(n)
}

/// Lyapunov value of a state:
/// `sum_i alpha_i (a_i^T x_i - b_i)^2 + sum_(i,j) beta_(i,j) ||x_i - x_j||^2`.
pub fn lyapunov_v(
    state: &ConsensusState,
    eqs: &[LocalEquation],
    graph: &Graph,
    params: &ConsensusParams,
) -> Result<f64> {
    check_shapes(state, eqs, graph, params)?;
    let mut v = 0.0;
    for (idx, eq) in eqs.iter().enumerate() {
        let r = dot(&eq.a, &state.estimates[idx]) - eq.b;
        v += params.alpha(eq.node) * r * r;
    }
    for (i, j) in graph.edges() {
        let d2: f64 = state.estimates[i - 1]
            .iter()
            .zip(&state.estimates[j - 1])
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        v += params.beta(i, j) * d2;
    }
    Ok(v)
}

/// Time derivative of every node's estimate at `state`. Node `i`'s entry
/// reads only `(a_i, b_i, alpha_i, x_i)` and the estimates of its neighbors
/// with the incident edge gains.
pub fn flow_rhs(
    state: &ConsensusState,
    eqs: &[LocalEquation],
    graph: &Graph,
    params: &ConsensusParams,
) -> Result<Vec<Vec<f64>>> {
    let n = check_shapes(state, eqs, graph, params)?;
    let mut out = vec![vec![0.0; n]; n];
    for (idx, eq) in eqs.iter().enumerate() {
        let xi = &state.estimates[idx];
        let scale = params.alpha(eq.node) * (dot(&eq.a, xi) - eq.b);
        for (o, a) in out[idx].iter_mut().zip(&eq.a) {
            *o = -scale * a;
        }
    }
    for (i, j) in graph.edges() {
        let beta = params.beta(i, j);
        for k in 0..n {
            let d = beta * (state.estimates[i - 1][k] - state.estimates[j - 1][k]);
            out[i - 1][k] -= d;
            out[j - 1][k] += d;
        }
    }
    Ok(out)
}

/// Largest step size accepted as safely inside the RK4 stability region for
/// this system, from the Gershgorin-style curvature bound
/// `lambda_max <= max_i alpha_i ||a_i||^2 + 2 max_i (sum of incident betas)`.
pub fn stable_step(eqs: &[LocalEquation], graph: &Graph, params: &ConsensusParams) -> f64 {
    let row_max = eqs
        .iter()
        .map(|eq| params.alpha(eq.node) * dot(&eq.a, &eq.a))
        .fold(0.0, f64::max);
    let lap_max = (1..=graph.node_count())
        .map(|i| {
            2.0 * graph.neighbors(i).iter().map(|&j| params.beta(i, j)).sum::<f64>()
        })
        .fold(0.0, f64::max);
    let bound = row_max + lap_max;
    if bound == 0.0 {
        return 1.0;
    }
    // RK4's real stability interval ends near 2.785; keep a margin.
    2.0 / bound
}

/// Flattened system for the integrator hot loop.
struct FlatSystem {
    n: usize,
    /// Row-major `a` rows.
    a: Vec<f64>,
    b: Vec<f64>,
    alpha: Vec<f64>,
    /// `(i0, j0, beta)` per edge, 0-based node indices.
    edges: Vec<(usize, usize, f64)>,
}

impl FlatSystem {
    fn build(eqs: &[LocalEquation], graph: &Graph, params: &ConsensusParams) -> Self {
        let n = graph.node_count();
        let mut a = Vec::with_capacity(n * n);
        let mut b = Vec::with_capacity(n);
        let mut alpha = Vec::with_capacity(n);
        for eq in eqs {
            a.extend_from_slice(&eq.a);
            b.push(eq.b);
            alpha.push(params.alpha(eq.node));
        }
        let edges = graph.edges().map(|(i, j)| (i - 1, j - 1, params.beta(i, j))).collect();
        Self { n, a, b, alpha, edges }
    }

    fn rhs(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        for (i, (xi, oi)) in x.chunks_exact(n).zip(out.chunks_exact_mut(n)).enumerate() {
            let ai = &self.a[i * n..(i + 1) * n];
            let scale = self.alpha[i] * (dot(ai, xi) - self.b[i]);
            for (o, a) in oi.iter_mut().zip(ai) {
                *o = -scale * a;
            }
        }
        for &(i, j, beta) in &self.edges {
            for k in 0..n {
                let d = beta * (x[i * n + k] - x[j * n + k]);
                out[i * n + k] -= d;
                out[j * n + k] += d;
            }
        }
    }

    fn v(&self, x: &[f64]) -> f64 {
        let n = self.n;
        let mut v = 0.0;
        for (i, xi) in x.chunks_exact(n).enumerate() {
            let r = dot(&self.a[i * n..(i + 1) * n], xi) - self.b[i];
            v += self.alpha[i] * r * r;
        }
        for &(i, j, beta) in &self.edges {
            let mut d2 = 0.0;
            for k in 0..n {
                let d = x[i * n + k] - x[j * n + k];
                d2 += d * d;
            }
            v += beta * d2;
        }
        v
    }
}

/// Integrate the flow with classical fixed-step RK4 from `x_init` until
/// `t_max` or until the Lyapunov value falls to `v_tol`, recording a sample
/// roughly every `sample_every` time units (at least every step if
/// `sample_every <= h`). The Lyapunov value is checked at every sample: an
/// increase beyond 1e-9 relative aborts with a step-size error, a non-finite
/// state with a divergence error.
pub fn integrate(
    eqs: &[LocalEquation],
    graph: &Graph,
    params: &ConsensusParams,
    x_init: &[Vec<f64>],
    sample_every: f64,
) -> Result<(FlowTrace, ConsensusState)> {
    let init_state = ConsensusState { time: 0.0, estimates: x_init.to_vec() };
    let n = check_shapes(&init_state, eqs, graph, params)?;
    if x_init.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("non-finite initial estimate".into()));
    }
    if !(sample_every > 0.0) {
        return Err(Error::Invalid("sample_every must be > 0".into()));
    }

    let sys = FlatSystem::build(eqs, graph, params);
    let h = params.h;
    let stride = ((sample_every / h).round() as usize).max(1);
    let total_steps = (params.t_max / h).ceil() as usize;

    let nn = n * n;
    let mut x: Vec<f64> = x_init.iter().flatten().copied().collect();
    let mut k1 = vec![0.0; nn];
    let mut k2 = vec![0.0; nn];
    let mut k3 = vec![0.0; nn];
    let mut k4 = vec![0.0; nn];
    let mut xt = vec![0.0; nn];

    let mut trace = FlowTrace::default();
    let mut prev_v = sys.v(&x);
    trace.samples.push(FlowSample {
        t: 0.0,
        estimates: unflatten(&x, n),
        v: prev_v,
    });
    if prev_v <= params.v_tol {
        let state = ConsensusState { time: 0.0, estimates: unflatten(&x, n) };
        return Ok((trace, state));
    }

    let mut step = 0usize;
    while step < total_steps {
        step += 1;
        let t = step as f64 * h;

        sys.rhs(&x, &mut k1);
        for i in 0..nn {
            xt[i] = x[i] + 0.5 * h * k1[i];
        }
        sys.rhs(&xt, &mut k2);
        for i in 0..nn {
            xt[i] = x[i] + 0.5 * h * k2[i];
        }
        sys.rhs(&xt, &mut k3);
        for i in 0..nn {
            xt[i] = x[i] + h * k3[i];
        }
        sys.rhs(&xt, &mut k4);
        let w = h / 6.0;
        for i in 0..nn {
            x[i] += w * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }

        let last = step == total_steps;
        if step % stride == 0 || last {
            let v = sys.v(&x);
            if !v.is_finite() || x.iter().any(|c| !c.is_finite()) {
                return Err(Error::Divergence { t });
            }
            if v > prev_v * (1.0 + 1e-9) {
                return Err(Error::StepSize { t, previous: prev_v, current: v });
            }
            trace.samples.push(FlowSample { t, estimates: unflatten(&x, n), v });
            prev_v = v;
            if v <= params.v_tol {
                break;
            }
        }
    }

    let t_final = trace.samples.last().expect("at least the initial sample").t;
    let state = ConsensusState { time: t_final, estimates: unflatten(&x, n) };
    Ok((trace, state))
}

fn unflatten(x: &[f64], n: usize) -> Vec<Vec<f64>> {
    x.chunks_exact(n).map(|c| c.to_vec()).collect()
}
