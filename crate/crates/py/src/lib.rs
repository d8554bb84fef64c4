//! Python bindings: network construction, matrix builders, reference
//! polynomial/spectrum computations, and the full two-stage estimation
//! pipeline, all returning plain Python data.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use graphspec::graph::{build_w, Graph, WAssignment, WKind};
use graphspec::linalg::{charpoly_oracle, condition_estimate, solve_dense, CharPoly, DenseMatrix};
use graphspec::spectrum::find_roots;
use graphspec::stage1::{init_y0, run_stage1};
use graphspec::stage2::{integrate, ConsensusParams};

fn to_py_err(e: graphspec::Error) -> PyErr {
    use graphspec::Error::*;
    match e {
        Dimension(_) | Invalid(_) | Config(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn matrix_from_rows(rows: Vec<Vec<f64>>) -> PyResult<DenseMatrix> {
    let n = rows.len();
    let cols = rows.first().map(Vec::len).unwrap_or(0);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err("matrix rows have unequal lengths"));
    }
    DenseMatrix::new(n, cols, rows.into_iter().flatten().collect()).map_err(to_py_err)
}

fn matrix_to_rows(m: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

/// An undirected connected network over 1-based node ids.
#[pyclass]
struct Network {
    inner: Graph,
}

#[pymethods]
impl Network {
    #[new]
    fn new(n: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        Graph::new(n, &edges).map(|inner| Self { inner }).map_err(to_py_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges().collect()
    }

    fn neighbors(&self, i: usize) -> Vec<usize> {
        self.inner.neighbors(i)
    }

    /// 0/1 adjacency matrix of the network.
    fn adjacency(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(&build_w(&self.inner, WKind::Adjacency, None).w)
    }

    /// Graph Laplacian (degree minus adjacency).
    fn laplacian(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(&build_w(&self.inner, WKind::Laplacian, None).w)
    }

    /// Random sparsity-conforming weights, deterministic per seed.
    fn random_weights(&self, seed: u64) -> Vec<Vec<f64>> {
        matrix_to_rows(&build_w(&self.inner, WKind::RandomWeights, Some(seed)).w)
    }

    fn __repr__(&self) -> String {
        format!(
            "Network(n={}, edges={})",
            self.inner.node_count(),
            self.inner.edge_count()
        )
    }
}

/// Ascending characteristic-polynomial coefficients `c_0..c_(n-1)` of a
/// square matrix (the monic leading 1 is implied).
#[pyfunction]
fn characteristic_coefficients(w: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    let m = matrix_from_rows(w)?;
    charpoly_oracle(&m).map(|cp| cp.coeffs().to_vec()).map_err(to_py_err)
}

/// All roots of the monic polynomial with the given ascending coefficients,
/// as `(re, im)` pairs sorted by real then imaginary part.
#[pyfunction]
fn polynomial_roots(coeffs: Vec<f64>) -> PyResult<Vec<(f64, f64)>> {
    let cp = CharPoly::new(coeffs).map_err(to_py_err)?;
    let roots = find_roots(&cp).map_err(to_py_err)?;
    Ok(roots.iter().map(|z| (z.re, z.im)).collect())
}

/// Result of a full pipeline run.
#[pyclass]
struct SpectrumEstimate {
    /// Final ascending coefficient estimates, one list per node.
    #[pyo3(get)]
    estimates: Vec<Vec<f64>>,
    /// Final eigenvalue estimates per node as `(re, im)` pairs; `None`
    /// where the node's polynomial defeated the root finder.
    #[pyo3(get)]
    roots: Vec<Option<Vec<(f64, f64)>>>,
    #[pyo3(get)]
    final_time: f64,
    #[pyo3(get)]
    v_final: f64,
    /// Condition estimate of the stacked linear system.
    #[pyo3(get)]
    condition: f64,
    /// Reference coefficients/spectrum computed directly from the matrix.
    #[pyo3(get)]
    reference_coefficients: Vec<f64>,
    #[pyo3(get)]
    reference_spectrum: Vec<(f64, f64)>,
}

#[pymethods]
impl SpectrumEstimate {
    fn __repr__(&self) -> String {
        format!(
            "SpectrumEstimate(nodes={}, final_time={}, v_final={:.3e})",
            self.estimates.len(),
            self.final_time,
            self.v_final
        )
    }
}

/// Run both stages on a weight matrix over `network`: iterate the linear
/// dynamics to collect each node's equation, then follow the consensus
/// flow until `t_max` (or until the Lyapunov value drops to `v_tol`).
#[pyfunction]
#[pyo3(signature = (network, w, alpha=10.0, beta=10.0, h=1e-3, t_max=200.0, v_tol=1e-12, sample_every=1.0, seed=0))]
#[allow(clippy::too_many_arguments)]
fn estimate_spectrum(
    network: &Network,
    w: Vec<Vec<f64>>,
    alpha: f64,
    beta: f64,
    h: f64,
    t_max: f64,
    v_tol: f64,
    sample_every: f64,
    seed: u64,
) -> PyResult<SpectrumEstimate> {
    let m = matrix_from_rows(w)?;
    let wa = WAssignment::new(network.inner.clone(), m).map_err(to_py_err)?;
    let n = wa.n();

    let y0 = init_y0(n, seed);
    let s1 = run_stage1(&wa, &y0).map_err(to_py_err)?;
    let a = s1.a_matrix();
    solve_dense(&a, &s1.b_vector()).map_err(to_py_err)?;

    let params =
        ConsensusParams::uniform(&wa.graph, alpha, beta, h, t_max, v_tol).map_err(to_py_err)?;
    let x_init = vec![vec![0.0; n]; n];
    let (trace, state) =
        integrate(&s1.equations, &wa.graph, &params, &x_init, sample_every).map_err(to_py_err)?;

    let roots = state
        .estimates
        .iter()
        .map(|x| {
            CharPoly::new(x.clone())
                .and_then(|cp| find_roots(&cp))
                .ok()
                .map(|rs| rs.iter().map(|z| (z.re, z.im)).collect())
        })
        .collect();
    let reference = charpoly_oracle(&wa.w).map_err(to_py_err)?;
    let reference_spectrum = find_roots(&reference)
        .map_err(to_py_err)?
        .iter()
        .map(|z| (z.re, z.im))
        .collect();

    Ok(SpectrumEstimate {
        estimates: state.estimates,
        roots,
        final_time: state.time,
        v_final: trace.samples.last().map(|s| s.v).unwrap_or(0.0),
        condition: condition_estimate(&a),
        reference_coefficients: reference.coeffs().to_vec(),
        reference_spectrum,
    })
}

#[pymodule]
fn graphspec_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Network>()?;
    m.add_class::<SpectrumEstimate>()?;
    m.add_function(wrap_pyfunction!(characteristic_coefficients, m)?)?;
    m.add_function(wrap_pyfunction!(polynomial_roots, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_spectrum, m)?)?;
    Ok(())
}
