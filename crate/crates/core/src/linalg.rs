//! Dense real linear algebra: the centralized reference computations used to
//! check the distributed pipeline, plus shared matrix plumbing.
//!
//! Everything here is a pure function over immutable inputs. The distributed
//! stages never call into this module's solvers; they exist as oracles and
//! run diagnostics.

use crate::{Error, Result};

/// Default relative tolerance for declaring a pivot numerically zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Build from row-major entries. Rejects empty shapes, wrong entry
    /// counts, and non-finite values.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Invalid("matrix must have at least one row and column".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("non-finite matrix entry {bad}")));
        }
        Ok(Self { rows, cols, data })
    }

    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Identity matrix.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Operator infinity norm (maximum absolute row sum).
    pub fn op_inf_norm(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum())
            .fold(0.0, f64::max)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::Dimension(format!(
                "matvec: {}x{} matrix with vector of length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "matmul: {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += aik * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    /// Entrywise `self + s * other`.
    pub fn add_scaled(&self, other: &DenseMatrix, s: f64) -> Result<DenseMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension("add_scaled shape mismatch".into()));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + s * b).collect();
        DenseMatrix::new(self.rows, self.cols, data)
    }
}

/// Coefficients of a monic characteristic polynomial in ascending power
/// order: index `k` holds the coefficient of `x^k`, for `k < degree`; the
/// leading coefficient is implicitly 1 and not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct CharPoly {
    coeffs: Vec<f64>,
}

impl CharPoly {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Invalid("characteristic polynomial needs degree >= 1".into()));
        }
        if let Some(bad) = coeffs.iter().find(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("non-finite polynomial coefficient {bad}")));
        }
        Ok(Self { coeffs })
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len()
    }

    /// Ascending coefficients `x^0 ..= x^(degree-1)`.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Largest absolute coefficient.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Characteristic polynomial of a square matrix via the Faddeev–LeVerrier
/// recursion: with `M_0 = 0` and `c_N = 1`, iterate
/// `M_k = W M_(k-1) + c_(N-k+1) I` and `c_(N-k) = -tr(W M_k) / k`.
/// Returns the ascending non-leading coefficients, so
/// `det(xI - W) = x^N + c_(N-1) x^(N-1) + ... + c_0`.
pub fn charpoly_oracle(w: &DenseMatrix) -> Result<CharPoly> {
    if !w.is_square() {
        return Err(Error::Dimension(format!(
            "characteristic polynomial needs a square matrix, got {}x{}",
            w.rows(),
            w.cols()
        )));
    }
    let n = w.rows();
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    // wm holds W * M_(k-1); M_0 = 0.
    let mut wm = DenseMatrix::zeros(n, n);
    for k in 1..=n {
        let mut m_k = wm.clone();
        for i in 0..n {
            let v = m_k.get(i, i) + c[n - k + 1];
            m_k.set(i, i, v);
        }
        wm = w.matmul(&m_k)?;
        c[n - k] = -wm.trace() / k as f64;
    }
    c.truncate(n);
    CharPoly::new(c)
}

/// Krylov matrix `[y0, W y0, ..., W^(N-1) y0]` built by repeated
/// multiplication, so consecutive columns satisfy `col(l+1) = W col(l)`
/// bit-for-bit in the working arithmetic.
pub fn krylov_matrix(w: &DenseMatrix, y0: &[f64]) -> Result<DenseMatrix> {
    if !w.is_square() {
        return Err(Error::Dimension("Krylov matrix needs a square matrix".into()));
    }
    let n = w.rows();
    if y0.len() != n {
        return Err(Error::Dimension(format!(
            "Krylov matrix: {}x{} matrix with start vector of length {}",
            n,
            n,
            y0.len()
        )));
    }
    let mut out = DenseMatrix::zeros(n, n);
    let mut col = y0.to_vec();
    for l in 0..n {
        for i in 0..n {
            out.set(i, l, col[i]);
        }
        if l + 1 < n {
            col = w.matvec(&col)?;
        }
    }
    Ok(out)
}

/// Numerical rank via row reduction with partial pivoting. A pivot counts as
/// zero when its magnitude is at most `tol` times the largest absolute entry
/// of the input.
pub fn rank(m: &DenseMatrix, tol: f64) -> usize {
    let mut a = m.clone();
    let threshold = tol * m.max_abs();
    let (rows, cols) = (a.rows(), a.cols());
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let pivot_row = (r..rows).max_by(|&i, &j| {
            a.get(i, c).abs().total_cmp(&a.get(j, c).abs())
        });
        let Some(p) = pivot_row else { break };
        let pivot = a.get(p, c);
        if pivot.abs() <= threshold {
            continue;
        }
        if p != r {
            for j in 0..cols {
                let (x, y) = (a.get(r, j), a.get(p, j));
                a.set(r, j, y);
                a.set(p, j, x);
            }
        }
        for i in r + 1..rows {
            let f = a.get(i, c) / pivot;
            if f == 0.0 {
                continue;
            }
            for j in c..cols {
                let v = a.get(i, j) - f * a.get(r, j);
                a.set(i, j, v);
            }
        }
        r += 1;
    }
    r
}

/// LU factorization with partial pivoting, `P A = L U`.
struct Lu {
    n: usize,
    lu: Vec<f64>,
    /// `perm[i]` is the original row index now sitting in position `i`.
    perm: Vec<usize>,
}

impl Lu {
    /// Factor; reports singularity (with the numerical rank of `a`) when a
    /// pivot falls at or below `tol * max_abs(a)`.
    fn factor(a: &DenseMatrix, tol: f64) -> Result<Self> {
        let n = a.rows();
        let mut lu = a.entries().to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let threshold = tol * a.max_abs();
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| lu[i * n + k].abs().total_cmp(&lu[j * n + k].abs()))
                .unwrap();
            if lu[p * n + k].abs() <= threshold {
                return Err(Error::Singular { rank: rank(a, tol), n });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = lu[k * n + k];
            for i in k + 1..n {
                let f = lu[i * n + k] / pivot;
                lu[i * n + k] = f;
                for j in k + 1..n {
                    lu[i * n + j] -= f * lu[k * n + j];
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&i| b[i]).collect();
        for i in 1..n {
            for j in 0..i {
                x[i] -= self.lu[i * n + j] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.lu[i * n + j] * x[j];
            }
            x[i] /= self.lu[i * n + i];
        }
        x
    }
}

/// Solve the nonsingular system `A x = b` by LU with partial pivoting plus
/// iterative refinement until `||Ax - b||_inf <= 1e-8 * (1 + ||b||_inf)`.
/// Intended for oracle/diagnostic use only.
pub fn solve_dense(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::Dimension("solve needs a square matrix".into()));
    }
    if b.len() != a.rows() {
        return Err(Error::Dimension(format!(
            "solve: {}x{} matrix with right-hand side of length {}",
            a.rows(),
            a.cols(),
            b.len()
        )));
    }
    let lu = Lu::factor(a, DEFAULT_RANK_TOL)?;
    let target = 1e-8 * (1.0 + inf_norm(b));
    let mut x = lu.solve(b);
    for _ in 0..4 {
        let r: Vec<f64> =
            a.matvec(&x)?.iter().zip(b).map(|(ax, bi)| bi - ax).collect();
        if inf_norm(&r) <= target {
            return Ok(x);
        }
        let dx = lu.solve(&r);
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
    }
    let r: Vec<f64> = a.matvec(&x)?.iter().zip(b).map(|(ax, bi)| bi - ax).collect();
    if inf_norm(&r) <= target {
        Ok(x)
    } else {
        // Refinement stalled: the system is too ill-conditioned to certify.
        Err(Error::Singular { rank: rank(a, DEFAULT_RANK_TOL), n: a.rows() })
    }
}

/// Estimate the spectral condition number (largest over smallest singular
/// value) via power iteration on `A^T A` and inverse iteration through its LU
/// factors. Accurate to well within a factor of 2 at the sizes used here.
/// Returns `+inf` for a numerically singular matrix.
pub fn condition_estimate(a: &DenseMatrix) -> f64 {
    assert!(a.is_square(), "condition estimate needs a square matrix");
    let n = a.rows();
    if n == 0 {
        return 1.0;
    }
    let at = a.transpose();
    let ata = at.matmul(a).expect("shape");
    // Deterministic start vector with components along every eigendirection
    // for generic symmetric matrices.
    let start: Vec<f64> = (0..n).map(|j| (1.7 * (j as f64 + 1.0)).sin() + 0.3).collect();

    let lam_max = {
        let mut v = normalize(&start);
        let mut lam = 0.0;
        for _ in 0..200 {
            let w = ata.matvec(&v).expect("shape");
            lam = dot(&v, &w);
            let nw = inf_norm(&w);
            if nw == 0.0 {
                return f64::INFINITY; // A = 0
            }
            v = normalize(&w);
        }
        lam.max(0.0)
    };

    let lu = match Lu::factor(&ata, 1e-14) {
        Ok(lu) => lu,
        Err(_) => return f64::INFINITY,
    };
    let lam_min = {
        let mut v = normalize(&start);
        let mut mu = 0.0;
        for _ in 0..200 {
            let w = lu.solve(&v);
            mu = dot(&v, &w); // Rayleigh quotient of (A^T A)^-1
            let nw = inf_norm(&w);
            if !nw.is_finite() || nw == 0.0 {
                return f64::INFINITY;
            }
            v = normalize(&w);
        }
        if mu <= 0.0 {
            return f64::INFINITY;
        }
        1.0 / mu
    };
    if lam_min <= 0.0 {
        return f64::INFINITY;
    }
    (lam_max / lam_min).sqrt()
}

/// Maximum absolute component.
pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Euclidean norm.
pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Dot product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &[f64]) -> Vec<f64> {
    let n = norm2(v);
    if n == 0.0 {
        return v.to_vec();
    }
    v.iter().map(|x| x / n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: usize, cols: usize, data: &[f64]) -> DenseMatrix {
        DenseMatrix::new(rows, cols, data.to_vec()).unwrap()
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(DenseMatrix::new(0, 1, vec![]).is_err());
        assert!(DenseMatrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(DenseMatrix::new(1, 1, vec![f64::NAN]).is_err());
        assert!(CharPoly::new(vec![]).is_err());
    }

    #[test]
    fn charpoly_diag_2_3() {
        let w = mat(2, 2, &[2.0, 0.0, 0.0, 3.0]);
        let cp = charpoly_oracle(&w).unwrap();
        assert_eq!(cp.coeffs(), &[6.0, -5.0]);
    }

    #[test]
    fn charpoly_identity_2() {
        let cp = charpoly_oracle(&DenseMatrix::identity(2)).unwrap();
        assert_eq!(cp.coeffs(), &[1.0, -2.0]);
    }

    #[test]
    fn charpoly_1x1() {
        let cp = charpoly_oracle(&mat(1, 1, &[4.25])).unwrap();
        assert_eq!(cp.coeffs(), &[-4.25]);
    }

    #[test]
    fn charpoly_companion_cross_check() {
        // Companion matrix of x^3 - 2x^2 - 5x + 6 = (x-1)(x+2)(x-3).
        let w = mat(3, 3, &[0.0, 0.0, -6.0, 1.0, 0.0, 5.0, 0.0, 1.0, 2.0]);
        let cp = charpoly_oracle(&w).unwrap();
        for (got, want) in cp.coeffs().iter().zip(&[6.0, -5.0, -2.0]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn charpoly_rejects_non_square() {
        assert!(charpoly_oracle(&DenseMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn cayley_hamilton_on_random_matrices() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for n in 1..=8 {
            for _ in 0..8 {
                let data: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let w = mat(n, n, &data);
                let cp = charpoly_oracle(&w).unwrap();
                // Evaluate W^n + c_(n-1) W^(n-1) + ... + c_0 I by Horner.
                let mut acc = DenseMatrix::identity(n);
                for k in (0..n).rev() {
                    acc = w.matmul(&acc).unwrap();
                    acc = acc.add_scaled(&DenseMatrix::identity(n), cp.coeffs()[k]).unwrap();
                }
                let bound = 1e-6 * w.op_inf_norm().powi(n as i32).max(1.0);
                assert!(acc.op_inf_norm() <= bound, "n={n}: {} > {}", acc.op_inf_norm(), bound);
            }
        }
    }

    #[test]
    fn krylov_identity_and_swap() {
        let k = krylov_matrix(&DenseMatrix::identity(2), &[1.0, 2.0]).unwrap();
        assert_eq!(k.entries(), &[1.0, 1.0, 2.0, 2.0]);

        let swap = mat(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let k = krylov_matrix(&swap, &[1.0, 0.0]).unwrap();
        assert_eq!(k.entries(), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn krylov_column_recurrence() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 7;
        let data: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w = mat(n, n, &data);
        let y0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let k = krylov_matrix(&w, &y0).unwrap();
        for l in 0..n - 1 {
            let next = w.matvec(&k.column(l)).unwrap();
            assert_eq!(next, k.column(l + 1), "column {}", l + 1);
        }
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank(&DenseMatrix::identity(3), 1e-10), 3);
        assert_eq!(rank(&mat(2, 2, &[1.0, 1.0, 1.0, 1.0]), 1e-10), 1);
        assert_eq!(rank(&DenseMatrix::zeros(3, 3), 1e-10), 0);
    }

    #[test]
    fn rank_complete_graph_krylov_is_deficient() {
        // Adjacency of the 3-node complete graph has a repeated eigenvalue,
        // so its Krylov matrix never reaches full rank.
        let adj = mat(3, 3, &[0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0]);
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let y0: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let k = krylov_matrix(&adj, &y0).unwrap();
            assert_eq!(rank(&k, 1e-9), 2);
        }
    }

    #[test]
    fn rank_invariant_under_row_swap_and_sign() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let n = 5;
        let data: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = mat(n, n, &data);
        let base = rank(&m, 1e-9);
        let mut swapped = m.clone();
        for j in 0..n {
            let (a, b) = (swapped.get(0, j), swapped.get(3, j));
            swapped.set(0, j, b);
            swapped.set(3, j, a);
            let v = -swapped.get(2, j);
            swapped.set(2, j, v);
        }
        assert_eq!(rank(&swapped, 1e-9), base);
    }

    #[test]
    fn solve_examples() {
        let x = solve_dense(&DenseMatrix::identity(2), &[3.0, 4.0]).unwrap();
        assert_eq!(x, vec![3.0, 4.0]);
        let a = mat(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let x = solve_dense(&a, &[2.0, 8.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0]);
    }

    #[test]
    fn solve_singular_reports_rank() {
        let a = mat(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        match solve_dense(&a, &[1.0, 1.0]) {
            Err(Error::Singular { rank, n }) => {
                assert_eq!((rank, n), (1, 2));
            }
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn solve_round_trip_random_systems() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for n in 2..=8 {
            for _ in 0..5 {
                let data: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let a = mat(n, n, &data);
                if rank(&a, DEFAULT_RANK_TOL) < n {
                    continue;
                }
                let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let x = solve_dense(&a, &b).unwrap();
                let r: Vec<f64> =
                    a.matvec(&x).unwrap().iter().zip(&b).map(|(ax, bi)| bi - ax).collect();
                assert!(inf_norm(&r) <= 1e-8 * (1.0 + inf_norm(&b)));
            }
        }
    }

    #[test]
    fn condition_estimates() {
        let c = condition_estimate(&DenseMatrix::identity(4));
        assert!(c >= 0.5 && c <= 2.0, "identity: {c}");
        let c = condition_estimate(&mat(2, 2, &[10.0, 0.0, 0.0, 0.1]));
        assert!(c >= 50.0 && c <= 200.0, "diag(10, 0.1): {c}");
        let c = condition_estimate(&mat(2, 2, &[1.0, 1.0, 1.0, 1.0]));
        assert!(c.is_infinite(), "singular: {c}");
    }
}
