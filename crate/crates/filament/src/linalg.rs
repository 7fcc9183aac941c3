//! Sparse matrices and the two linear solvers the method needs.
//!
//! The denoising system is large, symmetric positive definite and mesh-like, so
//! [`solve_spd`] runs conjugate gradients with Jacobi preconditioning. The curve
//! systems are small, banded (block tridiagonal in the node ordering) and in
//! general nonsymmetric; [`solve_general`] factors them with a banded LU with
//! partial pivoting, treating the few wrap-around entries of closed curves as a
//! low-rank correction. Every solve verifies its residual before returning.

use std::fmt;

/// Dense vector of real numbers; lengths are checked against the paired system.
pub type DenseVector = Vec<f64>;

/// Relative residual bound enforced by [`solve_general`].
pub const GENERAL_TOL: f64 = 1e-10;

/// Compressed sparse row matrix.
///
/// Built from triplets; duplicate `(row, col)` pairs are summed during
/// finalization and explicit zeros are dropped, so the stored entry set is
/// duplicate-free with all indices in range.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    ///
    /// # Panics
    /// Panics if any index is out of range.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(r, c, v) in triplets {
            assert!(r < n_rows && c < n_cols, "triplet ({r}, {c}) out of {n_rows}x{n_cols}");
            entries.push((r, c, v));
        }
        entries.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut i = 0;
        while i < entries.len() {
            let (r, c, mut v) = entries[i];
            i += 1;
            while i < entries.len() && entries[i].0 == r && entries[i].1 == c {
                v += entries[i].2;
                i += 1;
            }
            if v != 0.0 {
                row_ptr[r + 1] += 1;
                col_idx.push(c);
                values.push(v);
            }
        }
        for r in 0..n_rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseMatrix { n_rows, n_cols, row_ptr, col_idx, values }
    }

    pub fn identity(n: usize) -> Self {
        let triplets: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, n, &triplets)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Value stored at `(r, c)`, or zero.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        match self.col_idx[lo..hi].binary_search(&c) {
            Ok(k) => self.values[lo + k],
            Err(_) => 0.0,
        }
    }

    /// Iterates over stored entries as `(row, col, value)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.col_idx[k], self.values[k]))
        })
    }

    /// `y = A x`.
    ///
    /// # Panics
    /// Panics if `x` does not match the column count.
    pub fn mul_vec(&self, x: &[f64]) -> DenseVector {
        let mut y = vec![0.0; self.n_rows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols, "dimension mismatch in mul_vec");
        assert_eq!(y.len(), self.n_rows, "dimension mismatch in mul_vec");
        for r in 0..self.n_rows {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[r] = acc;
        }
    }

    pub fn diagonal(&self) -> DenseVector {
        let n = self.n_rows.min(self.n_cols);
        (0..n).map(|i| self.get(i, i)).collect()
    }

    /// `‖A x − b‖₂`.
    pub fn residual_norm(&self, x: &[f64], b: &[f64]) -> f64 {
        let ax = self.mul_vec(x);
        ax.iter().zip(b).map(|(a, bi)| (a - bi) * (a - bi)).sum::<f64>().sqrt()
    }
}

/// Failure of a linear solve.
#[derive(Debug, Clone)]
pub enum SolveError {
    /// Iteration cap reached; carries the final relative residual.
    NonConvergence { residual: f64, iterations: usize },
    /// A zero (or effectively zero) pivot was met while factoring.
    Singular { column: usize },
    /// The factorization finished but the recomputed residual exceeds the bound;
    /// the system is too ill-conditioned for the requested accuracy.
    ResidualCheck { residual: f64 },
    /// The matrix diagonal is not strictly positive, or a direction of
    /// nonpositive curvature appeared: the matrix is not positive definite.
    NotPositiveDefinite,
    /// Shape mismatch between the matrix and the right-hand side.
    Shape { detail: String },
}

impl fmt::Display for SolveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolveError::NonConvergence { residual, iterations } => {
                write!(f, "no convergence after {iterations} iterations (relative residual {residual:.3e})")
            }
            SolveError::Singular { column } => write!(f, "singular matrix (zero pivot in column {column})"),
            SolveError::ResidualCheck { residual } => {
                write!(f, "solution rejected: relative residual {residual:.3e} exceeds the bound")
            }
            SolveError::NotPositiveDefinite => write!(f, "matrix is not symmetric positive definite"),
            SolveError::Shape { detail } => write!(f, "shape mismatch: {detail}"),
        }
    }
}

impl std::error::Error for SolveError {}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` for symmetric positive definite `A` by preconditioned
/// conjugate gradients (Jacobi preconditioner), starting from zero.
///
/// Returns `x` with `‖Ax − b‖ / ‖b‖ ≤ tol` (absolute residual `≤ tol` when
/// `‖b‖ = 0`); the residual is recomputed from scratch before returning.
///
/// # Errors
/// [`SolveError::NonConvergence`] if the iteration cap `10·n` is reached,
/// [`SolveError::NotPositiveDefinite`] if a nonpositive diagonal entry or
/// curvature direction shows up, [`SolveError::Shape`] on dimension mismatch.
pub fn solve_spd(a: &SparseMatrix, b: &[f64], tol: f64) -> Result<DenseVector, SolveError> {
    let x0 = vec![0.0; b.len()];
    solve_spd_warm(a, b, tol, &x0)
}

/// [`solve_spd`] with an initial guess; the workhorse for repeated solves of
/// slowly changing systems, where warm starts save most iterations.
///
/// # Errors
/// As for [`solve_spd`].
pub fn solve_spd_warm(a: &SparseMatrix, b: &[f64], tol: f64, x0: &[f64]) -> Result<DenseVector, SolveError> {
    if a.n_rows != a.n_cols {
        return Err(SolveError::Shape { detail: format!("matrix is {}x{}", a.n_rows, a.n_cols) });
    }
    if b.len() != a.n_rows || x0.len() != a.n_rows {
        return Err(SolveError::Shape {
            detail: format!("rhs/guess length {} vs system size {}", b.len(), a.n_rows),
        });
    }
    assert!(tol > 0.0, "tolerance must be positive");
    let n = a.n_rows;
    if n == 0 {
        return Ok(Vec::new());
    }

    let bnorm = norm(b);
    let target = if bnorm > 0.0 { tol * bnorm } else { tol };
    let denom = if bnorm > 0.0 { bnorm } else { 1.0 };

    let diag = a.diagonal();
    if diag.iter().any(|&d| d <= 0.0) {
        return Err(SolveError::NotPositiveDefinite);
    }
    let minv: Vec<f64> = diag.iter().map(|&d| 1.0 / d).collect();

    let mut x = x0.to_vec();
    let mut r: Vec<f64> = {
        let ax = a.mul_vec(&x);
        b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
    };
    if norm(&r) <= target {
        return Ok(x);
    }

    let mut z: Vec<f64> = r.iter().zip(&minv).map(|(ri, mi)| ri * mi).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let cap = 10 * n;

    for it in 0..cap {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(SolveError::NotPositiveDefinite);
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        // Fight floating-point drift of the recurred residual on long runs.
        if it % 64 == 63 {
            a.mul_vec_into(&x, &mut ap);
            for i in 0..n {
                r[i] = b[i] - ap[i];
            }
        }
        if norm(&r) <= target {
            // Accept only against the recomputed residual; restart otherwise.
            a.mul_vec_into(&x, &mut ap);
            for i in 0..n {
                r[i] = b[i] - ap[i];
            }
            if norm(&r) <= target {
                return Ok(x);
            }
        }
        for i in 0..n {
            z[i] = r[i] * minv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(SolveError::NonConvergence { residual: norm(&r) / denom, iterations: cap })
}

/// Banded LU factorization with partial pivoting.
///
/// Storage follows the usual band layout: entry `(i, j)` with
/// `−(ku + kl) ≤ i − j ≤ kl` lives at `ab[(i − j + ku + kl) * n + j]`; the extra
/// `kl` superdiagonals hold pivoting fill.
struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandLu {
    fn band_rows(kl: usize, ku: usize) -> usize {
        2 * kl + ku + 1
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        (i + self.ku + self.kl - j) * self.n + j
    }

    /// Factors the entries of `a` assuming all of them fit in the declared band.
    fn factor(n: usize, kl: usize, ku: usize, entries: &[(usize, usize, f64)]) -> Result<Self, SolveError> {
        let mut lu = BandLu {
            n,
            kl,
            ku,
            ab: vec![0.0; Self::band_rows(kl, ku) * n],
            ipiv: vec![0; n],
        };
        for &(i, j, v) in entries {
            let k = lu.idx(i, j);
            lu.ab[k] = v;
        }

        for k in 0..n {
            let i_max = (k + kl).min(n - 1);
            // Partial pivot: largest magnitude in column k among rows k..=i_max.
            let mut p = k;
            let mut best = lu.ab[lu.idx(k, k)].abs();
            for i in (k + 1)..=i_max {
                let v = lu.ab[lu.idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(SolveError::Singular { column: k });
            }
            lu.ipiv[k] = p;
            let j_max = (k + ku + kl).min(n - 1);
            if p != k {
                for j in k..=j_max {
                    let a = lu.idx(k, j);
                    let b = lu.idx(p, j);
                    lu.ab.swap(a, b);
                }
            }
            let pivot = lu.ab[lu.idx(k, k)];
            for i in (k + 1)..=i_max {
                let m = lu.ab[lu.idx(i, k)] / pivot;
                let mi = lu.idx(i, k);
                lu.ab[mi] = m;
                if m != 0.0 {
                    for j in (k + 1)..=j_max {
                        let kj = lu.ab[lu.idx(k, j)];
                        if kj != 0.0 {
                            let ij = lu.idx(i, j);
                            lu.ab[ij] -= m * kj;
                        }
                    }
                }
            }
        }
        Ok(lu)
    }

    fn solve(&self, b: &[f64]) -> DenseVector {
        let n = self.n;
        let mut y = b.to_vec();
        for k in 0..n {
            let p = self.ipiv[k];
            if p != k {
                y.swap(k, p);
            }
            let yk = y[k];
            if yk != 0.0 {
                let i_max = (k + self.kl).min(n - 1);
                for i in (k + 1)..=i_max {
                    y[i] -= self.ab[self.idx(i, k)] * yk;
                }
            }
        }
        for k in (0..n).rev() {
            let j_max = (k + self.ku + self.kl).min(n - 1);
            let mut acc = y[k];
            for j in (k + 1)..=j_max {
                acc -= self.ab[self.idx(k, j)] * y[j];
            }
            y[k] = acc / self.ab[self.idx(k, k)];
        }
        y
    }
}

/// Dense LU with partial pivoting used for the tiny Woodbury capacitance system.
fn dense_solve_small(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>, SolveError> {
    let n = b.len();
    for k in 0..n {
        let mut p = k;
        let mut best = m[k][k].abs();
        for i in (k + 1)..n {
            if m[i][k].abs() > best {
                best = m[i][k].abs();
                p = i;
            }
        }
        if best == 0.0 {
            return Err(SolveError::Singular { column: k });
        }
        m.swap(k, p);
        b.swap(k, p);
        for i in (k + 1)..n {
            let f = m[i][k] / m[k][k];
            if f != 0.0 {
                for j in k..n {
                    let mkj = m[k][j];
                    m[i][j] -= f * mkj;
                }
                b[i] -= f * b[k];
            }
        }
    }
    for k in (0..n).rev() {
        let mut acc = b[k];
        for j in (k + 1)..n {
            acc -= m[k][j] * b[j];
        }
        b[k] = acc / m[k][k];
    }
    Ok(b)
}

/// Most entries outside this many outliers determine the band actually factored;
/// the outliers (e.g. the wrap-around couplings of a closed curve) are folded
/// back in through a rank-one-per-column correction.
const MAX_BAND_OUTLIERS: usize = 16;

/// Solves `A x = b` for square nonsingular `A` by direct elimination.
///
/// The solver detects banded structure and factors within the band; a handful
/// of far-off-band entries are handled as a low-rank correction, and everything
/// else falls back to a full-width band (dense) factorization. Returns `x` with
/// `‖Ax − b‖ / ‖b‖ ≤ 1e-10`, verified by recomputation.
///
/// # Errors
/// [`SolveError::Singular`] on a zero pivot, [`SolveError::ResidualCheck`] if
/// the verified residual exceeds the bound (ill-conditioning), and
/// [`SolveError::Shape`] on dimension mismatch.
pub fn solve_general(a: &SparseMatrix, b: &[f64]) -> Result<DenseVector, SolveError> {
    if a.n_rows != a.n_cols {
        return Err(SolveError::Shape { detail: format!("matrix is {}x{}", a.n_rows, a.n_cols) });
    }
    if b.len() != a.n_rows {
        return Err(SolveError::Shape {
            detail: format!("rhs length {} vs system size {}", b.len(), a.n_rows),
        });
    }
    let n = a.n_rows;
    if n == 0 {
        return Ok(Vec::new());
    }
    let bnorm = norm(b);

    let entries: Vec<(usize, usize, f64)> = a.entries().collect();

    // Band histogram: smallest band that leaves at most MAX_BAND_OUTLIERS
    // entries outside it.
    let full_band = entries.iter().map(|&(i, j, _)| i.abs_diff(j)).max().unwrap_or(0);
    let mut counts = vec![0usize; full_band + 1];
    for &(i, j, _) in &entries {
        counts[i.abs_diff(j)] += 1;
    }
    let mut slim_band = full_band;
    let mut outside = 0usize;
    while slim_band > 0 && outside + counts[slim_band] <= MAX_BAND_OUTLIERS {
        outside += counts[slim_band];
        slim_band -= 1;
    }

    // Prefer the slim band with a low-rank correction when it pays; the
    // correction requires the banded part itself to be invertible, so any
    // failure (or a rejected residual) falls back to the full-width band.
    let use_woodbury = outside > 0 && slim_band < full_band && slim_band <= n / 4;
    let mut last = None;
    let mut bands = Vec::new();
    if use_woodbury {
        bands.push(slim_band);
    }
    bands.push(full_band);
    for band in bands {
        match solve_with_band(&entries, n, band, b) {
            Ok(x) => {
                let res = a.residual_norm(&x, b);
                let rel = if bnorm > 0.0 { res / bnorm } else { res };
                if rel <= GENERAL_TOL {
                    return Ok(x);
                }
                last = Some(SolveError::ResidualCheck { residual: rel });
            }
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one factorization attempt runs"))
}

/// One elimination attempt: factor the entries within `band` and fold the rest
/// back in by a Sherman–Morrison–Woodbury correction, `A = B + Σ_c u_c e_cᵀ`
/// with `u_c` collecting the out-of-band entries of column `c`.
fn solve_with_band(
    entries: &[(usize, usize, f64)],
    n: usize,
    band: usize,
    b: &[f64],
) -> Result<DenseVector, SolveError> {
    let (inside, outliers): (Vec<_>, Vec<_>) =
        entries.iter().partition(|&&(i, j, _)| i.abs_diff(j) <= band);

    let lu = BandLu::factor(n, band, band, &inside)?;
    if outliers.is_empty() {
        return Ok(lu.solve(b));
    }

    let mut cols: Vec<usize> = outliers.iter().map(|&(_, j, _)| j).collect();
    cols.sort_unstable();
    cols.dedup();
    let k = cols.len();
    let y = lu.solve(b);
    let mut w: Vec<DenseVector> = Vec::with_capacity(k);
    for &c in &cols {
        let mut u = vec![0.0; n];
        for &(i, j, v) in &outliers {
            if j == c {
                u[i] += v;
            }
        }
        w.push(lu.solve(&u));
    }
    let mut cap = vec![vec![0.0; k]; k];
    let mut rhs = vec![0.0; k];
    for r in 0..k {
        for s in 0..k {
            cap[r][s] = w[s][cols[r]] + if r == s { 1.0 } else { 0.0 };
        }
        rhs[r] = y[cols[r]];
    }
    let t = dense_solve_small(cap, rhs)?;
    let mut x = y;
    for s in 0..k {
        let ts = t[s];
        if ts != 0.0 {
            for i in 0..n {
                x[i] -= w[s][i] * ts;
            }
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_core::{RngCore, SeedableRng};

    /// Dense Gaussian elimination with partial pivoting, used as the oracle.
    fn dense_oracle(a: &SparseMatrix, b: &[f64]) -> Vec<f64> {
        let n = a.n_rows();
        let mut m = vec![vec![0.0; n]; n];
        for (i, j, v) in a.entries() {
            m[i][j] = v;
        }
        dense_solve_small(m, b.to_vec()).expect("oracle factorization failed")
    }

    fn uniform(rng: &mut impl RngCore) -> f64 {
        (rng.next_u64() >> 11) as f64 * 2f64.powi(-53)
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn from_triplets_sums_duplicates_and_drops_zeros() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, 3.0), (1, 0, -3.0)]);
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.get(1, 0), 0.0);
        assert_eq!(a.nnz(), 1, "cancelled entry should not be stored");
    }

    #[test]
    fn spd_identity_case() {
        let a = SparseMatrix::identity(3);
        let x = solve_spd(&a, &[1.0, 2.0, 3.0], 1e-12).unwrap();
        assert_eq!(x, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn spd_diagonal_case() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (1, 1, 4.0)]);
        let x = solve_spd(&a, &[2.0, 8.0], 1e-12).unwrap();
        assert!(max_abs_diff(&x, &[1.0, 2.0]) < 1e-12, "got {x:?}");
    }

    /// 5-point Laplacian plus a mass term on a 4x4 node grid, random rhs,
    /// checked against dense elimination.
    #[test]
    fn spd_laplacian_matches_dense_oracle() {
        let n = 4;
        let idx = |i: usize, j: usize| j * n + i;
        let lambda = 0.37;
        let mut t = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let mut diag = lambda;
                let mut link = |other: usize, t: &mut Vec<(usize, usize, f64)>| {
                    t.push((idx(i, j), other, -1.0));
                    diag += 1.0;
                };
                if i > 0 {
                    link(idx(i - 1, j), &mut t);
                }
                if i + 1 < n {
                    link(idx(i + 1, j), &mut t);
                }
                if j > 0 {
                    link(idx(i, j - 1), &mut t);
                }
                if j + 1 < n {
                    link(idx(i, j + 1), &mut t);
                }
                t.push((idx(i, j), idx(i, j), diag));
            }
        }
        let a = SparseMatrix::from_triplets(16, 16, &t);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let b: Vec<f64> = (0..16).map(|_| uniform(&mut rng) - 0.5).collect();

        let x = solve_spd(&a, &b, 1e-12).unwrap();
        let oracle = dense_oracle(&a, &b);
        assert!(
            a.residual_norm(&x, &b) <= 1e-12 * norm(&b),
            "residual {} too large",
            a.residual_norm(&x, &b)
        );
        assert!(max_abs_diff(&x, &oracle) < 1e-9, "cg vs dense oracle differ by {}", max_abs_diff(&x, &oracle));
    }

    #[test]
    fn spd_rejects_indefinite_diagonal() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, -1.0), (1, 1, 1.0)]);
        assert!(matches!(solve_spd(&a, &[1.0, 1.0], 1e-10), Err(SolveError::NotPositiveDefinite)));
    }

    #[test]
    fn general_identity_and_permutation() {
        let a = SparseMatrix::identity(2);
        assert_eq!(solve_general(&a, &[5.0, -1.0]).unwrap(), vec![5.0, -1.0]);

        let p = SparseMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 1.0)]);
        let x = solve_general(&p, &[3.0, 4.0]).unwrap();
        assert!(max_abs_diff(&x, &[4.0, 3.0]) < 1e-14, "got {x:?}");
    }

    #[test]
    fn general_random_sparse_matches_dense_oracle() {
        let n = 20;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let mut t = Vec::new();
        for i in 0..n {
            let mut off_sum = 0.0;
            for _ in 0..3 {
                let j = (rng.next_u64() as usize) % n;
                if j != i {
                    let v = uniform(&mut rng) * 2.0 - 1.0;
                    t.push((i, j, v));
                    off_sum += v.abs();
                }
            }
            // Strict diagonal dominance keeps the system comfortably nonsingular.
            t.push((i, i, off_sum + 1.0 + uniform(&mut rng)));
        }
        let a = SparseMatrix::from_triplets(n, n, &t);
        let b: Vec<f64> = (0..n).map(|_| uniform(&mut rng) * 2.0 - 1.0).collect();

        let x = solve_general(&a, &b).unwrap();
        let oracle = dense_oracle(&a, &b);
        assert!(max_abs_diff(&x, &oracle) < 1e-10, "band solver vs dense oracle differ by {}", max_abs_diff(&x, &oracle));
    }

    #[test]
    fn general_periodic_tridiagonal_uses_low_rank_path_correctly() {
        // Cyclic system shaped exactly like a closed-curve step matrix: a band
        // plus four wrap entries in the far corners.
        let n = 40;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0 + (i as f64) * 0.01));
            t.push((i, (i + 1) % n, -1.0));
            t.push(((i + 1) % n, i, -1.3));
        }
        let a = SparseMatrix::from_triplets(n, n, &t);
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let x = solve_general(&a, &b).unwrap();
        let oracle = dense_oracle(&a, &b);
        assert!(max_abs_diff(&x, &oracle) < 1e-10, "woodbury path differs from oracle by {}", max_abs_diff(&x, &oracle));
    }

    #[test]
    fn general_reports_singular() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 2.0)]);
        assert!(matches!(solve_general(&a, &[1.0, 1.0]), Err(SolveError::Singular { .. })));
    }

    #[test]
    fn solvers_agree_on_spd_system() {
        let n = 30;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let a = SparseMatrix::from_triplets(n, n, &t);
        let b: Vec<f64> = (0..n).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let via_cg = solve_spd(&a, &b, 1e-12).unwrap();
        let via_lu = solve_general(&a, &b).unwrap();
        assert!(
            max_abs_diff(&via_cg, &via_lu) < 1e-8,
            "solve_spd and solve_general disagree by {}",
            max_abs_diff(&via_cg, &via_lu)
        );
    }

    #[test]
    fn warm_start_reuses_previous_solution() {
        let n = 50;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 3.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let a = SparseMatrix::from_triplets(n, n, &t);
        let b: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let x = solve_spd(&a, &b, 1e-12).unwrap();
        // Solving again from the answer itself must return immediately with it.
        let again = solve_spd_warm(&a, &b, 1e-12, &x).unwrap();
        assert_eq!(x, again);
    }
}
