//! Dense real matrix kernel.
//!
//! Everything here works on small dense matrices stored row-major. The
//! operations the rest of the crate leans on are the matrix exponential
//! (scaling and squaring), a cyclic Jacobi eigensolver for symmetric
//! matrices, null vectors of Laplacians, stationary distributions of
//! row-stochastic matrices and the leader-matrix embedding.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::graph::{self, ClusterPartition};

/// Tolerance used when checking that a matrix is row-stochastic.
pub const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square: {rows} x {cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("null space has dimension {0}, expected exactly 1")]
    NullMultiplicity(usize),
    #[error("matrix is not row-stochastic (row {row} sums to {sum}, min entry {min})")]
    NotStochastic { row: usize, sum: f64, min: f64 },
    #[error("matrix is reducible: stationary distribution is not unique")]
    Reducible,
    #[error("ragged rows: row {row} has {len} entries, expected {expected}")]
    Ragged { row: usize, len: usize, expected: usize },
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Dense row-major matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data, rejecting non-finite entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch { expected: rows * cols, found: data.len() });
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite { row: k / cols.max(1), col: k % cols.max(1) });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != c {
                return Err(LinalgError::Ragged { row: i, len: row.len(), expected: c });
            }
            data.extend_from_slice(row);
        }
        Self::from_row_major(r, c, data)
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
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

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, other: &Matrix) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch in add");
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &Matrix) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch in sub");
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    pub fn matmul(&self, other: &Matrix) -> Self {
        assert_eq!(self.cols, other.rows, "shape mismatch in matmul");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len(), "shape mismatch in matvec");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// Computes `xᵀ A` as a vector.
    pub fn vecmat(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, x.len(), "shape mismatch in vecmat");
        let mut out = vec![0.0; self.cols];
        for (i, xi) in x.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += xi * a;
            }
        }
        out
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.matvec(x))
    }

    /// Induced infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.sub(other).max_abs()
    }

    pub fn symmetrized(&self) -> Self {
        self.add(&self.transpose()).scale(0.5)
    }

    pub fn asymmetry(&self) -> f64 {
        self.max_abs_diff(&self.transpose())
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn block_diagonal(blocks: &[Matrix]) -> Self {
        let n: usize = blocks.iter().map(|b| b.rows).sum();
        let c: usize = blocks.iter().map(|b| b.cols).sum();
        let mut out = Self::zeros(n, c);
        let (mut r0, mut c0) = (0, 0);
        for b in blocks {
            out.set_block(r0, c0, b);
            r0 += b.rows;
            c0 += b.cols;
        }
        out
    }

    /// Assembles `[[a, b], [c, d]]`.
    pub fn block2x2(a: &Matrix, b: &Matrix, c: &Matrix, d: &Matrix) -> Self {
        assert_eq!(a.rows, b.rows);
        assert_eq!(c.rows, d.rows);
        assert_eq!(a.cols, c.cols);
        assert_eq!(b.cols, d.cols);
        let mut out = Self::zeros(a.rows + c.rows, a.cols + b.cols);
        out.set_block(0, 0, a);
        out.set_block(0, a.cols, b);
        out.set_block(a.rows, 0, c);
        out.set_block(a.rows, a.cols, d);
        out
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &Matrix) {
        for i in 0..b.rows {
            for j in 0..b.cols {
                self[(r0 + i, c0 + j)] = b[(i, j)];
            }
        }
    }

    fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(k) => Err(LinalgError::NonFinite { row: k / self.cols, col: k % self.cols }),
            None => Ok(()),
        }
    }

    fn check_square(&self) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(LinalgError::NotSquare { rows: self.rows, cols: self.cols })
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for v in self.row(i) {
                write!(f, "{v:>12.6} ")?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        Matrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Computes `e^{A t}` by scaling and squaring.
///
/// `A t` is scaled by `2^-s` until its infinity norm is at most 0.5, the
/// exponential of the scaled matrix is taken from its degree-13 Taylor
/// polynomial (truncation error below 1e-16 at that norm), and the result is
/// squared back `s` times.
pub fn mat_exp(a: &Matrix, t: f64) -> Result<Matrix> {
    a.check_square()?;
    a.check_finite()?;
    if !t.is_finite() {
        return Err(LinalgError::NonFinite { row: 0, col: 0 });
    }
    if t < 0.0 {
        return Err(LinalgError::NegativeTime(t));
    }
    let n = a.rows;
    let at = a.scale(t);
    let norm = at.norm_inf();
    let mut squarings = 0u32;
    if norm > 0.5 {
        squarings = (norm / 0.5).log2().ceil() as u32;
        // guard against log2 landing a hair below the integer
        while norm / 2f64.powi(squarings as i32) > 0.5 {
            squarings += 1;
        }
    }
    let x = at.scale(2f64.powi(-(squarings as i32)));

    const DEGREE: usize = 13;
    let mut coeffs = [1.0; DEGREE + 1];
    for k in 1..=DEGREE {
        coeffs[k] = coeffs[k - 1] / k as f64;
    }
    // Horner: I + X(c1 I + X(c2 I + ...))
    let mut acc = Matrix::identity(n).scale(coeffs[DEGREE]);
    for k in (0..DEGREE).rev() {
        acc = x.matmul(&acc);
        for i in 0..n {
            acc[(i, i)] += coeffs[k];
        }
    }
    for _ in 0..squarings {
        acc = acc.matmul(&acc);
    }
    Ok(acc)
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, ordered like `values`.
    pub vectors: Matrix,
}

impl SymEigen {
    pub fn vector(&self, k: usize) -> Vec<f64> {
        self.vectors.column(k)
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(f64::NAN)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(f64::NAN)
    }
}

/// Cyclic Jacobi eigensolver. The input is symmetrized as `(M + Mᵀ)/2` first.
pub fn sym_eig(m: &Matrix) -> Result<SymEigen> {
    m.check_square()?;
    m.check_finite()?;
    let n = m.rows;
    let mut a = m.symmetrized();
    let mut v = Matrix::identity(n);
    let scale = a.max_abs();
    if n > 1 && scale > 0.0 {
        for _sweep in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[(i, j)] * a[(i, j)])
                .sum();
            if off.sqrt() <= 1e-15 * scale {
                break;
            }
            for p in 0..n - 1 {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    if apq.abs() <= f64::MIN_POSITIVE {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    // A <- Jᵀ A J applied to rows/cols p, q
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, dst)] = v[(k, src)];
        }
    }
    Ok(SymEigen { values, vectors })
}

/// LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
}

impl Lu {
    pub fn new(a: &Matrix) -> Result<Self> {
        a.check_square()?;
        a.check_finite()?;
        let n = a.rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let tol = 1e-14 * a.norm_inf().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let (piv, pval) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pval <= tol {
                return Err(LinalgError::Singular);
            }
            if piv != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(piv, j)];
                    lu[(piv, j)] = tmp;
                }
                perm.swap(k, piv);
            }
            let d = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        lu[(i, j)] -= f * lu[(k, j)];
                    }
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.lu.rows;
        if b.len() != n {
            return Err(LinalgError::DimensionMismatch { expected: n, found: b.len() });
        }
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                y[i] -= self.lu[(i, j)] * y[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                y[i] -= self.lu[(i, j)] * y[j];
            }
            y[i] /= self.lu[(i, i)];
        }
        Ok(y)
    }
}

/// Solves `A x = b`.
pub fn solve_linear(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    Lu::new(a)?.solve(b)
}

/// Inverse of `A`; fails when the condition estimate exceeds 1e12.
pub fn inverse(a: &Matrix) -> Result<Matrix> {
    let lu = Lu::new(a)?;
    let n = a.rows;
    let mut inv = Matrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        let col = lu.solve(&e)?;
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    if a.norm_inf() * inv.norm_inf() > 1e12 {
        return Err(LinalgError::Singular);
    }
    Ok(inv)
}

/// Numerical rank by Gaussian elimination with full pivoting.
pub fn rank(a: &Matrix, rel_tol: f64) -> usize {
    let mut m = a.clone();
    let (r, c) = (m.rows, m.cols);
    let tol = rel_tol * m.max_abs().max(f64::MIN_POSITIVE);
    let mut rank = 0;
    for k in 0..r.min(c) {
        let mut best = (k, k, 0.0);
        for i in k..r {
            for j in k..c {
                if m[(i, j)].abs() > best.2 {
                    best = (i, j, m[(i, j)].abs());
                }
            }
        }
        if best.2 <= tol {
            break;
        }
        let (pi, pj, _) = best;
        for j in 0..c {
            let t = m[(k, j)];
            m[(k, j)] = m[(pi, j)];
            m[(pi, j)] = t;
        }
        for i in 0..r {
            let t = m[(i, k)];
            m[(i, k)] = m[(i, pj)];
            m[(i, pj)] = t;
        }
        for i in k + 1..r {
            let f = m[(i, k)] / m[(k, k)];
            for j in k..c {
                m[(i, j)] -= f * m[(k, j)];
            }
        }
        rank += 1;
    }
    rank
}

/// Vector `r` with `rᵀ L = 0`, `Σ r = 1`, for a Laplacian `L` whose left null
/// space is one-dimensional.
pub fn left_null_vector(l: &Matrix) -> Result<Vec<f64>> {
    l.check_square()?;
    l.check_finite()?;
    let n = l.rows;
    if n == 0 {
        return Err(LinalgError::NullMultiplicity(0));
    }
    let lt = l.transpose();
    let nullity = n - rank(&lt, 1e-10);
    if nullity != 1 {
        return Err(LinalgError::NullMultiplicity(nullity));
    }
    // rows of Lᵀ are dependent (they sum to L·1 = 0), so swap one for Σ r = 1
    let mut a = lt;
    let mut b = vec![0.0; n];
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    b[n - 1] = 1.0;
    let mut r = solve_linear(&a, &b)?;
    for v in &mut r {
        if *v < 0.0 && *v > -1e-12 {
            *v = 0.0;
        }
    }
    Ok(r)
}

/// Checks row-stochasticity within `tol`.
pub fn check_stochastic(p: &Matrix, tol: f64) -> Result<()> {
    p.check_square()?;
    p.check_finite()?;
    for i in 0..p.rows {
        let row = p.row(i);
        let sum: f64 = row.iter().sum();
        let min = row.iter().copied().fold(f64::INFINITY, f64::min);
        if (sum - 1.0).abs() > tol || min < -tol {
            return Err(LinalgError::NotStochastic { row: i, sum, min });
        }
    }
    Ok(())
}

/// Stationary distribution `φ` of an irreducible row-stochastic matrix:
/// `φᵀ P = φᵀ`, `Σ φ = 1`.
pub fn stationary_distribution(p: &Matrix) -> Result<Vec<f64>> {
    check_stochastic(p, 1e-10)?;
    let g = graph::matrix_graph(p, graph::DEFAULT_THRESHOLD)
        .expect("stochastic matrices have no significantly negative entries");
    if !graph::is_strongly_connected(&g) {
        return Err(LinalgError::Reducible);
    }
    let generator = Matrix::identity(p.rows).sub(p);
    left_null_vector(&generator)
}

/// Embeds an `m x m` leader interaction matrix into an `N x N` jump matrix:
/// the row of leader `l_τ` carries `P_l(τ, g)` on the column of leader `l_g`,
/// every other row is an identity row.
pub fn embed_leader_matrix(p_l: &Matrix, partition: &ClusterPartition) -> Result<Matrix> {
    let m = partition.cluster_count();
    p_l.check_square()?;
    if p_l.rows != m {
        return Err(LinalgError::DimensionMismatch { expected: m, found: p_l.rows });
    }
    check_stochastic(p_l, 1e-10)?;
    let n = partition.node_count();
    let mut pe = Matrix::identity(n);
    let leaders = partition.leaders();
    for (tau, &lt) in leaders.iter().enumerate() {
        pe[(lt, lt)] = 0.0;
        for (g, &lg) in leaders.iter().enumerate() {
            pe[(lt, lg)] += p_l[(tau, g)];
        }
    }
    Ok(pe)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn exp_at_zero_is_identity() {
        let a = m(&[&[1.0, 2.0], &[3.0, -4.0]]);
        assert_eq!(mat_exp(&a, 0.0).unwrap(), Matrix::identity(2));
    }

    #[test]
    fn exp_of_two_node_laplacian_matches_closed_form() {
        let neg_l = m(&[&[-1.0, 1.0], &[1.0, -1.0]]);
        for &t in &[0.1, 0.7, 3.0, 20.0] {
            let e = mat_exp(&neg_l, t).unwrap();
            let d = (-2.0f64 * t).exp();
            let expect = m(&[&[(1.0 + d) / 2.0, (1.0 - d) / 2.0], &[(1.0 - d) / 2.0, (1.0 + d) / 2.0]]);
            assert!(e.max_abs_diff(&expect) < 1e-14, "t={t}");
        }
    }

    #[test]
    fn exp_rejects_bad_input() {
        assert!(matches!(mat_exp(&Matrix::zeros(2, 3), 1.0), Err(LinalgError::NotSquare { .. })));
        assert!(matches!(mat_exp(&Matrix::identity(2), -1.0), Err(LinalgError::NegativeTime(_))));
        let mut a = Matrix::identity(2);
        a[(1, 0)] = f64::NAN;
        assert!(matches!(mat_exp(&a, 1.0), Err(LinalgError::NonFinite { row: 1, col: 0 })));
    }

    #[test]
    fn exp_large_norm_against_diagonal() {
        // diagonal matrices have an exact exponential; ‖At‖ = 50
        let a = Matrix::diagonal(&[-50.0, -10.0, 0.0, 3.0]);
        let e = mat_exp(&a, 1.0).unwrap();
        for (i, d) in [-50.0f64, -10.0, 0.0, 3.0].iter().enumerate() {
            let want = d.exp();
            assert!(((e[(i, i)] - want) / want).abs() < 1e-12);
        }
    }

    #[test]
    fn eig_identity_and_two_by_two() {
        let e = sym_eig(&Matrix::identity(3)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0, 1.0]);
        let e = sym_eig(&m(&[&[1.0, -1.0], &[-1.0, 1.0]])).unwrap();
        assert!(e.values[0].abs() < 1e-15 && (e.values[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn lu_solve_and_inverse() {
        let x = solve_linear(&m(&[&[2.0, 0.0], &[0.0, 4.0]]), &[2.0, 8.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0]);
        assert_eq!(solve_linear(&Matrix::identity(3), &[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(solve_linear(&m(&[&[1.0, 2.0], &[2.0, 4.0]]), &[1.0, 1.0]), Err(LinalgError::Singular));
        let a = m(&[&[4.0, 1.0], &[2.0, 3.0]]);
        let inv = inverse(&a).unwrap();
        assert!(a.matmul(&inv).max_abs_diff(&Matrix::identity(2)) < 1e-15);
        assert_eq!(inverse(&m(&[&[1.0, 1.0], &[1.0, 1.0 + 1e-15]])), Err(LinalgError::Singular));
    }

    #[test]
    fn stationary_two_state_balance() {
        let phi = stationary_distribution(&m(&[&[0.9, 0.1], &[0.3, 0.7]])).unwrap();
        assert!(max_abs_diff(&phi, &[0.75, 0.25]) < 1e-14);
    }

    #[test]
    fn stationary_of_doubly_stochastic_is_uniform() {
        let p = m(&[&[0.2, 0.5, 0.3], &[0.3, 0.2, 0.5], &[0.5, 0.3, 0.2]]);
        let phi = stationary_distribution(&p).unwrap();
        assert!(phi.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-14));
    }

    #[test]
    fn stationary_rejects_bad_matrices() {
        assert!(matches!(
            stationary_distribution(&m(&[&[0.9, 0.0], &[0.3, 0.7]])),
            Err(LinalgError::NotStochastic { row: 0, .. })
        ));
        assert_eq!(stationary_distribution(&Matrix::identity(2)), Err(LinalgError::Reducible));
        assert_eq!(
            stationary_distribution(&m(&[&[1.0, 0.0], &[0.5, 0.5]])),
            Err(LinalgError::Reducible)
        );
    }

    #[test]
    fn null_vector_multiplicity_error() {
        // two isolated nodes: L = 0
        assert_eq!(left_null_vector(&Matrix::zeros(2, 2)), Err(LinalgError::NullMultiplicity(2)));
    }

    #[test]
    fn symmetric_laplacian_has_uniform_null_vector() {
        // path 0 - 1 - 2 - 3 undirected
        let l = m(&[
            &[1.0, -1.0, 0.0, 0.0],
            &[-1.0, 2.0, -1.0, 0.0],
            &[0.0, -1.0, 2.0, -1.0],
            &[0.0, 0.0, -1.0, 1.0],
        ]);
        let r = left_null_vector(&l).unwrap();
        assert!(r.iter().all(|v| (v - 0.25).abs() < 1e-14));
    }

    #[test]
    fn matrix_serde_uses_nested_rows() {
        let a = m(&[&[1.0, 2.0], &[3.0, 4.5]]);
        let s = serde_json::to_string(&a).unwrap();
        assert_eq!(s, "[[1.0,2.0],[3.0,4.5]]");
        let back: Matrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, a);
        assert!(serde_json::from_str::<Matrix>("[[1.0],[2.0,3.0]]").is_err());
    }
}
