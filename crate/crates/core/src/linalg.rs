//! Dense row-major matrices and the handful of kernels the estimator needs.

use std::io::{BufRead, Write};
use std::ops::Deref;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};

/// Relative tolerance used when checking that an input is symmetric.
pub const SYMMETRY_TOL: f64 = 1e-8;

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(order: usize) -> Self {
        let mut m = Self::zeros(order, order);
        for i in 0..order {
            m.data[i * order + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, got: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(n * d);
        for r in rows {
            let r = r.as_ref();
            if r.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: n, cols: d, data })
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in diag.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn scaled(&self, c: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * c).collect() }
    }

    pub fn is_diagonal(&self) -> bool {
        self.rows == self.cols && (0..self.rows).all(|i| (0..self.cols).all(|j| i == j || self.get(i, j) == 0.0))
    }

    /// `self * rhs`. Rows of the result are computed independently, so the
    /// output does not depend on the thread count.
    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch { expected: self.cols, got: rhs.rows });
        }
        let (m, p) = (self.cols, rhs.cols);
        let mut out = vec![0.0; self.rows * p];
        out.par_chunks_mut(p.max(1)).enumerate().for_each(|(i, out_row)| {
            let a_row = &self.data[i * m..(i + 1) * m];
            for (k, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let b_row = &rhs.data[k * p..(k + 1) * p];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        });
        let out = Matrix { rows: self.rows, cols: p, data: out };
        if !out.is_finite() {
            return Err(Error::NonFinite("matrix product"));
        }
        Ok(out)
    }
}

/// The n x d sample matrix: one observation per row.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix(Matrix);

impl DataMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        if m.rows == 0 || m.cols == 0 {
            return Err(invalid(format!("data matrix must be non-empty, got {}x{}", m.rows, m.cols)));
        }
        if !m.is_finite() {
            return Err(Error::NonFinite("data matrix"));
        }
        Ok(Self(m))
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    /// Number of samples.
    pub fn n(&self) -> usize {
        self.0.rows
    }

    /// Dimension.
    pub fn d(&self) -> usize {
        self.0.cols
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn scaled(&self, c: f64) -> Result<DataMatrix> {
        DataMatrix::new(self.0.scaled(c))
    }
}

impl Deref for DataMatrix {
    type Target = Matrix;
    fn deref(&self) -> &Matrix {
        &self.0
    }
}

/// A square dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix(Matrix);

impl SquareMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        if m.rows != m.cols {
            return Err(Error::DimensionMismatch { expected: m.rows, got: m.cols });
        }
        if !m.is_finite() {
            return Err(Error::NonFinite("square matrix"));
        }
        Ok(Self(m))
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn identity(order: usize) -> Self {
        Self(Matrix::identity(order))
    }

    pub fn order(&self) -> usize {
        self.0.rows
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        (0..self.order()).map(|i| self.get(i, i)).sum()
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        self.check_symmetric(rel_tol).is_ok()
    }

    fn check_symmetric(&self, rel_tol: f64) -> Result<()> {
        let tol = rel_tol * self.max_abs().max(f64::MIN_POSITIVE);
        let n = self.order();
        for i in 0..n {
            for j in i + 1..n {
                let diff = (self.get(i, j) - self.get(j, i)).abs();
                if diff > tol {
                    return Err(Error::NotSymmetric { row: i, col: j, diff });
                }
            }
        }
        Ok(())
    }
}

impl Deref for SquareMatrix {
    type Target = Matrix;
    fn deref(&self) -> &Matrix {
        &self.0
    }
}

/// `A = Y Yᵀ`, the n x n matrix of inner products between samples.
pub fn gram(y: &DataMatrix) -> Result<SquareMatrix> {
    let n = y.n();
    let mut a = vec![0.0; n * n];
    a.par_chunks_mut(n).enumerate().for_each(|(i, a_row)| {
        let ri = y.row(i);
        for (j, slot) in a_row.iter_mut().enumerate().skip(i) {
            *slot = dot(ri, y.row(j));
        }
    });
    for i in 0..n {
        for j in 0..i {
            a[i * n + j] = a[j * n + i];
        }
    }
    let a = Matrix { rows: n, cols: n, data: a };
    if !a.is_finite() {
        return Err(Error::NonFinite("gram"));
    }
    Ok(SquareMatrix(a))
}

/// `YᵀY`, the d x d scatter matrix.
pub fn scatter(y: &DataMatrix) -> Result<SquareMatrix> {
    SquareMatrix::new(y.transpose().matmul(y.matrix())?)
}

/// Keeps the entries strictly above the diagonal and zeroes the rest.
pub fn strict_upper(a: &SquareMatrix) -> SquareMatrix {
    let n = a.order();
    let mut g = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            g.data[i * n + j] = a.get(i, j);
        }
    }
    SquareMatrix(g)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(a: &SquareMatrix) -> Result<Vec<f64>> {
    a.check_symmetric(SYMMETRY_TOL)?;
    let (vals, _) = tridiag_eigen(a, false)?;
    Ok(vals)
}

/// Eigenvalues (ascending) and the orthogonal matrix whose columns are the
/// matching eigenvectors.
pub fn sym_eigen(a: &SquareMatrix) -> Result<(Vec<f64>, SquareMatrix)> {
    a.check_symmetric(SYMMETRY_TOL)?;
    let (vals, vecs) = tridiag_eigen(a, true)?;
    Ok((vals, SquareMatrix(vecs)))
}

/// Householder reduction to tridiagonal form followed by implicit QL,
/// after the EISPACK tred2/tql2 pair.
fn tridiag_eigen(a: &SquareMatrix, want_vectors: bool) -> Result<(Vec<f64>, Matrix)> {
    let n = a.order();
    if n == 0 {
        return Ok((Vec::new(), Matrix::zeros(0, 0)));
    }
    // Symmetrize so tiny asymmetries accepted by the check do not leak in.
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            v[i * n + j] = 0.5 * (a.get(i, j) + a.get(j, i));
        }
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(n, &mut v, &mut d, &mut e);
    tql2(n, &mut v, &mut d, &mut e, want_vectors)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let vals: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let vecs = if want_vectors {
        let mut q = Matrix::zeros(n, n);
        for (new_col, &old_col) in order.iter().enumerate() {
            for r in 0..n {
                q.data[r * n + new_col] = v[r * n + old_col];
            }
        }
        q
    } else {
        Matrix::zeros(0, 0)
    };
    if vals.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("eigensolver"));
    }
    Ok((vals, vecs))
}

fn tred2(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    let at = |i: usize, j: usize| i * n + j;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                for k in j + 1..i {
                    g += v[at(k, j)] * d[k];
                    e[k] += v[at(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[at(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    v[at(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

fn tql2(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64], want_vectors: bool) -> Result<()> {
    const MAX_SWEEPS: usize = 64;
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_SWEEPS {
                    return Err(Error::ResourceLimit("QL iteration did not converge".into()));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if want_vectors {
                        for k in 0..n {
                            let row = k * n;
                            h = v[row + i + 1];
                            v[row + i + 1] = s * v[row + i] + c * h;
                            v[row + i] = c * v[row + i] - s * h;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Reads a headerless CSV of decimal floats, one sample per line.
/// Blank lines are skipped; every other line must have the same field count.
pub fn read_csv<R: BufRead>(reader: R) -> Result<DataMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for field in trimmed.split(',') {
            let field = field.trim();
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Parse { line: lineno, msg: format!("cannot parse {field:?} as a number") })?;
            if !v.is_finite() {
                return Err(Error::Parse { line: lineno, msg: format!("non-finite value {field:?}") });
            }
            row.push(v);
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Parse { line: lineno, msg: format!("expected {w} fields, found {}", row.len()) })
            }
            _ => {}
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse { line: 0, msg: "no data rows".into() });
    }
    DataMatrix::from_rows(&rows)
}

pub fn write_csv<W: Write>(y: &Matrix, mut w: W) -> Result<()> {
    for i in 0..y.rows() {
        let line: Vec<String> = y.row(i).iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}
