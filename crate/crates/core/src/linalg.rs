//! Dense vectors and matrices, evaluation matrices, and the incrementally
//! maintained Gram matrix `A^T A` together with its inverse.

use crate::error::{check_dim, Error, Result};
use crate::oavi::Polynomial;
use crate::par;
use crate::terms::{Term, TermList};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn norm2_sq(v: &[f64]) -> f64 {
    dot(v, v)
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Mean squared error `(1/m) * ||v||^2` of an evaluation vector.
pub fn mse(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(norm2_sq(v) / v.len() as f64)
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            check_dim(c, row.len())?;
            data.extend_from_slice(row);
        }
        Ok(Matrix {
            rows: r,
            cols: c,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                axpy(a, other.row(k), dst);
            }
        }
        out
    }

    /// `max |self - I|` for a square matrix.
    pub fn identity_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((self[(i, j)] - target).abs());
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Grow a square matrix by one row and column.
    fn bordered(&self, col: &[f64], corner: f64) -> Matrix {
        let n = self.rows;
        let mut out = Matrix::zeros(n + 1, n + 1);
        for i in 0..n {
            out.data[i * (n + 1)..i * (n + 1) + n].copy_from_slice(self.row(i));
            out[(i, n)] = col[i];
            out[(n, i)] = col[i];
        }
        out[(n, n)] = corner;
        out
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Lower-triangular Cholesky factor `L` with `B = L L^T`.
pub fn cholesky(b: &Matrix) -> Result<Matrix> {
    check_dim(b.rows(), b.cols())?;
    let n = b.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut diag = b[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(Error::Numeric(format!(
                "matrix is not positive definite (pivot {j} = {diag:e})"
            )));
        }
        let d = diag.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = b[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

fn cholesky_solve(l: &Matrix, r: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut z = r.to_vec();
    for i in 0..n {
        let s = dot(&l.row(i)[..i], &z[..i]);
        z[i] = (z[i] - s) / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in i + 1..n {
            s -= l[(k, i)] * z[k];
        }
        z[i] = s / l[(i, i)];
    }
    z
}

/// Solve `B x = r` for symmetric positive definite `B` by Cholesky.
pub fn solve_spd(b: &Matrix, r: &[f64]) -> Result<Vec<f64>> {
    check_dim(b.rows(), r.len())?;
    let l = cholesky(b)?;
    Ok(cholesky_solve(&l, r))
}

/// `B^{-1}` column by column from one Cholesky factorization.
pub fn spd_inverse(b: &Matrix) -> Result<Matrix> {
    let n = b.rows();
    let l = cholesky(b)?;
    let mut inv = Matrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|x| *x = 0.0);
        e[j] = 1.0;
        let col = cholesky_solve(&l, &e);
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    Ok(inv)
}

/// Raw data stored column by column: `columns[i][r]` is feature `i` of row `r`.
#[derive(Clone, Debug, PartialEq)]
pub struct Columns {
    m: usize,
    columns: Vec<Vec<f64>>,
}

impl Columns {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        let mut columns = vec![Vec::with_capacity(rows.len()); n];
        for row in rows {
            check_dim(n, row.len())?;
            for (c, &v) in columns.iter_mut().zip(row) {
                c.push(v);
            }
        }
        Ok(Columns {
            m: rows.len(),
            columns,
        })
    }

    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let m = columns.first().map_or(0, Vec::len);
        for c in &columns {
            check_dim(m, c.len())?;
        }
        Ok(Columns { m, columns })
    }

    pub fn num_rows(&self) -> usize {
        self.m
    }

    pub fn num_vars(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.columns[i]
    }

    pub fn row(&self, r: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[r]).collect()
    }
}

/// Evaluation matrix `O(X)`: one column per term of `O`, in the same order.
#[derive(Clone, Debug)]
pub struct EvalMatrix {
    m: usize,
    columns: Vec<Vec<f64>>,
}

impl EvalMatrix {
    /// The evaluation matrix of `O = {1}`.
    pub fn unit(m: usize) -> Self {
        EvalMatrix {
            m,
            columns: vec![vec![1.0; m]],
        }
    }

    /// Evaluate every term of `o` over `x` from scratch.
    pub fn build(o: &TermList, x: &Columns) -> Self {
        let mut a = EvalMatrix {
            m: x.num_rows(),
            columns: Vec::with_capacity(o.len()),
        };
        // Divisors precede their multiples in DegLex, so every cached column
        // eval_term_column looks up is already in `a`.
        for u in o.iter() {
            let col = eval_term_column(u, o, &a, x);
            a.columns.push(col);
        }
        a
    }

    pub fn num_rows(&self) -> usize {
        self.m
    }

    pub fn num_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn push(&mut self, col: Vec<f64>) {
        debug_assert_eq!(col.len(), self.m);
        self.columns.push(col);
    }

    /// `A^T b`
    pub fn transpose_mul(&self, b: &[f64]) -> Vec<f64> {
        debug_assert_eq!(b.len(), self.m);
        par::map_indexed(self.columns.len(), self.m, |j| dot(&self.columns[j], b))
    }

    /// `A y + b`
    pub fn mul_add(&self, y: &[f64], b: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.columns.len());
        let chunk = 4096;
        let chunks = self.m.div_ceil(chunk);
        let parts = par::map_indexed(chunks, chunk * y.len().max(1), |c| {
            let lo = c * chunk;
            let hi = (lo + chunk).min(self.m);
            let mut out = b[lo..hi].to_vec();
            for (col, &yj) in self.columns.iter().zip(y) {
                if yj != 0.0 {
                    axpy(yj, &col[lo..hi], &mut out);
                }
            }
            out
        });
        parts.concat()
    }
}

/// `u(X)`: reuse the cached column of a divisor `u / x_i` in `o` and multiply
/// by the raw feature column; evaluate directly when no such divisor exists.
pub fn eval_term_column(u: &Term, o: &TermList, a: &EvalMatrix, x: &Columns) -> Vec<f64> {
    let m = x.num_rows();
    if u.is_one() {
        return vec![1.0; m];
    }
    for i in 0..u.num_vars() {
        if let Some(pos) = u.div_var(i).and_then(|v| o.position(&v)) {
            if pos < a.num_cols() {
                let cached = a.column(pos);
                return cached
                    .iter()
                    .zip(x.column(i))
                    .map(|(c, xi)| c * xi)
                    .collect();
            }
        }
    }
    direct_column(u, x)
}

fn direct_column(u: &Term, x: &Columns) -> Vec<f64> {
    let mut out = vec![1.0; x.num_rows()];
    for (i, &e) in u.exponents().iter().enumerate() {
        if e == 0 {
            continue;
        }
        for (o, &v) in out.iter_mut().zip(x.column(i)) {
            *o *= v.powi(e as i32);
        }
    }
    out
}

/// `g(Z)` for a single polynomial.
pub fn eval_polynomial(g: &Polynomial, o: &TermList, z: &Columns) -> Vec<f64> {
    eval_polynomials(std::slice::from_ref(g), o, z)
        .pop()
        .expect("one polynomial in, one column out")
}

/// Evaluate several generators sharing the basis `o` over `z`, building the
/// columns of `o` once.
pub fn eval_polynomials(gs: &[Polynomial], o: &TermList, z: &Columns) -> Vec<Vec<f64>> {
    let a = EvalMatrix::build(o, z);
    par::map_indexed(gs.len(), z.num_rows() * o.len().max(1), |k| {
        let g = &gs[k];
        let lead = eval_term_column(g.leading(), o, &a, z);
        let coeffs = g.coeffs();
        let mut out = lead;
        for (j, &c) in coeffs.iter().enumerate() {
            if c != 0.0 {
                axpy(c, a.column(j), &mut out);
            }
        }
        out
    })
}

/// The Gram matrix `B = A^T A` of the current evaluation matrix, and, while
/// it is trusted, its inverse `N = B^{-1}`.
///
/// Appending a column updates `B` in `O(l)` from the caller's `A^T b` and
/// `||b||^2`, and `N` in `O(l^2)` through the bordered inverse
///
/// ```text
///   p = N A^T b,   s = ||b||^2 - (A^T b)^T p,
///   n2 = -p / s,   n3 = 1 / s,   N1 = N + p p^T / s.
/// ```
///
/// A vanishing relative Schur complement `s / ||b||^2` means the new column
/// is (numerically) in the span of the old ones; the inverse is then dropped
/// and never rebuilt for the rest of the run.
#[derive(Clone, Debug)]
pub struct GramInverseState {
    gram: Matrix,
    inverse: Option<Matrix>,
}

/// Relative Schur complement below which an append is treated as rank
/// deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Largest tolerated `|B N - I|` entry on the freshly computed column.
pub const INVERSE_TOLERANCE: f64 = 1e-6;

impl GramInverseState {
    /// State for `A` = the all-ones column of length `m`.
    pub fn unit(m: usize) -> Self {
        let mf = m as f64;
        GramInverseState {
            gram: Matrix::from_rows(&[vec![mf]]).expect("1x1"),
            inverse: Some(Matrix::from_rows(&[vec![1.0 / mf]]).expect("1x1")),
        }
    }

    /// State for an arbitrary `A`, inverting `A^T A` by Cholesky.
    pub fn from_eval(a: &EvalMatrix) -> Self {
        let l = a.num_cols();
        let mut gram = Matrix::zeros(l, l);
        for i in 0..l {
            for j in 0..=i {
                let v = dot(a.column(i), a.column(j));
                gram[(i, j)] = v;
                gram[(j, i)] = v;
            }
        }
        let inverse = spd_inverse(&gram).ok();
        GramInverseState { gram, inverse }
    }

    /// Track only `B`, without an inverse.
    pub fn without_inverse(mut self) -> Self {
        self.inverse = None;
        self
    }

    pub fn dim(&self) -> usize {
        self.gram.rows()
    }

    pub fn gram(&self) -> &Matrix {
        &self.gram
    }

    pub fn inverse(&self) -> Option<&Matrix> {
        self.inverse.as_ref()
    }

    pub fn is_valid(&self) -> bool {
        self.inverse.is_some()
    }

    pub fn invalidate(&mut self) {
        self.inverse = None;
    }

    /// `max |N B - I|`, or `None` without a valid inverse. `O(l^3)`.
    pub fn inverse_residual(&self) -> Option<f64> {
        self.inverse
            .as_ref()
            .map(|n| n.matmul(&self.gram).identity_residual())
    }

    /// Append the column `b` given `atb = A^T b` and `bb = ||b||^2`.
    /// Returns whether the inverse is still valid afterwards.
    pub fn append(&mut self, atb: &[f64], bb: f64) -> bool {
        assert_eq!(atb.len(), self.dim());
        let new_inverse = self
            .inverse
            .take()
            .and_then(|n| bordered_inverse(&self.gram, &n, atb, bb));
        self.gram = self.gram.bordered(atb, bb);
        self.inverse = new_inverse;
        if cfg!(debug_assertions) {
            if let Some(res) = self.inverse_residual() {
                if res > INVERSE_TOLERANCE {
                    self.inverse = None;
                }
            }
        }
        self.inverse.is_some()
    }
}

fn bordered_inverse(gram: &Matrix, n: &Matrix, atb: &[f64], bb: f64) -> Option<Matrix> {
    if !(bb > 0.0) || !bb.is_finite() {
        return None;
    }
    let l = n.rows();
    let p = n.mul_vec(atb);
    let s = bb - dot(atb, &p);
    if !(s / bb > RANK_TOLERANCE) {
        return None;
    }
    let mut out = Matrix::zeros(l + 1, l + 1);
    for i in 0..l {
        for j in 0..l {
            out[(i, j)] = n[(i, j)] + p[i] * p[j] / s;
        }
        out[(i, l)] = -p[i] / s;
        out[(l, i)] = -p[i] / s;
    }
    out[(l, l)] = 1.0 / s;

    // O(l^2) check of the new last column: B~ n~ = e_{l+1}.
    let last: Vec<f64> = (0..l).map(|j| out[(j, l)]).collect();
    let corner = out[(l, l)];
    let mut worst = (dot(atb, &last) + bb * corner - 1.0).abs();
    for (i, r) in atb.iter().enumerate() {
        worst = worst.max((dot(gram.row(i), &last) + r * corner).abs());
    }
    if !(worst <= INVERSE_TOLERANCE) {
        return None;
    }
    Some(out)
}

/// Convenience form of [`GramInverseState::append`] taking `A` and `b`.
pub fn gram_append(state: &mut GramInverseState, a: &EvalMatrix, b: &[f64]) -> bool {
    let atb = a.transpose_mul(b);
    state.append(&atb, norm2_sq(b))
}
