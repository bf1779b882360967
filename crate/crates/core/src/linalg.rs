//! Small dense linear algebra for the matrix sizes met here (tens of rows and
//! columns). Row-major storage, no external BLAS.

use std::fmt;

/// Dense row-major matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row vectors. All rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows_iter().map(<[f64]>::to_vec).collect()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    /// Keeps the listed columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(self.rows, cols.len());
        for i in 0..self.rows {
            for (k, &j) in cols.iter().enumerate() {
                out[(i, k)] = self[(i, j)];
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
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
                let src = other.row(k);
                let dst = out.row_mut(i);
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        out
    }

    /// `self · v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len());
        self.rows_iter().map(|r| dot(r, v)).collect()
    }

    /// `selfᵀ · v`.
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, v.len());
        let mut out = vec![0.0; self.cols];
        for (r, &c) in self.rows_iter().zip(v) {
            if c == 0.0 {
                continue;
            }
            for (o, x) in out.iter_mut().zip(r) {
                *o += c * x;
            }
        }
        out
    }

    /// `self · diag(w) · selfᵀ`, the weighted Gram matrix of the rows.
    pub fn weighted_gram(&self, w: &[f64]) -> Matrix {
        assert_eq!(self.cols, w.len());
        let n = self.rows;
        let mut out = Matrix::zeros(n, n);
        let mut scaled = vec![0.0; self.cols];
        for a in 0..n {
            let ra = self.row(a);
            for ((s, x), wi) in scaled.iter_mut().zip(ra).zip(w) {
                *s = x * wi;
            }
            for b in a..n {
                let v = dot(&scaled, self.row(b));
                out[(a, b)] = v;
                out[(b, a)] = v;
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
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

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in self.rows_iter() {
            writeln!(f, "  {r:?}")?;
        }
        write!(f, "]")
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    /// Returns `None` when a pivot falls below `rel_tol` times the largest
    /// diagonal entry, i.e. the matrix is numerically singular or indefinite.
    pub fn new(a: &Matrix, rel_tol: f64) -> Option<Self> {
        let n = a.nrows();
        assert_eq!(n, a.ncols());
        let scale = (0..n).fold(0.0_f64, |m, i| m.max(a[(i, i)].abs()));
        if n > 0 && !(scale > 0.0 && scale.is_finite()) {
            return None;
        }
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > rel_tol * scale) {
                return None;
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Some(Self { l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.nrows();
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.l[(k, i)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }
}

/// Least-squares coefficients `c` minimizing `‖rowsᵀ c − v‖₂`, for a matrix with
/// linearly independent rows. Solved through the normal equations; adequate for
/// the well-conditioned 0/±1 architectures handled here.
pub fn row_space_coefficients(rows: &Matrix, v: &[f64]) -> Option<Vec<f64>> {
    row_space_coefficients_many(rows, &[v]).map(|mut c| c.remove(0))
}

/// [`row_space_coefficients`] for several vectors sharing one factorization.
pub fn row_space_coefficients_many(rows: &Matrix, vs: &[&[f64]]) -> Option<Vec<Vec<f64>>> {
    let gram = rows.weighted_gram(&vec![1.0; rows.ncols()]);
    let chol = Cholesky::new(&gram, 1e-13)?;
    let solve = |v: &[f64]| {
        let mut c = chol.solve(&rows.mul_vec(v));
        // One step of iterative refinement.
        let fitted = rows.tr_mul_vec(&c);
        let resid: Vec<f64> = v.iter().zip(&fitted).map(|(a, b)| a - b).collect();
        let corr = chol.solve(&rows.mul_vec(&resid));
        for (ci, di) in c.iter_mut().zip(corr) {
            *ci += di;
        }
        c
    };
    Some(vs.iter().map(|v| solve(v)).collect())
}

/// Orthonormalizes the rows of `m` by modified Gram-Schmidt with one
/// reorthogonalization pass. Returns `None` if a row is (numerically) dependent
/// on the previous ones.
pub fn orthonormal_rows(m: &Matrix, tol: f64) -> Option<Vec<Vec<f64>>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m.nrows());
    for r in m.rows_iter() {
        let scale = norm(r);
        let mut v = r.to_vec();
        project_out(&mut v, &basis);
        project_out(&mut v, &basis);
        let n = norm(&v);
        if !(n > tol * scale.max(f64::MIN_POSITIVE)) {
            return None;
        }
        v.iter_mut().for_each(|x| *x /= n);
        basis.push(v);
    }
    Some(basis)
}

/// Subtracts from `v` its projection onto the span of the orthonormal `basis`.
pub fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let c = dot(v, b);
        for (x, y) in v.iter_mut().zip(b) {
            *x -= c * y;
        }
    }
}

/// Orthonormal completion: given orthonormal `basis` vectors of dimension `n`,
/// returns orthonormal vectors spanning the orthogonal complement. Candidates are
/// the coordinate axes, taken greedily by largest remaining norm.
pub fn orthogonal_complement(basis: &[Vec<f64>], n: usize, tol: f64) -> Vec<Vec<f64>> {
    let mut all: Vec<Vec<f64>> = basis.to_vec();
    let mut out = Vec::new();
    let mut residuals: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            project_out(&mut e, &all);
            e
        })
        .collect();
    while all.len() < n {
        let (best, best_norm) = residuals
            .iter()
            .enumerate()
            .map(|(i, r)| (i, norm(r)))
            .fold(
                (usize::MAX, 0.0),
                |acc, (i, nv)| if nv > acc.1 { (i, nv) } else { acc },
            );
        if best == usize::MAX || best_norm <= tol {
            break;
        }
        let mut v = residuals[best].clone();
        project_out(&mut v, &all);
        project_out(&mut v, &all);
        let nv = norm(&v);
        if nv <= tol {
            residuals[best].iter_mut().for_each(|x| *x = 0.0);
            continue;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        for r in residuals.iter_mut() {
            let c = dot(r, &v);
            for (x, y) in r.iter_mut().zip(&v) {
                *x -= c * y;
            }
        }
        all.push(v.clone());
        out.push(v);
    }
    out
}
