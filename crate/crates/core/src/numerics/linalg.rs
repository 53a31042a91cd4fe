use crate::scalar::{dot, norm};
use crate::{Error, Real, Result};

/// Dense column-major matrix. Columns are contiguous, which is the access
/// pattern for bases and eigenvector sets.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix from equal-length columns.
    pub fn from_columns(columns: &[Vec<T>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows * columns.len());
        for c in columns {
            if c.len() != rows {
                return Err(Error::DimensionMismatch {
                    expected: rows,
                    got: c.len(),
                });
            }
            data.extend_from_slice(c);
        }
        Ok(Self {
            rows,
            cols: columns.len(),
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn col(&self, j: usize) -> &[T] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [T] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.rows.max(1)).take(self.cols)
    }

    /// `A·x`
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols);
        let mut y = vec![T::zero(); self.rows];
        for (c, &xj) in self.columns().zip(x) {
            crate::scalar::axpy(xj, c, &mut y);
        }
        y
    }

    /// `Aᵀ·x`
    pub fn tr_mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.rows);
        self.columns().map(|c| dot(c, x)).collect()
    }

    /// `AᵀB`
    pub fn tr_mul(&self, other: &Mat<T>) -> Mat<T> {
        assert_eq!(self.rows, other.rows);
        Mat::from_fn(self.cols, other.cols, |i, j| dot(self.col(i), other.col(j)))
    }

    pub fn transpose(&self) -> Mat<T> {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }
}

impl<T> std::ops::Index<(usize, usize)> for Mat<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[j * self.rows + i]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[j * self.rows + i]
    }
}

/// Symmetric matrix stored as its packed lower triangle, so `A_ij == A_ji`
/// holds by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct SpdMatrix<T> {
    dim: usize,
    lower: Vec<T>,
}

#[inline]
fn packed(i: usize, j: usize) -> usize {
    let (i, j) = if i >= j { (i, j) } else { (j, i) };
    i * (i + 1) / 2 + j
}

impl<T: Real> SpdMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            lower: vec![T::zero(); dim * (dim + 1) / 2],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, T::one())
    }

    pub fn scaled_identity(dim: usize, s: T) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, s);
        }
        m
    }

    /// Reads the lower triangle (`i >= j`) of `f`.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..=i {
                m.lower[packed(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Rejects inputs that are not square or not exactly symmetric.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let dim = rows.len();
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: r.len(),
                });
            }
        }
        for i in 0..dim {
            for j in 0..i {
                if rows[i][j] != rows[j][i] {
                    return Err(Error::InvalidArgument(format!(
                        "matrix not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self::from_fn(dim, |i, j| rows[i][j]))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.lower[packed(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.lower[packed(i, j)] = v;
    }

    pub fn trace(&self) -> T {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs(&self) -> T {
        self.lower.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    pub fn add_diagonal(&mut self, s: T) {
        for i in 0..self.dim {
            let v = self.get(i, i) + s;
            self.set(i, i, v);
        }
    }

    pub fn to_mat(&self) -> Mat<T> {
        Mat::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }
}

/// Lower-triangular Cholesky factor `L` with `A = L·Lᵀ`, packed by rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Cholesky<T> {
    dim: usize,
    lower: Vec<T>,
}

/// Factors `A = L·Lᵀ`. A non-positive pivot is reported, never papered over.
pub fn cholesky<T: Real>(a: &SpdMatrix<T>) -> Result<Cholesky<T>> {
    let n = a.dim();
    let mut l = vec![T::zero(); n * (n + 1) / 2];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l[packed(i, k)] * l[packed(j, k)];
            }
            if i == j {
                if !(s > T::zero()) || !s.is_finite() {
                    return Err(Error::NotPositiveDefinite {
                        pivot: i,
                        value: s.as_f64(),
                    });
                }
                l[packed(i, i)] = s.sqrt();
            } else {
                l[packed(i, j)] = s / l[packed(j, j)];
            }
        }
    }
    Ok(Cholesky { dim: n, lower: l })
}

impl<T: Real> Cholesky<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        if j > i {
            T::zero()
        } else {
            self.lower[packed(i, j)]
        }
    }

    /// `ln det A = 2 Σ ln L_ii`
    pub fn log_det(&self) -> T {
        let two = T::lit(2.0);
        two * (0..self.dim).map(|i| self.get(i, i).ln()).sum::<T>()
    }

    /// `L·x`
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.dim)
            .map(|i| (0..=i).map(|k| self.lower[packed(i, k)] * x[k]).sum())
            .collect()
    }

    /// Solves `L·y = b` by forward substitution.
    pub fn solve_lower(&self, b: &[T]) -> Vec<T> {
        let mut y = b.to_vec();
        for i in 0..self.dim {
            let mut s = y[i];
            for k in 0..i {
                s -= self.lower[packed(i, k)] * y[k];
            }
            y[i] = s / self.lower[packed(i, i)];
        }
        y
    }

    /// `‖x‖²_{A⁻¹} = ‖L⁻¹x‖²`
    pub fn inv_quad_form(&self, x: &[T]) -> T {
        let y = self.solve_lower(x);
        dot(&y, &y)
    }

    /// `L·Lᵀ`, for checks.
    pub fn reconstruct(&self) -> SpdMatrix<T> {
        SpdMatrix::from_fn(self.dim, |i, j| {
            (0..=j).map(|k| self.get(i, k) * self.get(j, k)).sum()
        })
    }

    pub fn to_mat(&self) -> Mat<T> {
        Mat::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }
}

/// Modified Gram–Schmidt with a second orthogonalization pass.
///
/// A column whose norm after projection falls below `1e-10` of its original
/// norm is reported as [`Error::RankDeficient`].
pub fn orthonormalize<T: Real>(columns: &Mat<T>) -> Result<Mat<T>> {
    let threshold = T::lit(1e-10);
    let mut q = columns.clone();
    for j in 0..q.cols() {
        let original = norm(q.col(j));
        for _pass in 0..2 {
            for k in 0..j {
                let (head, tail) = q.data.split_at_mut(j * q.rows);
                let qk = &head[k * q.rows..(k + 1) * q.rows];
                let qj = &mut tail[..q.rows];
                let c = dot(qk, qj);
                crate::scalar::axpy(-c, qk, qj);
            }
        }
        let nrm = norm(q.col(j));
        if !(nrm > threshold * original) || original == T::zero() {
            return Err(Error::RankDeficient { column: j });
        }
        for x in q.col_mut(j) {
            *x /= nrm;
        }
    }
    Ok(q)
}
