//! Dense row-major matrices and the Cholesky factorization used by the GP.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    /// Builds a matrix from a flat row-major buffer.
    ///
    /// Panics if `data.len() != rows * cols`.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "buffer length does not match shape");
        Self { rows, cols, data }
    }

    /// Builds a matrix from equally sized rows. An empty slice yields a 0×`cols` matrix.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R], cols: usize) -> Self {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self { rows: rows.len(), cols, data }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
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
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[T]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn push_row(&mut self, row: &[T]) {
        assert_eq!(row.len(), self.cols, "row length does not match column count");
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    /// Returns the rows selected by `indices`, in that order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut out = Self::zeros(0, self.cols);
        for &i in indices {
            out.push_row(self.row(i));
        }
        out
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

    pub fn mat_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols);
        self.iter_rows().map(|r| dot(r, v)).collect()
    }

    pub fn to_f64(&self) -> Matrix<f64> {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v.to_f64_lossy()).collect() }
    }

    pub fn to_vecs(&self) -> Vec<Vec<T>> {
        self.iter_rows().map(<[T]>::to_vec).collect()
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Four independent partial sums so the loop can use SIMD lanes.
#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut s = [T::zero(); 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..4 {
            s[k] += x[k] * y[k];
        }
    }
    let tail = ca.remainder().iter().zip(cb.remainder()).fold(T::zero(), |acc, (&x, &y)| acc + x * y);
    (s[0] + s[1]) + (s[2] + s[3]) + tail
}

#[inline]
pub fn squared_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| {
        let d = x - y;
        acc + d * d
    })
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    l: Matrix<T>,
}

impl<T: Scalar> Cholesky<T> {
    /// Factors a symmetric matrix, reading only its lower triangle.
    /// Returns `None` when a pivot is not strictly positive.
    pub fn factor(a: &Matrix<T>) -> Option<Self> {
        let n = a.rows();
        assert_eq!(n, a.cols(), "Cholesky needs a square matrix");
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let (head, tail) = l.data.split_at_mut(j * n);
            let row_j = &mut tail[..n];
            for i in 0..j {
                let row_i = &head[i * n..i * n + n];
                let s = a[(j, i)] - dot(&row_j[..i], &row_i[..i]);
                row_j[i] = s / row_i[i];
            }
            let pivot = a[(j, j)] - dot(&row_j[..j], &row_j[..j]);
            if !(pivot > T::zero()) || !pivot.is_finite() {
                return None;
            }
            row_j[j] = pivot.sqrt();
        }
        Some(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    pub fn factor_matrix(&self) -> &Matrix<T> {
        &self.l
    }

    /// Solves `L z = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [T]) {
        let n = self.dim();
        for i in 0..n {
            let row = self.l.row(i);
            let s = b[i] - dot(&row[..i], &b[..i]);
            b[i] = s / row[i];
        }
    }

    /// Solves `Lᵀ x = z` in place.
    pub fn solve_upper_in_place(&self, z: &mut [T]) {
        let n = self.dim();
        for i in (0..n).rev() {
            let row = self.l.row(i);
            z[i] /= row[i];
            let xi = z[i];
            for k in 0..i {
                z[k] -= row[k] * xi;
            }
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        self.solve_upper_in_place(&mut x);
        x
    }

    pub fn log_det(&self) -> T {
        let two = T::one() + T::one();
        (0..self.dim()).map(|i| self.l[(i, i)].ln()).sum::<T>() * two
    }

    /// `(LLᵀ)⁻¹ = L⁻ᵀL⁻¹`, built from the columns of `L⁻¹`.
    pub fn inverse(&self) -> Matrix<T> {
        let n = self.dim();
        // row j of `w` holds column j of L⁻¹, which is zero above j
        let mut w = Matrix::zeros(n, n);
        for j in 0..n {
            let col = w.row_mut(j);
            for i in j..n {
                let row = self.l.row(i);
                let rhs = if i == j { T::one() } else { T::zero() };
                col[i] = (rhs - dot(&row[j..i], &col[j..i])) / row[i];
            }
        }
        let mut inv = Matrix::zeros(n, n);
        for a in 0..n {
            for b in 0..=a {
                let v = dot(&w.row(a)[a..], &w.row(b)[a..]);
                inv[(a, b)] = v;
                inv[(b, a)] = v;
            }
        }
        inv
    }

    /// Extends the factor of `A` to the factor of `[[A, c], [cᵀ, diag]]`.
    /// Returns `false` (leaving `self` untouched) when the new pivot is not positive.
    pub fn append(&mut self, cross: &[T], diag: T) -> bool {
        self.extend(cross, diag).is_some()
    }

    /// As [`Cholesky::append`], returning the new off-diagonal row `L⁻¹c` and
    /// the new diagonal entry.
    pub fn extend(&mut self, cross: &[T], diag: T) -> Option<(Vec<T>, T)> {
        let n = self.dim();
        assert_eq!(cross.len(), n);
        let mut l_row = cross.to_vec();
        self.solve_lower_in_place(&mut l_row);
        let pivot = diag - dot(&l_row, &l_row);
        if !(pivot > T::zero()) || !pivot.is_finite() {
            return None;
        }
        let mut data = Vec::with_capacity((n + 1) * (n + 1));
        for i in 0..n {
            data.extend_from_slice(self.l.row(i));
            data.push(T::zero());
        }
        data.extend_from_slice(&l_row);
        let l_nn = pivot.sqrt();
        data.push(l_nn);
        self.l = Matrix::from_row_major(n + 1, n + 1, data);
        Some((l_row, l_nn))
    }
}

/// Smallest relative jitter tried, as a multiple of the signal variance.
pub const JITTER_FLOOR: f64 = 1e-8;
/// Largest relative jitter tried before giving up.
pub const JITTER_CEILING: f64 = 1e-4;

/// Factors `a + jitter·I`, starting at `JITTER_FLOOR·scale` and escalating ×10
/// up to `JITTER_CEILING·scale`. Returns the factor and the jitter that succeeded.
pub fn cholesky_with_jitter<T: Scalar>(a: &Matrix<T>, scale: T) -> Option<(Cholesky<T>, T)> {
    let mut rel = JITTER_FLOOR;
    let mut work = a.clone();
    while rel <= JITTER_CEILING * (1.0 + 1e-9) {
        let jitter = T::of(rel) * scale;
        for i in 0..a.rows() {
            work[(i, i)] = a[(i, i)] + jitter;
        }
        if let Some(chol) = Cholesky::factor(&work) {
            return Some((chol, jitter));
        }
        rel *= 10.0;
    }
    None
}
