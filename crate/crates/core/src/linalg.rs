//! Small dense and banded linear-algebra kernels: Householder least squares for the
//! surrogate fit and a skyline (variable-band) Cholesky factorization for the stiffness
//! systems.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Solves `min ||A x - b||` for a row-major `rows × cols` matrix with `rows >= cols` by
/// Householder QR. Fails when the triangular factor is numerically singular.
pub fn least_squares<T: Real>(a: &[T], rows: usize, cols: usize, b: &[T]) -> Result<Vec<T>> {
    if rows < cols || a.len() != rows * cols || b.len() != rows {
        return Err(Error::InvalidParameter(format!(
            "least squares needs rows >= cols and consistent sizes (rows {rows}, cols {cols})"
        )));
    }
    // Column-major copy: Householder sweeps walk columns.
    let mut q = vec![T::zero(); rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            q[j * rows + i] = a[i * cols + j];
        }
    }
    let mut rhs = b.to_vec();
    let mut diag = vec![T::zero(); cols];

    for k in 0..cols {
        let col = &mut q[k * rows..(k + 1) * rows];
        let norm = col[k..].iter().map(|&v| v * v).sum::<T>().sqrt();
        if norm == T::zero() {
            diag[k] = T::zero();
            continue;
        }
        let alpha = if col[k] > T::zero() { -norm } else { norm };
        col[k] -= alpha;
        let vnorm2 = col[k..].iter().map(|&v| v * v).sum::<T>();
        diag[k] = alpha;
        if vnorm2 == T::zero() {
            continue;
        }
        let v: Vec<T> = col[k..].to_vec();
        for j in k + 1..cols {
            let cj = &mut q[j * rows..(j + 1) * rows];
            let s = v.iter().zip(&cj[k..]).map(|(&p, &c)| p * c).sum::<T>() * T::of(2.0) / vnorm2;
            for (c, &p) in cj[k..].iter_mut().zip(&v) {
                *c -= s * p;
            }
        }
        let s = v.iter().zip(&rhs[k..]).map(|(&p, &c)| p * c).sum::<T>() * T::of(2.0) / vnorm2;
        for (c, &p) in rhs[k..].iter_mut().zip(&v) {
            *c -= s * p;
        }
    }

    let dmax = diag.iter().fold(T::zero(), |m, d| m.max(d.abs()));
    let dmin = diag.iter().fold(T::infinity(), |m, d| m.min(d.abs()));
    let condition = if dmin > T::zero() {
        (dmax / dmin).as_f64()
    } else {
        f64::INFINITY
    };
    let tol = T::epsilon() * T::of(rows.max(cols) as f64) * T::of(10.0);
    if dmax == T::zero() || dmin <= tol * dmax {
        return Err(Error::RankDeficient { condition });
    }

    let mut x = vec![T::zero(); cols];
    for k in (0..cols).rev() {
        let mut s = rhs[k];
        for j in k + 1..cols {
            s -= q[j * rows + k] * x[j];
        }
        x[k] = s / diag[k];
    }
    Ok(x)
}

/// Symmetric positive-definite matrix in skyline storage: row `i` keeps the entries from
/// column `first[i]` through the diagonal.
#[derive(Debug, Clone)]
pub struct SkylineMatrix<T> {
    first: Vec<usize>,
    start: Vec<usize>,
    values: Vec<T>,
    factored: bool,
}

impl<T: Real> SkylineMatrix<T> {
    /// `first[i]` is the smallest column index coupled to row `i` (`first[i] <= i`).
    pub fn new(first: Vec<usize>) -> Self {
        let mut start = Vec::with_capacity(first.len() + 1);
        let mut total = 0;
        for (i, &f) in first.iter().enumerate() {
            assert!(f <= i, "skyline profile must stay on or below the diagonal");
            start.push(total);
            total += i - f + 1;
        }
        start.push(total);
        Self {
            first,
            start,
            values: vec![T::zero(); total],
            factored: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    pub fn stored_entries(&self) -> usize {
        self.values.len()
    }

    pub fn clear(&mut self) {
        self.values.iter_mut().for_each(|v| *v = T::zero());
        self.factored = false;
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && j >= self.first[i]);
        self.start[i] + (j - self.first[i])
    }

    /// Adds `v` to entry `(i, j)` of the lower triangle (`j <= i`).
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        let k = self.index(i, j);
        self.values[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        if j < self.first[i] {
            T::zero()
        } else {
            self.values[self.index(i, j)]
        }
    }

    /// In-place Cholesky `A = L Lᵀ`; the profile is preserved by the factorization.
    pub fn factor(&mut self) -> Result<()> {
        let n = self.dim();
        for i in 0..n {
            let fi = self.first[i];
            let si = self.start[i];
            for j in fi..i {
                let fj = self.first[j];
                let sj = self.start[j];
                let k0 = fi.max(fj);
                let mut s = self.values[si + (j - fi)];
                let ri = &self.values[si + (k0 - fi)..si + (j - fi)];
                let rj = &self.values[sj + (k0 - fj)..sj + (j - fj)];
                for (&a, &b) in ri.iter().zip(rj) {
                    s -= a * b;
                }
                let djj = self.values[sj + (j - fj)];
                self.values[si + (j - fi)] = s / djj;
            }
            let row = &self.values[si..si + (i - fi)];
            let s = self.values[si + (i - fi)] - row.iter().map(|&v| v * v).sum::<T>();
            if !(s > T::zero()) {
                return Err(Error::NotPositiveDefinite {
                    equation: i,
                    pivot: s.as_f64(),
                });
            }
            self.values[si + (i - fi)] = s.sqrt();
        }
        self.factored = true;
        Ok(())
    }

    /// Solves `A x = b` in place using the factor from [`factor`](Self::factor).
    pub fn solve_in_place(&self, b: &mut [T]) {
        assert!(self.factored, "solve requires a factored matrix");
        let n = self.dim();
        for i in 0..n {
            let fi = self.first[i];
            let si = self.start[i];
            let row = &self.values[si..si + (i - fi)];
            let s = b[i] - row.iter().zip(&b[fi..i]).map(|(&l, &x)| l * x).sum::<T>();
            b[i] = s / self.values[si + (i - fi)];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let si = self.start[i];
            b[i] /= self.values[si + (i - fi)];
            let xi = b[i];
            for (k, bk) in b[fi..i].iter_mut().enumerate() {
                *bk -= self.values[si + k] * xi;
            }
        }
    }
}
