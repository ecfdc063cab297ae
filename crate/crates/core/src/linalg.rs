//! Sparse row-compressed matrices and the linear solvers behind the
//! equilibrium and contribution-index computations.

use crate::error::{Error, Result};
use crate::scalar::{norm_l2, Scalar};

/// Square matrix in compressed-row form. Diagonal entries are stored like
/// any other entry.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    n: usize,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
}

impl<T: Scalar> SparseMatrix<T> {
    /// Builds from per-row entry lists. Columns within a row must be unique.
    pub fn from_rows(rows: Vec<Vec<(usize, T)>>) -> Self {
        let n = rows.len();
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        for row in rows {
            for (c, v) in row {
                debug_assert!(c < n);
                cols.push(c);
                vals.push(v);
            }
            offsets.push(cols.len());
        }
        SparseMatrix { n, offsets, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n)
            .map(|i| self.row(i).filter(|(c, _)| *c == i).map(|(_, v)| v).sum())
            .collect()
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(c, v)| v * x[c]).sum();
        }
    }

    pub fn transpose(&self) -> Self {
        let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::new(); self.n];
        for i in 0..self.n {
            for (c, v) in self.row(i) {
                rows[c].push((i, v));
            }
        }
        Self::from_rows(rows)
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut a = vec![vec![T::zero(); self.n]; self.n];
        for (i, row) in a.iter_mut().enumerate() {
            for (c, v) in self.row(i) {
                row[c] += v;
            }
        }
        a
    }

    /// `max_i |(A x - b)_i|`
    pub fn residual_inf(&self, x: &[T], b: &[T]) -> T {
        (0..self.n).fold(T::zero(), |m, i| {
            let r: T = self.row(i).map(|(c, v)| v * x[c]).sum::<T>() - b[i];
            m.max(r.abs())
        })
    }

    /// Whether every row satisfies `|a_ii| > sum_{j != i} |a_ij|`; returns
    /// the first failing row otherwise.
    pub fn check_row_dominance(&self) -> std::result::Result<(), usize> {
        for i in 0..self.n {
            let (mut diag, mut off) = (T::zero(), T::zero());
            for (c, v) in self.row(i) {
                if c == i {
                    diag += v;
                } else {
                    off += v.abs();
                }
            }
            if !(diag.abs() > off) {
                return Err(i);
            }
        }
        Ok(())
    }
}

/// Gaussian elimination with partial pivoting on a dense copy.
pub fn dense_lu_solve<T: Scalar>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Result<Vec<T>> {
    let n = b.len();
    if a.len() != n {
        return Err(Error::Dimension { expected: n, got: a.len() });
    }
    for k in 0..n {
        let p = (k..n)
            .max_by(|&x, &y| a[x][k].abs().partial_cmp(&a[y][k].abs()).unwrap_or(std::cmp::Ordering::Equal))
            .unwrap();
        if a[p][k] == T::zero() || !a[p][k].is_finite() {
            return Err(Error::Numerical(format!("singular pivot in column {k}")));
        }
        a.swap(k, p);
        b.swap(k, p);
        let (top, bottom) = a.split_at_mut(k + 1);
        let pivot_row = &top[k];
        for (r, row) in bottom.iter_mut().enumerate() {
            let f = row[k] / pivot_row[k];
            if f == T::zero() {
                continue;
            }
            for c in k..n {
                row[c] -= f * pivot_row[c];
            }
            b[k + 1 + r] = b[k + 1 + r] - f * b[k];
        }
    }
    let mut x = vec![T::zero(); n];
    for k in (0..n).rev() {
        let s: T = ((k + 1)..n).map(|c| a[k][c] * x[c]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy)]
pub struct GmresOptions<T> {
    /// Stop when `||b - A x||_2 <= tol`.
    pub tol: T,
    pub restart: usize,
    /// Total inner iterations across restarts.
    pub max_iter: usize,
}

/// Restarted GMRES with right Jacobi (diagonal) preconditioning.
///
/// Returns the solution and the number of inner iterations used.
pub fn gmres<T: Scalar>(a: &SparseMatrix<T>, b: &[T], x0: Option<&[T]>, opts: GmresOptions<T>) -> Result<(Vec<T>, usize)> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::Dimension { expected: n, got: b.len() });
    }
    let inv_diag: Vec<T> = a
        .diagonal()
        .into_iter()
        .map(|d| if d != T::zero() { T::one() / d } else { T::one() })
        .collect();
    let mut x = x0.map_or_else(|| vec![T::zero(); n], <[T]>::to_vec);
    let m = opts.restart.max(1).min(n.max(1));
    let mut used = 0usize;
    let mut work = vec![T::zero(); n];

    loop {
        a.mul_vec_into(&x, &mut work);
        let r: Vec<T> = b.iter().zip(&work).map(|(bi, ai)| *bi - *ai).collect();
        let beta = norm_l2(&r);
        if !beta.is_finite() {
            return Err(Error::Numerical("non-finite residual in GMRES".into()));
        }
        if beta <= opts.tol {
            return Ok((x, used));
        }
        if used >= opts.max_iter {
            return Err(Error::NotConverged { what: "GMRES", iterations: used, residual: beta.as_f64() });
        }

        let mut basis: Vec<Vec<T>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|v| *v / beta).collect());
        // Hessenberg columns after Givens rotation (upper triangular).
        let mut h: Vec<Vec<T>> = Vec::with_capacity(m);
        let mut cs: Vec<T> = Vec::with_capacity(m);
        let mut sn: Vec<T> = Vec::with_capacity(m);
        let mut g = vec![T::zero(); m + 1];
        g[0] = beta;
        let mut k = 0;
        while k < m && used < opts.max_iter {
            let z: Vec<T> = basis[k].iter().zip(&inv_diag).map(|(v, d)| *v * *d).collect();
            a.mul_vec_into(&z, &mut work);
            let mut w = work.clone();
            let mut col = vec![T::zero(); k + 2];
            for (j, vj) in basis.iter().enumerate() {
                let hij: T = w.iter().zip(vj).map(|(a, b)| *a * *b).sum();
                col[j] = hij;
                for (wi, vi) in w.iter_mut().zip(vj) {
                    *wi -= hij * *vi;
                }
            }
            let hnext = norm_l2(&w);
            col[k + 1] = hnext;
            for j in 0..k {
                let t = cs[j] * col[j] + sn[j] * col[j + 1];
                col[j + 1] = -sn[j] * col[j] + cs[j] * col[j + 1];
                col[j] = t;
            }
            let denom = (col[k] * col[k] + col[k + 1] * col[k + 1]).sqrt();
            let (c, s) = if denom == T::zero() { (T::one(), T::zero()) } else { (col[k] / denom, col[k + 1] / denom) };
            col[k] = c * col[k] + s * col[k + 1];
            col[k + 1] = T::zero();
            g[k + 1] = -s * g[k];
            g[k] = c * g[k];
            cs.push(c);
            sn.push(s);
            h.push(col);
            used += 1;
            k += 1;
            if g[k].abs() <= opts.tol * T::lit(0.5) || hnext == T::zero() {
                break;
            }
            basis.push(w.into_iter().map(|v| v / hnext).collect());
        }

        // Back substitution for the k x k triangular system.
        let mut y = vec![T::zero(); k];
        for i in (0..k).rev() {
            let s: T = ((i + 1)..k).map(|j| h[j][i] * y[j]).sum();
            if h[i][i] == T::zero() {
                return Err(Error::Numerical("GMRES breakdown: zero on Hessenberg diagonal".into()));
            }
            y[i] = (g[i] - s) / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for ((xi, vi), d) in x.iter_mut().zip(&basis[j]).zip(&inv_diag) {
                *xi += *yj * *vi * *d;
            }
        }
    }
}
