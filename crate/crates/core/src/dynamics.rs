//! Nash-equilibrium expressed opinions of the generalized opinion dynamics
//! game on a signed trust network.
//!
//! Node `i` minimizes
//! `alpha_i (z_i - s_i)^2 + (1 - alpha_i) sum_{j in N+(i)} |w_ij| (z_i - sgn(w_ij) z_j)^2`.
//! Setting every derivative to zero gives the linear system
//! `M z = Lambda s` with `M = Lambda + (I - Lambda) L`, which is strictly
//! diagonally dominant whenever every `alpha_i` lies in `(0, 1)`.

use rayon::prelude::*;

use crate::confidence::ConfidenceVector;
use crate::error::{Error, Result};
use crate::graph::SignedDigraph;
use crate::linalg::{dense_lu_solve, gmres, GmresOptions, SparseMatrix};
use crate::scalar::{dist_inf, norm_inf, Scalar};

/// Rows per sweep above which Jacobi sweeps run on the rayon pool.
const PARALLEL_ROWS: usize = 4096;

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions<T> {
    /// Relative residual target: `||M z - b||_inf <= tol * max(1, ||b||_inf)`.
    pub tol: T,
    /// Systems up to this size are solved by dense LU.
    pub dense_threshold: usize,
    pub gmres_restart: usize,
    pub max_iter: usize,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        SolverOptions { tol: T::lit(1e-10), dense_threshold: 64, gmres_restart: 60, max_iter: 20_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumResult<T> {
    pub z_star: Vec<T>,
    /// 0 for the dense direct route.
    pub iterations: usize,
    /// `||M z* - Lambda s||_inf`
    pub residual: T,
}

/// The game on a fixed graph with fixed confidence indices.
#[derive(Debug, Clone)]
pub struct GodmSystem<'g, T> {
    graph: &'g SignedDigraph<T>,
    alpha: ConfidenceVector<T>,
    /// `d_ii`, absolute out-strength.
    strength: Vec<T>,
    matrix: SparseMatrix<T>,
}

impl<'g, T: Scalar> GodmSystem<'g, T> {
    pub fn new(graph: &'g SignedDigraph<T>, alpha: ConfidenceVector<T>) -> Result<Self> {
        let n = graph.node_count();
        if alpha.len() != n {
            return Err(Error::Dimension { expected: n, got: alpha.len() });
        }
        let a = alpha.values();
        if let Some(i) = a.iter().position(|ai| !(*ai > T::zero() && *ai < T::one())) {
            return Err(Error::NotDiagonallyDominant { row: i });
        }
        let strength: Vec<T> = (0..n).map(|i| graph.out_strength_unchecked(i)).collect();
        let rows = (0..n)
            .map(|i| {
                let off = T::one() - a[i];
                let mut row = Vec::with_capacity(graph.out_degree(i) + 1);
                row.push((i, a[i] + off * strength[i]));
                row.extend(graph.successors(i).map(|(j, w)| (j, -off * w)));
                row
            })
            .collect();
        let matrix = SparseMatrix::from_rows(rows);
        matrix.check_row_dominance().map_err(|row| Error::NotDiagonallyDominant { row })?;
        Ok(GodmSystem { graph, alpha, strength, matrix })
    }

    pub fn graph(&self) -> &'g SignedDigraph<T> {
        self.graph
    }

    pub fn alpha(&self) -> &ConfidenceVector<T> {
        &self.alpha
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    /// `M = Lambda + (I - Lambda) L` in sparse form.
    pub fn matrix(&self) -> &SparseMatrix<T> {
        &self.matrix
    }

    /// `Lambda s`
    pub fn rhs(&self, s: &[T]) -> Vec<T> {
        self.alpha.values().iter().zip(s).map(|(a, si)| *a * *si).collect()
    }

    fn check_vec(&self, v: &[T]) -> Result<()> {
        if v.len() == self.node_count() {
            Ok(())
        } else {
            Err(Error::Dimension { expected: self.node_count(), got: v.len() })
        }
    }

    fn check_opinions(&self, s: &[T]) -> Result<()> {
        self.check_vec(s)?;
        check_feasible(s)
    }

    /// Cost node `i` pays for expressing `z_i` given everyone else's `z`.
    pub fn node_cost(&self, i: usize, z: &[T], s: &[T]) -> Result<T> {
        self.check_vec(z)?;
        self.check_vec(s)?;
        if i >= self.node_count() {
            return Err(Error::NodeOutOfRange { index: i, n: self.node_count() });
        }
        let a = self.alpha.values()[i];
        let own = a * (z[i] - s[i]).powi(2);
        let social: T = self
            .graph
            .successors(i)
            .map(|(j, w)| w.abs() * (z[i] - w.signum() * z[j]).powi(2))
            .sum();
        Ok(own + (T::one() - a) * social)
    }

    /// `d cost_i / d z_i`
    pub fn node_cost_derivative(&self, i: usize, z: &[T], s: &[T]) -> T {
        let a = self.alpha.values()[i];
        let two = T::lit(2.0);
        let social: T = self
            .graph
            .successors(i)
            .map(|(j, w)| w.abs() * (z[i] - w.signum() * z[j]))
            .sum();
        two * a * (z[i] - s[i]) + two * (T::one() - a) * social
    }

    fn solve_with(&self, matrix: &SparseMatrix<T>, b: &[T], opts: &SolverOptions<T>) -> Result<(Vec<T>, usize)> {
        let bound = opts.tol * norm_inf(b).max(T::one());
        let n = matrix.dim();
        let (x, iterations) = if n <= opts.dense_threshold {
            let dense = matrix.to_dense();
            let mut x = dense_lu_solve(dense.clone(), b.to_vec())?;
            // One round of refinement recovers digits lost to pivot growth.
            let r: Vec<T> = matrix.mul_vec(&x).iter().zip(b).map(|(ax, bi)| *bi - *ax).collect();
            if norm_inf(&r) > T::zero() {
                let dx = dense_lu_solve(dense, r)?;
                for (xi, di) in x.iter_mut().zip(dx) {
                    *xi += di;
                }
            }
            (x, 0)
        } else {
            gmres(
                matrix,
                b,
                None,
                GmresOptions { tol: bound * T::half(), restart: opts.gmres_restart, max_iter: opts.max_iter },
            )?
        };
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite solution".into()));
        }
        let residual = matrix.residual_inf(&x, b);
        if residual > bound {
            return Err(Error::Numerical(format!(
                "linear solve residual {residual} exceeds {bound}"
            )));
        }
        Ok((x, iterations))
    }

    /// Solves `M z = Lambda s` directly: dense LU for small systems,
    /// Jacobi-preconditioned GMRES above `dense_threshold`.
    pub fn equilibrium_direct(&self, s: &[T], opts: &SolverOptions<T>) -> Result<EquilibriumResult<T>> {
        self.check_opinions(s)?;
        let b = self.rhs(s);
        let (z_star, iterations) = self.solve_with(&self.matrix, &b, opts)?;
        let residual = self.matrix.residual_inf(&z_star, &b);
        Ok(EquilibriumResult { z_star, iterations, residual })
    }

    /// One synchronous best-response sweep: every node moves to the
    /// minimizer of its own cost given the previous `z`.
    pub fn best_response(&self, z: &[T], s: &[T], out: &mut [T]) {
        let a = self.alpha.values();
        let step = |(i, zi): (usize, &mut T)| {
            let off = T::one() - a[i];
            let pull: T = self.graph.successors(i).map(|(j, w)| w * z[j]).sum();
            *zi = (a[i] * s[i] + off * pull) / (a[i] + off * self.strength[i]);
        };
        if out.len() >= PARALLEL_ROWS {
            out.par_iter_mut().enumerate().for_each(step);
        } else {
            out.iter_mut().enumerate().for_each(step);
        }
    }

    /// Repeats [`Self::best_response`] from `z = s` until successive
    /// iterates differ by less than `tol` in max-norm.
    pub fn equilibrium_iterative(&self, s: &[T], tol: T, max_iter: usize) -> Result<EquilibriumResult<T>> {
        self.check_opinions(s)?;
        if !(tol > T::zero()) {
            return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
        }
        let mut z = s.to_vec();
        let mut next = vec![T::zero(); s.len()];
        let mut change = T::infinity();
        for k in 1..=max_iter {
            self.best_response(&z, s, &mut next);
            change = dist_inf(&z, &next);
            std::mem::swap(&mut z, &mut next);
            if !change.is_finite() {
                return Err(Error::Numerical("best-response iteration diverged".into()));
            }
            if change < tol {
                let residual = self.matrix.residual_inf(&z, &self.rhs(s));
                return Ok(EquilibriumResult { z_star: z, iterations: k, residual });
            }
        }
        Err(Error::NotConverged { what: "best-response iteration", iterations: max_iter, residual: change.as_f64() })
    }

    /// `g = 1^T M^{-1} Lambda`, from one transpose solve `M^T y = 1` and
    /// `g_i = alpha_i y_i`. Satisfies `g . s = sum_i z*_i(s)` for every `s`.
    pub fn contribution_index(&self, opts: &SolverOptions<T>) -> Result<Vec<T>> {
        let n = self.node_count();
        let ones = vec![T::one(); n];
        let transposed = self.matrix.transpose();
        let (y, _) = self.solve_with(&transposed, &ones, opts)?;
        Ok(self.alpha.values().iter().zip(y).map(|(a, yi)| *a * yi).collect())
    }
}

/// Sum of the expressed opinions.
pub fn overall_opinion<T: Scalar>(z_star: &[T]) -> T {
    z_star.iter().copied().sum()
}

pub(crate) fn check_feasible<T: Scalar>(s: &[T]) -> Result<()> {
    match s.iter().position(|v| !(*v >= -T::one() && *v <= T::one())) {
        Some(i) => Err(Error::InfeasibleOpinion { index: i, value: s[i].as_f64() }),
        None => Ok(()),
    }
}
