//! ADMM for the budgeted problem written as
//! `min -g.x + lambda ||x||_1  s.t.  a <= x <= b`,
//! with `a_i = -1 - s_i`, `b_i = 1 - s_i`, split as `x = z` so the box
//! lives on `x` and the L1 term on `z`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::greedy::{contribution_order, AllocationPlan, Method};
use crate::scalar::{dot, norm_l1, norm_l2, Scalar};

/// `S_kappa(v)`: shrink `v` toward zero by `kappa`.
#[inline]
pub fn soft_threshold<T: Scalar>(v: T, kappa: T) -> T {
    if v > kappa {
        v - kappa
    } else if v < -kappa {
        v + kappa
    } else {
        T::zero()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmParams {
    pub rho: f64,
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub max_iter: usize,
    /// Record one [`TraceRow`] per iteration.
    #[serde(default)]
    pub trace: bool,
    /// Residual balancing: double `rho` while the primal residual exceeds
    /// ten times the dual one, halve it in the opposite case. `rho` is then
    /// only the starting value.
    #[serde(default)]
    pub adaptive_rho: bool,
}

impl Default for AdmmParams {
    fn default() -> Self {
        AdmmParams { rho: 1.0, tol_abs: 1e-9, tol_rel: 1e-9, max_iter: 5000, trace: false, adaptive_rho: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState<T> {
    /// Box-feasible iterate.
    pub x: Vec<T>,
    /// Sparse iterate.
    pub z: Vec<T>,
    /// Scaled dual.
    pub u: Vec<T>,
    pub rho: T,
    pub lambda: T,
    pub iterations: usize,
    /// `||x - z||_2`
    pub primal_residual: T,
    /// `rho ||z_k - z_{k-1}||_2`
    pub dual_residual: T,
    pub trace: Vec<TraceRow>,
}

/// `-g.x + lambda ||x||_1`
pub fn objective<T: Scalar>(g: &[T], x: &[T], lambda: T) -> T {
    lambda * norm_l1(x) - dot(g, x)
}

fn bounds<T: Scalar>(s: &[T]) -> (Vec<T>, Vec<T>) {
    let lo = s.iter().map(|si| -T::one() - *si).collect();
    let hi = s.iter().map(|si| T::one() - *si).collect();
    (lo, hi)
}

fn check_inputs<T: Scalar>(g: &[T], s: &[T], lambda: T) -> Result<()> {
    if g.len() != s.len() {
        return Err(Error::Dimension { expected: s.len(), got: g.len() });
    }
    crate::dynamics::check_feasible(s)?;
    if !(lambda >= T::zero() && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be finite and nonnegative, got {lambda}")));
    }
    Ok(())
}

fn plan_from<T: Scalar>(delta_s: Vec<T>) -> AllocationPlan<T> {
    let touched: Vec<(usize, T)> =
        delta_s.iter().enumerate().filter(|(_, v)| **v != T::zero()).map(|(i, v)| (i, *v)).collect();
    AllocationPlan { spent: norm_l1(&delta_s), delta_s, touched, method: Method::Admm }
}

/// Runs scaled-form ADMM from `x = z = u = 0`.
///
/// Stops once `||x - z||_2 <= sqrt(n) tol_abs + tol_rel max(||x||, ||z||)`
/// and `rho ||z - z_prev||_2 <= sqrt(n) tol_abs + tol_rel rho ||u||`. The
/// returned plan is `z` clipped to the box.
pub fn admm_solve<T: Scalar>(g: &[T], s: &[T], lambda: T, params: &AdmmParams) -> Result<(AllocationPlan<T>, AdmmState<T>)> {
    check_inputs(g, s, lambda)?;
    if !(params.rho > 0.0 && params.rho.is_finite()) {
        return Err(Error::InvalidParameter(format!("rho must be positive, got {}", params.rho)));
    }
    let n = g.len();
    let mut rho = T::lit(params.rho);
    let sqrt_n = T::from_usize(n).unwrap().sqrt();
    let (tol_abs, tol_rel) = (T::lit(params.tol_abs), T::lit(params.tol_rel));
    let (lo, hi) = bounds(s);

    let mut st = AdmmState {
        x: vec![T::zero(); n],
        z: vec![T::zero(); n],
        u: vec![T::zero(); n],
        rho,
        lambda,
        iterations: 0,
        primal_residual: T::infinity(),
        dual_residual: T::infinity(),
        trace: Vec::new(),
    };
    for k in 1..=params.max_iter {
        let (mut pri, mut dual) = (T::zero(), T::zero());
        let kappa = lambda / rho;
        for i in 0..n {
            let x = (st.z[i] - st.u[i] + g[i] / rho).max(lo[i]).min(hi[i]);
            let z = soft_threshold(x + st.u[i], kappa);
            dual += (z - st.z[i]).powi(2);
            pri += (x - z).powi(2);
            st.u[i] += x - z;
            st.x[i] = x;
            st.z[i] = z;
        }
        st.iterations = k;
        st.primal_residual = pri.sqrt();
        st.dual_residual = rho * dual.sqrt();
        if !(st.primal_residual.is_finite() && st.dual_residual.is_finite()) {
            return Err(Error::Numerical(format!("ADMM produced a non-finite residual at iteration {k}")));
        }
        if params.trace {
            st.trace.push(TraceRow {
                iteration: k,
                primal_residual: st.primal_residual.as_f64(),
                dual_residual: st.dual_residual.as_f64(),
                objective: objective(g, &st.z, lambda).as_f64(),
            });
        }
        let eps_pri = sqrt_n * tol_abs + tol_rel * norm_l2(&st.x).max(norm_l2(&st.z));
        let eps_dual = sqrt_n * tol_abs + tol_rel * rho * norm_l2(&st.u);
        if st.primal_residual <= eps_pri && st.dual_residual <= eps_dual {
            let delta = st.z.iter().zip(lo.iter().zip(&hi)).map(|(z, (l, h))| z.max(*l).min(*h)).collect();
            return Ok((plan_from(delta), st));
        }
        if params.adaptive_rho {
            let (ten, two) = (T::lit(10.0), T::lit(2.0));
            let scale = if st.primal_residual > ten * st.dual_residual && rho < T::lit(1e8) {
                two
            } else if st.dual_residual > ten * st.primal_residual && rho > T::lit(1e-8) {
                T::half()
            } else {
                T::one()
            };
            if scale != T::one() {
                rho *= scale;
                st.u.iter_mut().for_each(|u| *u /= scale);
                st.rho = rho;
            }
        }
    }
    Err(Error::NotConverged {
        what: "ADMM",
        iterations: params.max_iter,
        residual: st.primal_residual.max(st.dual_residual).as_f64(),
    })
}

/// Exact minimizer of the separable problem: each coordinate goes to the
/// bound favoured by `g_i` when `|g_i| > lambda`, otherwise stays at 0.
pub fn coordinate_oracle<T: Scalar>(g: &[T], s: &[T], lambda: T) -> Vec<T> {
    g.iter()
        .zip(s)
        .map(|(gi, si)| {
            if *gi > lambda {
                T::one() - *si
            } else if *gi < -lambda {
                -T::one() - *si
            } else {
                T::zero()
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration<T> {
    /// Smallest `lambda` whose oracle allocation fits the budget.
    pub lambda: T,
    /// Oracle allocation at `lambda` plus the partial marginal step.
    pub delta_s: Vec<T>,
}

/// Spends what is left of `mu` on nodes with `|g_i| <= threshold`, in
/// contribution order, exactly like the greedy partial step.
fn fill_marginal<T: Scalar>(g: &[T], s: &[T], delta: &mut [T], mu: T, threshold: T) -> Vec<(usize, T)> {
    let mut left = mu - norm_l1(delta);
    let mut filled = Vec::new();
    for i in contribution_order(g) {
        if left <= T::zero() {
            break;
        }
        if g[i].abs() > threshold || delta[i] != T::zero() {
            continue;
        }
        let sign = g[i].signum();
        let cost = T::one() - sign * s[i];
        if cost <= T::zero() {
            continue;
        }
        let amount = sign * cost.min(left);
        left -= amount.abs();
        delta[i] = amount;
        filled.push((i, amount));
    }
    filled
}

/// Maps a budget `mu` to an L1 weight `lambda` by bisection on the oracle's
/// spend `||x(lambda)||_1`, a nonincreasing step function, then spends the
/// leftover on the marginal node(s).
///
/// `tol_lambda` bounds the bisection bracket; the result is snapped to the
/// breakpoint `|g_k|` so it does not depend on the bracket width.
pub fn calibrate_lambda<T: Scalar>(g: &[T], s: &[T], mu: T, tol_lambda: T) -> Result<Calibration<T>> {
    check_inputs(g, s, T::zero())?;
    if !(mu >= T::zero() && mu.is_finite()) {
        return Err(Error::InvalidParameter(format!("budget must be finite and nonnegative, got {mu}")));
    }
    let spend = |lambda: T| norm_l1(&coordinate_oracle(g, s, lambda));

    let lambda = if spend(T::zero()) <= mu {
        T::zero()
    } else {
        let (mut lo, mut hi) = (T::zero(), g.iter().fold(T::zero(), |m, v| m.max(v.abs())));
        for _ in 0..200 {
            if hi - lo <= tol_lambda {
                break;
            }
            let mid = lo + (hi - lo) * T::half();
            if mid <= lo || mid >= hi {
                break;
            }
            if spend(mid) <= mu {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        // Smallest lambda with the same active set as `hi`.
        g.iter().map(|v| v.abs()).filter(|v| *v <= hi).fold(T::zero(), T::max)
    };
    let mut delta_s = coordinate_oracle(g, s, lambda);
    fill_marginal(g, s, &mut delta_s, mu, lambda);
    Ok(Calibration { lambda, delta_s })
}

/// Result of budget-driven ADMM.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetedAdmm<T> {
    pub plan: AllocationPlan<T>,
    pub state: AdmmState<T>,
    /// Calibrated breakpoint.
    pub lambda: T,
    /// Value ADMM actually ran at: the midpoint of the wider gap between the
    /// breakpoint and its neighbouring `|g_i|`, so the minimizer is unique.
    pub lambda_run: T,
}

/// Solves the budget-constrained problem with ADMM: calibrate `lambda` to
/// `mu`, run ADMM there, then spend the leftover on the marginal node.
pub fn admm_allocate_budget<T: Scalar>(g: &[T], s: &[T], mu: T, params: &AdmmParams) -> Result<BudgetedAdmm<T>> {
    let cal = calibrate_lambda(g, s, mu, T::zero())?;
    let above = g.iter().map(|v| v.abs()).filter(|v| *v > cal.lambda).fold(T::infinity(), T::min);
    let below = g.iter().map(|v| v.abs()).filter(|v| *v < cal.lambda).fold(T::zero(), T::max);
    let upper = if above.is_finite() { above - cal.lambda } else { T::lit(2.0) };
    // The active set is the same anywhere strictly inside either interval
    // around the breakpoint, up to the marginal nodes; ADMM needs about
    // 1 / gap iterations, so run in the wider one.
    let lambda_run = if cal.lambda > T::zero() && cal.lambda - below > upper {
        below + (cal.lambda - below) * T::half()
    } else {
        cal.lambda + upper * T::half()
    };
    let (mut plan, state) = admm_solve(g, s, lambda_run, params)?;
    if lambda_run < cal.lambda {
        for (i, gi) in g.iter().enumerate() {
            if gi.abs() == cal.lambda {
                plan.delta_s[i] = T::zero();
            }
        }
        plan.touched.retain(|(i, _)| g[*i].abs() != cal.lambda);
    }
    let filled = fill_marginal(g, s, &mut plan.delta_s, mu, cal.lambda);
    plan.touched.extend(filled);
    plan.spent = norm_l1(&plan.delta_s);
    if plan.spent > mu * (T::one() + T::lit(1e-12)) + T::lit(1e-12) {
        return Err(Error::CrossCheck(format!("ADMM plan spends {} over budget {mu}", plan.spent)));
    }
    Ok(BudgetedAdmm { plan, state, lambda: cal.lambda, lambda_run })
}
