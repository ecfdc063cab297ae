//! Budgeted internal-opinion maximization by contribution-index order, and
//! the heuristic baselines it is compared against.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{SignedDigraph, TrustSum};
use crate::ingest::rng_from_seed;
use crate::scalar::{dot, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Greedy,
    Admm,
    Rand,
    Trust,
    Io,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Greedy, Method::Admm, Method::Rand, Method::Trust, Method::Io];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Greedy => "greedy",
            Method::Admm => "admm",
            Method::Rand => "rand",
            Method::Trust => "trust",
            Method::Io => "io",
        }
    }

    pub fn is_baseline(self) -> bool {
        matches!(self, Method::Rand | Method::Trust | Method::Io)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    #[default]
    Maximize,
    /// Handled as maximization on the negated contribution index.
    Minimize,
}

impl Objective {
    /// Direction opinions are pushed in.
    pub fn direction<T: Scalar>(self) -> T {
        match self {
            Objective::Maximize => T::one(),
            Objective::Minimize => -T::one(),
        }
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "max" | "maximize" => Ok(Objective::Maximize),
            "min" | "minimize" => Ok(Objective::Minimize),
            _ => Err(Error::InvalidParameter(format!("unknown objective {s:?}"))),
        }
    }
}

/// A modification `delta_s` of the internal opinions.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationPlan<T> {
    pub delta_s: Vec<T>,
    /// `||delta_s||_1`
    pub spent: T,
    /// Nonzero modifications in the order they were made.
    pub touched: Vec<(usize, T)>,
    pub method: Method,
}

impl<T: Scalar> AllocationPlan<T> {
    pub fn zero(n: usize, method: Method) -> Self {
        AllocationPlan { delta_s: vec![T::zero(); n], spent: T::zero(), touched: Vec::new(), method }
    }

    fn push(&mut self, i: usize, amount: T) {
        self.delta_s[i] += amount;
        self.spent += amount.abs();
        self.touched.push((i, amount));
    }

    /// `s + delta_s`
    pub fn apply(&self, s: &[T]) -> Vec<T> {
        s.iter().zip(&self.delta_s).map(|(a, b)| *a + *b).collect()
    }
}

fn check_budget<T: Scalar>(mu: T) -> Result<()> {
    if mu >= T::zero() && mu.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("budget must be finite and nonnegative, got {mu}")))
    }
}

/// Pushes node `i` toward `sign` (+-1), spending at most `budget`.
/// Returns the signed modification, zero if the node is already there.
#[inline]
fn push_toward<T: Scalar>(s_i: T, sign: T, budget: T) -> T {
    let cost = T::one() - sign * s_i;
    if cost <= T::zero() {
        return T::zero();
    }
    sign * cost.min(budget)
}

/// Order in which the greedy allocator visits nodes: decreasing `|g_i|`,
/// ties by lower index, zero contributions excluded.
pub fn contribution_order<T: Scalar>(g: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..g.len()).filter(|&i| g[i] != T::zero()).collect();
    order.sort_by(|&a, &b| {
        g[b].abs().partial_cmp(&g[a].abs()).unwrap_or(Ordering::Equal).then(a.cmp(&b))
    });
    order
}

/// Optimal allocation of an L1 budget `mu` over box-feasible opinion
/// changes, visiting nodes by decreasing `|g_i|` and moving each to
/// `sign(g_i)` until the budget runs out (the last node partially).
///
/// Leftover budget after every useful node saturates is left unspent.
pub fn greedy_allocate<T: Scalar>(g: &[T], s: &[T], mu: T, objective: Objective) -> Result<AllocationPlan<T>> {
    if g.len() != s.len() {
        return Err(Error::Dimension { expected: s.len(), got: g.len() });
    }
    crate::dynamics::check_feasible(s)?;
    check_budget(mu)?;
    let dir: T = objective.direction();
    let coef: Vec<T> = g.iter().map(|v| *v * dir).collect();

    let mut plan = AllocationPlan::zero(s.len(), Method::Greedy);
    let mut budget = mu;
    for i in contribution_order(&coef) {
        if budget <= T::zero() {
            break;
        }
        let amount = push_toward(s[i], coef[i].signum(), budget);
        if amount == T::zero() {
            continue;
        }
        budget = (budget - amount.abs()).max(T::zero());
        plan.push(i, amount);
    }
    Ok(plan)
}

/// `g . delta_s`: change in overall opinion produced by the plan.
pub fn benefit<T: Scalar>(g: &[T], plan: &AllocationPlan<T>) -> T {
    dot(g, &plan.delta_s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Ranking {
    /// Uniformly random permutation.
    Rand { seed: u64 },
    /// Descending signed in-trust `sum_j a_ji`.
    Trust,
    /// Ascending internal opinion.
    Io,
}

/// Node visiting order for a baseline heuristic. Ties keep index order.
pub fn rank_nodes<T: Scalar>(graph: &SignedDigraph<T>, s: &[T], ranking: Ranking) -> Result<Vec<usize>> {
    let n = graph.node_count();
    if s.len() != n {
        return Err(Error::Dimension { expected: n, got: s.len() });
    }
    let mut order: Vec<usize> = (0..n).collect();
    match ranking {
        Ranking::Rand { seed } => order.shuffle(&mut rng_from_seed(seed)),
        Ranking::Trust => {
            let key: Vec<T> = (0..n).map(|i| graph.in_trust_sum_unchecked(i, TrustSum::Signed)).collect();
            order.sort_by(|&a, &b| key[b].partial_cmp(&key[a]).unwrap_or(Ordering::Equal));
        }
        Ranking::Io => order.sort_by(|&a, &b| s[a].partial_cmp(&s[b]).unwrap_or(Ordering::Equal)),
    }
    Ok(order)
}

/// Walks `ordering`, moving each node fully toward the objective's
/// direction (`+1` when maximizing) until the budget is spent.
pub fn baseline_allocate<T: Scalar>(
    ordering: &[usize],
    s: &[T],
    mu: T,
    objective: Objective,
    method: Method,
) -> Result<AllocationPlan<T>> {
    crate::dynamics::check_feasible(s)?;
    check_budget(mu)?;
    let n = s.len();
    let mut seen = vec![false; n];
    for &i in ordering {
        if i >= n || std::mem::replace(&mut seen[i], true) {
            return Err(Error::InvalidParameter("ordering is not a permutation of the nodes".into()));
        }
    }
    let sign: T = objective.direction();
    let mut plan = AllocationPlan::zero(n, method);
    let mut budget = mu;
    for &i in ordering {
        if budget <= T::zero() {
            break;
        }
        let amount = push_toward(s[i], sign, budget);
        if amount == T::zero() {
            continue;
        }
        budget = (budget - amount.abs()).max(T::zero());
        plan.push(i, amount);
    }
    Ok(plan)
}
