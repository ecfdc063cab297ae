//! Per-node confidence indices: fixed, or derived from PageRank and the
//! mean incoming evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SignedDigraph;
use crate::scalar::Scalar;

pub const DEFAULT_DAMPING: f64 = 0.85;
pub const DEFAULT_Q: f64 = 0.5;
/// Keeps every confidence index strictly inside `(0, 1)`.
pub const DEFAULT_CLAMP: f64 = 1e-6;
pub const DEFAULT_PR_TOL: f64 = 1e-12;
pub const DEFAULT_PR_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PageRankParams {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PageRankParams {
    fn default() -> Self {
        PageRankParams { damping: DEFAULT_DAMPING, tol: DEFAULT_PR_TOL, max_iter: DEFAULT_PR_MAX_ITER }
    }
}

/// How a [`ConfidenceVector`] was produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum ConfidenceMode {
    Fixed { alpha: f64 },
    Adjusted { q: f64, damping: f64 },
    /// Caller-supplied per-node values.
    Explicit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceVector<T> {
    alpha: Vec<T>,
    pub mode: ConfidenceMode,
    pub clamp: T,
    /// Mean evaluation and normalized PageRank, kept for reporting when the
    /// vector was adjusted.
    pub provenance: Option<(Vec<T>, Vec<T>)>,
}

impl<T: Scalar> ConfidenceVector<T> {
    pub fn values(&self) -> &[T] {
        &self.alpha
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    /// Per-node values, each clamped into `[eps, 1 - eps]`.
    pub fn explicit(alpha: Vec<T>, eps: T) -> Result<Self> {
        check_clamp(eps)?;
        if let Some(i) = alpha.iter().position(|a| !a.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha[{i}] is not finite")));
        }
        let alpha = alpha.into_iter().map(|a| clamp(a, eps)).collect();
        Ok(ConfidenceVector { alpha, mode: ConfidenceMode::Explicit, clamp: eps, provenance: None })
    }
}

fn check_clamp<T: Scalar>(eps: T) -> Result<()> {
    if eps > T::zero() && eps < T::half() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("clamp epsilon must be in (0, 1/2), got {eps}")))
    }
}

#[inline]
fn clamp<T: Scalar>(a: T, eps: T) -> T {
    a.max(eps).min(T::one() - eps)
}

/// PageRank on the unweighted, sign-ignored successor structure, divided by
/// its maximum so the top node scores exactly 1.
///
/// Teleport mass is `(1 - d) / N` and sinks spread their rank uniformly.
/// Iterates until the L1 change drops below `tol`.
pub fn pagerank<T: Scalar>(graph: &SignedDigraph<T>, params: PageRankParams) -> Result<Vec<T>> {
    let n = graph.node_count();
    let PageRankParams { damping, tol, max_iter } = params;
    if n == 0 {
        return Err(Error::InvalidParameter("PageRank needs at least one node".into()));
    }
    if !(damping > 0.0 && damping < 1.0) {
        return Err(Error::InvalidParameter(format!("damping must be in (0, 1), got {damping}")));
    }
    let d = T::lit(damping);
    let nf = T::from_usize(n).unwrap();
    let teleport = (T::one() - d) / nf;
    let out_deg: Vec<T> = (0..n).map(|i| T::from_usize(graph.out_degree(i)).unwrap()).collect();

    let mut rank = vec![T::one() / nf; n];
    let mut next = vec![T::zero(); n];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let dangling: T = (0..n).filter(|&u| graph.out_degree(u) == 0).map(|u| rank[u]).sum();
        let base = teleport + d * dangling / nf;
        for (v, nv) in next.iter_mut().enumerate() {
            let inflow: T = graph.predecessors(v).map(|(u, _)| rank[u] / out_deg[u]).sum();
            *nv = base + d * inflow;
        }
        residual = rank.iter().zip(&next).map(|(a, b)| (*a - *b).abs()).sum::<T>().as_f64();
        std::mem::swap(&mut rank, &mut next);
        if residual < tol {
            let max = rank.iter().fold(T::zero(), |m, r| m.max(*r));
            return Ok(rank.into_iter().map(|r| r / max).collect());
        }
    }
    Err(Error::NotConverged { what: "PageRank", iterations: max_iter, residual })
}

/// Mean weight of the edges pointing at each node; 0 for nodes nobody rates.
pub fn mean_evaluation<T: Scalar>(graph: &SignedDigraph<T>) -> Vec<T> {
    (0..graph.node_count())
        .map(|i| {
            let k = graph.in_degree(i);
            if k == 0 {
                T::zero()
            } else {
                graph.predecessors(i).map(|(_, w)| w).sum::<T>() / T::from_usize(k).unwrap()
            }
        })
        .collect()
}

/// `alpha_i = clamp(max(0, q m_i + (1 - q) r_i), eps, 1 - eps)`.
pub fn combine<T: Scalar>(m: T, r: T, q: T, eps: T) -> T {
    clamp((q * m + (T::one() - q) * r).max(T::zero()), eps)
}

pub fn confidence_adjusted<T: Scalar>(
    graph: &SignedDigraph<T>,
    q: f64,
    pagerank_params: PageRankParams,
    eps: T,
) -> Result<ConfidenceVector<T>> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidParameter(format!("q must be in [0, 1], got {q}")));
    }
    check_clamp(eps)?;
    let r = pagerank(graph, pagerank_params)?;
    let m = mean_evaluation(graph);
    let qt = T::lit(q);
    let alpha = m.iter().zip(&r).map(|(mi, ri)| combine(*mi, *ri, qt, eps)).collect();
    Ok(ConfidenceVector {
        alpha,
        mode: ConfidenceMode::Adjusted { q, damping: pagerank_params.damping },
        clamp: eps,
        provenance: Some((m, r)),
    })
}

pub fn confidence_fixed<T: Scalar>(n: usize, alpha: f64, eps: T) -> Result<ConfidenceVector<T>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("fixed alpha must be in (0, 1), got {alpha}")));
    }
    check_clamp(eps)?;
    Ok(ConfidenceVector {
        alpha: vec![clamp(T::lit(alpha), eps); n],
        mode: ConfidenceMode::Fixed { alpha },
        clamp: eps,
        provenance: None,
    })
}
