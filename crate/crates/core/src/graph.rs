//! Signed, weighted, directed trust networks.
//!
//! Edge `(i, j, w)` means node `i` trusts (`w > 0`) or distrusts (`w < 0`)
//! node `j` with strength `|w| <= 1`. Both the successor and the
//! predecessor structure are stored in compressed-row form so every
//! downstream formula can walk rows or columns in `O(degree)`.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Compressed adjacency: the neighbours of node `i` are
/// `targets[offsets[i]..offsets[i + 1]]`.
#[derive(Debug, Clone, PartialEq)]
struct Csr<T> {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<T>,
}

impl<T: Scalar> Csr<T> {
    fn from_triples(n: usize, triples: impl Iterator<Item = (usize, usize, T)> + Clone) -> Self {
        let mut counts = vec![0usize; n + 1];
        for (row, _, _) in triples.clone() {
            counts[row + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let m = counts[n];
        let mut cursor = counts.clone();
        let mut targets = vec![0usize; m];
        let mut weights = vec![T::zero(); m];
        for (row, col, w) in triples {
            let k = cursor[row];
            targets[k] = col;
            weights[k] = w;
            cursor[row] += 1;
        }
        Csr { offsets: counts, targets, weights }
    }

    #[inline]
    fn row(&self, i: usize) -> impl ExactSizeIterator<Item = (usize, T)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.targets[r.clone()].iter().copied().zip(self.weights[r].iter().copied())
    }

    #[inline]
    fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }
}

/// Immutable signed weighted digraph with dense node indices `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedDigraph<T> {
    labels: Vec<String>,
    succ: Csr<T>,
    pred: Csr<T>,
    /// Successor-array positions in the order edges were supplied.
    insertion: Vec<usize>,
}

/// Counters produced while building a graph from labelled records.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildStats {
    pub dropped_self_loops: usize,
}

/// Which column sum [`SignedDigraph::in_trust_sum`] computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrustSum {
    /// `sum_j w_ji`
    Signed,
    /// `sum_j |w_ji|`
    Absolute,
}

fn check_weight<T: Scalar>(w: T) -> bool {
    w.is_finite() && w != T::zero() && w.abs() <= T::one()
}

/// Builds a graph from `(src_label, dst_label, weight)` records.
///
/// Labels get dense indices in first-appearance order. Self-loops are
/// dropped and counted. Duplicate ordered pairs are rejected; run
/// [`crate::ingest::dedupe_edges`] first.
pub fn build_graph<T, S>(records: &[(S, S, T)]) -> Result<(SignedDigraph<T>, BuildStats)>
where
    T: Scalar,
    S: AsRef<str>,
{
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut labels: Vec<String> = Vec::new();
    let mut edges: Vec<(usize, usize, T)> = Vec::with_capacity(records.len());
    let mut seen: HashSet<(usize, usize)> = HashSet::with_capacity(records.len());
    let mut stats = BuildStats::default();

    for (k, (src, dst, w)) in records.iter().enumerate() {
        let (src, dst) = (src.as_ref(), dst.as_ref());
        if src.is_empty() || dst.is_empty() {
            return Err(Error::EmptyLabel { index: k });
        }
        if !check_weight(*w) {
            return Err(Error::WeightOutOfRange {
                src: src.to_string(),
                dst: dst.to_string(),
                weight: w.as_f64(),
            });
        }
        let mut intern = |label: &str| -> usize {
            if let Some(&i) = index.get(label) {
                return i;
            }
            labels.push(label.to_string());
            index.insert(label.to_string(), labels.len() - 1);
            labels.len() - 1
        };
        let i = intern(src);
        let j = intern(dst);
        if i == j {
            stats.dropped_self_loops += 1;
            continue;
        }
        if !seen.insert((i, j)) {
            return Err(Error::DuplicateEdge { src: src.to_string(), dst: dst.to_string() });
        }
        edges.push((i, j, *w));
    }
    if stats.dropped_self_loops > 0 {
        log::warn!("dropped {} self-loop(s)", stats.dropped_self_loops);
    }
    Ok((SignedDigraph::assemble(labels, &edges), stats))
}

impl<T: Scalar> SignedDigraph<T> {
    fn assemble(labels: Vec<String>, edges: &[(usize, usize, T)]) -> Self {
        let n = labels.len();
        let succ = Csr::from_triples(n, edges.iter().copied());
        let pred = Csr::from_triples(n, edges.iter().map(|&(i, j, w)| (j, i, w)));
        let mut cursor = succ.offsets.clone();
        let insertion = edges
            .iter()
            .map(|&(i, _, _)| {
                cursor[i] += 1;
                cursor[i] - 1
            })
            .collect();
        SignedDigraph { labels, succ, pred, insertion }
    }

    /// Graph over nodes `0..n` labelled by their decimal index.
    ///
    /// Self-loops are dropped; duplicates and invalid weights are errors.
    pub fn from_indexed_edges(n: usize, edges: &[(usize, usize, T)]) -> Result<Self> {
        let mut seen = HashSet::with_capacity(edges.len());
        let mut kept = Vec::with_capacity(edges.len());
        for &(i, j, w) in edges {
            for v in [i, j] {
                if v >= n {
                    return Err(Error::NodeOutOfRange { index: v, n });
                }
            }
            if !check_weight(w) {
                return Err(Error::WeightOutOfRange {
                    src: i.to_string(),
                    dst: j.to_string(),
                    weight: w.as_f64(),
                });
            }
            if i == j {
                continue;
            }
            if !seen.insert((i, j)) {
                return Err(Error::DuplicateEdge { src: i.to_string(), dst: j.to_string() });
            }
            kept.push((i, j, w));
        }
        Ok(Self::assemble((0..n).map(|i| i.to_string()).collect(), &kept))
    }

    /// Graph with `n` nodes and no edges.
    pub fn edgeless(n: usize) -> Self {
        Self::assemble((0..n).map(|i| i.to_string()).collect(), &[])
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.succ.targets.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    /// Successors `N+(i)` with their edge weights `w_ij`.
    pub fn successors(&self, i: usize) -> impl ExactSizeIterator<Item = (usize, T)> + '_ {
        self.succ.row(i)
    }

    /// Predecessors `N-(i)` with the weight `w_ji` of the edge `j -> i`.
    pub fn predecessors(&self, i: usize) -> impl ExactSizeIterator<Item = (usize, T)> + '_ {
        self.pred.row(i)
    }

    pub fn out_degree(&self, i: usize) -> usize {
        self.succ.degree(i)
    }

    pub fn in_degree(&self, i: usize) -> usize {
        self.pred.degree(i)
    }

    /// All edges `(i, j, w_ij)` ordered by source, then insertion order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.node_count()).flat_map(move |i| self.successors(i).map(move |(j, w)| (i, j, w)))
    }

    /// Labelled edge list in the order the edges were supplied. Feeding it
    /// back to [`build_graph`] reproduces this graph whenever every node
    /// was first introduced by a kept edge.
    pub fn edge_records(&self) -> Vec<(String, String, T)> {
        let source = |k: usize| self.succ.offsets.partition_point(|&o| o <= k) - 1;
        self.insertion
            .iter()
            .map(|&k| {
                let (i, j) = (source(k), self.succ.targets[k]);
                (self.labels[i].clone(), self.labels[j].clone(), self.succ.weights[k])
            })
            .collect()
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i < self.node_count() {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange { index: i, n: self.node_count() })
        }
    }

    /// `d_ii = sum_{j in N+(i)} |w_ij|`
    pub fn out_strength(&self, i: usize) -> Result<T> {
        self.check_index(i)?;
        Ok(self.out_strength_unchecked(i))
    }

    #[inline]
    pub(crate) fn out_strength_unchecked(&self, i: usize) -> T {
        self.successors(i).map(|(_, w)| w.abs()).sum()
    }

    /// Column sum of the adjacency matrix for node `i`.
    pub fn in_trust_sum(&self, i: usize, kind: TrustSum) -> Result<T> {
        self.check_index(i)?;
        Ok(self.in_trust_sum_unchecked(i, kind))
    }

    pub(crate) fn in_trust_sum_unchecked(&self, i: usize, kind: TrustSum) -> T {
        match kind {
            TrustSum::Signed => self.predecessors(i).map(|(_, w)| w).sum(),
            TrustSum::Absolute => self.predecessors(i).map(|(_, w)| w.abs()).sum(),
        }
    }

    pub fn laplacian(&self) -> LaplacianView<'_, T> {
        LaplacianView {
            graph: self,
            out_strength: (0..self.node_count()).map(|i| self.out_strength_unchecked(i)).collect(),
        }
    }

    pub fn all_positive(&self) -> bool {
        self.succ.weights.iter().all(|w| *w > T::zero())
    }

    /// Summary counts; never mutates.
    pub fn validate(&self) -> Diagnostics<T> {
        let n = self.node_count();
        let weight_range = self.succ.weights.iter().fold(None, |acc: Option<(T, T)>, &w| {
            Some(match acc {
                None => (w, w),
                Some((lo, hi)) => (lo.min(w), hi.max(w)),
            })
        });
        Diagnostics {
            nodes: n,
            edges: self.edge_count(),
            negative_edges: self.succ.weights.iter().filter(|w| **w < T::zero()).count(),
            weight_range,
            sinks: (0..n).filter(|&i| self.out_degree(i) == 0).count(),
            isolated: (0..n).filter(|&i| self.out_degree(i) == 0 && self.in_degree(i) == 0).count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics<T> {
    pub nodes: usize,
    pub edges: usize,
    pub negative_edges: usize,
    /// `(min, max)` edge weight, `None` when there are no edges.
    pub weight_range: Option<(T, T)>,
    /// Nodes with no successors.
    pub sinks: usize,
    /// Nodes with neither successors nor predecessors.
    pub isolated: usize,
}

/// Row access to `L = D - A` with `D = diag(sum_j |a_ij|)`.
#[derive(Debug, Clone)]
pub struct LaplacianView<'g, T> {
    graph: &'g SignedDigraph<T>,
    pub out_strength: Vec<T>,
}

impl<T: Scalar> LaplacianView<'_, T> {
    /// Nonzero entries of row `i` as `(column, value)`, diagonal first.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        std::iter::once((i, self.out_strength[i]))
            .chain(self.graph.successors(i).map(|(j, w)| (j, -w)))
    }

    /// `L x`
    pub fn apply(&self, x: &[T]) -> Vec<T> {
        (0..self.graph.node_count())
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(edges: &[(usize, usize, f64)], n: usize) -> SignedDigraph<f64> {
        SignedDigraph::from_indexed_edges(n, edges).unwrap()
    }

    #[test]
    fn smallest_graph() {
        let (graph, stats) = build_graph(&[("a", "b", 0.5)]).unwrap();
        assert_eq!(graph.node_count(), 2);
        assert_eq!(graph.edges().collect::<Vec<_>>(), vec![(0, 1, 0.5)]);
        assert_eq!(stats.dropped_self_loops, 0);
    }

    #[test]
    fn self_loop_dropped() {
        let (graph, stats) = build_graph(&[("a", "a", 1.0)]).unwrap();
        assert_eq!(graph.node_count(), 1);
        assert_eq!(graph.edge_count(), 0);
        assert_eq!(stats.dropped_self_loops, 1);
    }

    #[test]
    fn duplicate_rejected() {
        let err = build_graph(&[("a", "b", 0.5), ("a", "b", 0.7)]).unwrap_err();
        assert!(matches!(err, Error::DuplicateEdge { .. }));
    }

    #[test]
    fn bad_weights_rejected() {
        for w in [1.5, -1.01, 0.0, f64::NAN] {
            let err = build_graph(&[("a", "b", w)]).unwrap_err();
            assert!(matches!(err, Error::WeightOutOfRange { .. }), "{w}");
        }
        assert!(matches!(build_graph(&[("", "b", 0.5)]), Err(Error::EmptyLabel { index: 0 })));
    }

    #[test]
    fn first_appearance_order() {
        let (graph, _) = build_graph(&[("x", "y", 0.5), ("z", "x", -0.2), ("y", "z", 1.0)]).unwrap();
        assert_eq!(graph.labels(), &["x", "y", "z"]);
    }

    #[test]
    fn out_strength_cases() {
        let graph = g(&[(0, 1, 0.5), (0, 2, -0.5)], 3);
        assert_eq!(graph.out_strength(0).unwrap(), 1.0);
        assert_eq!(graph.out_strength(1).unwrap(), 0.0);
        let graph = g(&[(0, 1, -0.3)], 2);
        assert_eq!(graph.out_strength(0).unwrap(), 0.3);
        assert!(matches!(graph.out_strength(2), Err(Error::NodeOutOfRange { index: 2, n: 2 })));
    }

    #[test]
    fn in_trust_sum_cases() {
        let graph = g(&[(0, 2, 0.5), (1, 2, -0.5)], 3);
        assert_eq!(graph.in_trust_sum(2, TrustSum::Signed).unwrap(), 0.0);
        assert_eq!(graph.in_trust_sum(2, TrustSum::Absolute).unwrap(), 1.0);
        assert_eq!(graph.in_trust_sum(0, TrustSum::Signed).unwrap(), 0.0);
        assert_eq!(graph.in_trust_sum(0, TrustSum::Absolute).unwrap(), 0.0);
        assert!(graph.in_trust_sum(3, TrustSum::Signed).is_err());
    }

    #[test]
    fn validate_cases() {
        let d = SignedDigraph::<f64>::edgeless(0).validate();
        assert_eq!((d.nodes, d.edges, d.sinks, d.isolated), (0, 0, 0, 0));
        assert_eq!(d.weight_range, None);

        let d = g(&[(0, 1, 1.0), (1, 2, 1.0)], 3).validate();
        assert_eq!(d.sinks, 1);
        assert_eq!(d.isolated, 0);
        assert_eq!(d.weight_range, Some((1.0, 1.0)));

        let d = g(&[(0, 1, -0.5)], 3).validate();
        assert_eq!((d.sinks, d.isolated, d.negative_edges), (2, 1, 1));
    }

    #[test]
    fn laplacian_rows() {
        let graph = g(&[(0, 1, 0.5), (0, 2, -0.25), (1, 2, 1.0)], 3);
        let lap = graph.laplacian();
        assert_eq!(lap.out_strength, vec![0.75, 1.0, 0.0]);
        // row sums: d_ii - sum_j a_ij
        assert_eq!(lap.apply(&[1.0, 1.0, 1.0]), vec![0.5, 0.0, 0.0]);
    }

    #[test]
    fn round_trip() {
        let graph = g(&[(2, 0, 0.5), (0, 2, -0.25), (1, 2, 1.0), (1, 0, 0.1)], 3);
        let (built, _) = build_graph(&graph.edge_records()).unwrap();
        let (rebuilt, _) = build_graph(&built.edge_records()).unwrap();
        assert_eq!(built, rebuilt);
        assert_eq!(rebuilt.label(0), "2");
    }
}
