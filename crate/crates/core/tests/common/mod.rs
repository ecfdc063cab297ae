#![allow(dead_code)]

use godm::confidence::ConfidenceVector;
use godm::ingest::{gen_synthetic, rng_from_seed, SyntheticSpec, WeightDist};
use godm::SignedDigraph;
use rand::Rng;

pub fn synthetic(n: usize, p: f64, nu: f64, seed: u64) -> SignedDigraph<f64> {
    gen_synthetic(&SyntheticSpec { n, edge_prob: p, negative_prob: nu, weights: WeightDist::default(), seed }).unwrap()
}

/// Per-node confidence drawn uniformly from `[lo, hi]`.
pub fn random_alpha(n: usize, lo: f64, hi: f64, seed: u64) -> ConfidenceVector<f64> {
    let mut rng = rng_from_seed(seed ^ 0xA1FA);
    ConfidenceVector::explicit((0..n).map(|_| rng.random_range(lo..=hi)).collect(), 1e-6).unwrap()
}

pub fn random_opinions(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed ^ 0x5EED);
    (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

/// Dense `Lambda + (I - Lambda) L` assembled straight from the graph.
pub fn dense_system(graph: &SignedDigraph<f64>, alpha: &[f64]) -> Vec<Vec<f64>> {
    let n = graph.node_count();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        m[i][i] = alpha[i];
    }
    for (i, j, w) in graph.edges() {
        m[i][i] += (1.0 - alpha[i]) * w.abs();
        m[i][j] -= (1.0 - alpha[i]) * w;
    }
    m
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn dense_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut aug: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| aug[x][c].abs().total_cmp(&aug[y][c].abs())).unwrap();
        aug.swap(c, p);
        let piv = aug[c][c];
        for v in aug[c].iter_mut() {
            *v /= piv;
        }
        for r in 0..n {
            if r != c {
                let f = aug[r][c];
                if f != 0.0 {
                    for k in 0..2 * n {
                        aug[r][k] -= f * aug[c][k];
                    }
                }
            }
        }
    }
    aug.into_iter().map(|r| r[n..].to_vec()).collect()
}

pub fn mat_vec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

/// Exact optimum of `max g.x` over `a <= x <= b`, `||x||_1 <= mu`, from the
/// Lagrangian dual `min_{lambda >= 0} lambda mu + sum_i max_{x_i in {a_i,0,b_i}} (g_i x_i - lambda |x_i|)`,
/// which is piecewise linear with breakpoints at `|g_i|`.
pub fn lp_optimum_by_duality(g: &[f64], s: &[f64], mu: f64) -> f64 {
    let dual = |lambda: f64| -> f64 {
        lambda * mu
            + g.iter()
                .zip(s)
                .map(|(gi, si)| {
                    let (a, b) = (-1.0 - si, 1.0 - si);
                    [0.0, gi * a - lambda * a.abs(), gi * b - lambda * b.abs()].into_iter().fold(f64::MIN, f64::max)
                })
                .sum::<f64>()
    };
    std::iter::once(0.0).chain(g.iter().map(|v| v.abs())).map(dual).fold(f64::INFINITY, f64::min)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn inf_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
