//! Reference implementations shared by the integration tests. They are kept
//! deliberately naive and independent of the library code paths.
#![allow(dead_code)]

use pv_core::{Metric, PointSet};
use rand::Rng;

pub fn dist(a: &[f64], b: &[f64], metric: Metric) -> f64 {
    let diffs = a.iter().zip(b).map(|(x, y)| (x - y).abs());
    match metric {
        Metric::Chebyshev => diffs.fold(0.0, f64::max),
        Metric::Euclidean => diffs.map(|d| d * d).sum::<f64>().sqrt(),
        Metric::Manhattan => diffs.sum(),
    }
}

/// Adjacency lists by direct pairwise comparison.
pub fn brute_adjacency(s1: &PointSet, s2: &PointSet, eps: f64, metric: Metric) -> Vec<Vec<usize>> {
    (0..s1.len())
        .map(|i| (0..s2.len()).filter(|&j| dist(s1.row(i), s2.row(j), metric) <= eps).collect())
        .collect()
}

/// Maximum matching size by Kuhn's augmenting-path search.
pub fn kuhn_matching(adj: &[Vec<usize>], n_right: usize) -> usize {
    fn try_augment(u: usize, adj: &[Vec<usize>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for &v in &adj[u] {
            if seen[v] {
                continue;
            }
            seen[v] = true;
            if owner[v].is_none() || try_augment(owner[v].unwrap(), adj, seen, owner) {
                owner[v] = Some(u);
                return true;
            }
        }
        false
    }
    let mut owner = vec![None; n_right];
    let mut size = 0;
    for u in 0..adj.len() {
        let mut seen = vec![false; n_right];
        if try_augment(u, adj, &mut seen, &mut owner) {
            size += 1;
        }
    }
    size
}

pub fn reference_pv(s1: &PointSet, s2: &PointSet, eps: f64, metric: Metric) -> f64 {
    let k = kuhn_matching(&brute_adjacency(s1, s2, eps, metric), s2.len()) as f64;
    0.5 * ((s1.len() as f64 - k) / s1.len() as f64 + (s2.len() as f64 - k) / s2.len() as f64)
}

pub fn random_points<R: Rng>(rng: &mut R, n: usize, dim: usize) -> PointSet {
    PointSet::new((0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect()).unwrap()
}

/// Standard normal CDF from the Taylor series
/// `Φ(x) = 1/2 + φ(x) Σ x^(2k+1) / (1·3·…·(2k+1))`.
pub fn normal_cdf(x: f64) -> f64 {
    if x < 0.0 {
        return 1.0 - normal_cdf(-x);
    }
    if x > 9.0 {
        return 1.0;
    }
    let mut term = x;
    let mut sum = x;
    let mut k = 0.0;
    while term > 1e-18 * sum {
        k += 1.0;
        term *= x * x / (2.0 * k + 1.0);
        sum += term;
    }
    0.5 + sum * (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Inverse of [`normal_cdf`] by bisection.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let (mut lo, mut hi) = (-40.0, 40.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Textbook BCa interval: endpoints are the replicates at ranks
/// `⌈B·α_i⌉` where `α_i = Φ(z0 + (z0+z)/(1 - a(z0+z)))`.
pub fn reference_bca(replicates: &[f64], observed: f64, level: f64, a: f64) -> (f64, f64, f64) {
    let b = replicates.len() as f64;
    let mut p = 0.0;
    for &r in replicates {
        if r < observed {
            p += 1.0;
        } else if r == observed {
            p += 0.5;
        }
    }
    let z0 = normal_quantile(p / b).clamp(-4.0, 4.0);
    let mut sorted = replicates.to_vec();
    sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let pick = |z: f64| {
        let q = normal_cdf(z0 + (z0 + z) / (1.0 - a * (z0 + z)));
        let mut rank = 1usize;
        while (rank as f64) < q * b - 1e-9 && rank < sorted.len() {
            rank += 1;
        }
        sorted[rank - 1]
    };
    let tail = (1.0 - level) / 2.0;
    (pick(normal_quantile(tail)), pick(normal_quantile(1.0 - tail)), z0)
}
