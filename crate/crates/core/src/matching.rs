//! Maximum-cardinality bipartite matching and the sample PV estimator.
//!
//! The estimator is `½(S_w/n + S_v/m)` where `S_w`, `S_v` count the points of
//! each sample left unmatched by a maximum matching of the ε-neighbor graph.
//! Only the matching cardinality matters, so any maximum matching gives the
//! same value.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{PvError, Result};
use crate::geometry::{build_neighbor_graph, check_epsilon, Metric, NeighborGraph, PointSet};

const NONE: usize = usize::MAX;
const INF: u32 = u32::MAX;

/// A matching between the left and right vertices of a [`NeighborGraph`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    pair_of_left: Vec<Option<usize>>,
    pair_of_right: Vec<Option<usize>>,
    cardinality: usize,
}

impl Matching {
    pub fn pair_of_left(&self) -> &[Option<usize>] {
        &self.pair_of_left
    }

    pub fn pair_of_right(&self) -> &[Option<usize>] {
        &self.pair_of_right
    }

    pub fn cardinality(&self) -> usize {
        self.cardinality
    }

    /// Matched `(left, right)` pairs in ascending left order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.pair_of_left
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.map(|j| (i, j)))
            .collect()
    }

    fn from_raw(pair_left: Vec<usize>, pair_right: Vec<usize>) -> Self {
        let conv = |v: Vec<usize>| -> Vec<Option<usize>> {
            v.into_iter().map(|p| (p != NONE).then_some(p)).collect()
        };
        let cardinality = pair_left.iter().filter(|&&p| p != NONE).count();
        Self {
            pair_of_left: conv(pair_left),
            pair_of_right: conv(pair_right),
            cardinality,
        }
    }

    /// Check mutual consistency and that every pair is an edge of `g`.
    pub fn is_valid_for(&self, g: &NeighborGraph) -> bool {
        if self.pair_of_left.len() != g.n_left() || self.pair_of_right.len() != g.n_right() {
            return false;
        }
        let consistent = self.pair_of_left.iter().enumerate().all(|(i, p)| match p {
            Some(j) => self.pair_of_right.get(*j) == Some(&Some(i)) && g.has_edge(i, *j),
            None => true,
        });
        let back = self.pair_of_right.iter().enumerate().all(|(j, p)| match p {
            Some(i) => self.pair_of_left.get(*i) == Some(&Some(j)),
            None => true,
        });
        consistent && back && self.pairs().len() == self.cardinality
    }
}

/// Maximum-cardinality matching by Hopcroft–Karp, O(E·√V).
///
/// Layers are explored in ascending vertex order, so the result is a
/// deterministic function of the (sorted) adjacency.
pub fn maximum_matching(g: &NeighborGraph) -> Matching {
    let (n, m) = (g.n_left(), g.n_right());
    let mut pair_left = vec![NONE; n];
    let mut pair_right = vec![NONE; m];
    let mut dist = vec![INF; n];
    let mut queue = VecDeque::with_capacity(n);
    let mut cursor = vec![0usize; n];
    let mut via = vec![NONE; n];
    let mut stack = Vec::new();

    loop {
        // BFS layering from all free left vertices.
        queue.clear();
        for u in 0..n {
            if pair_left[u] == NONE {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = INF;
            }
        }
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &v in g.neighbors(u) {
                let w = pair_right[v];
                if w == NONE {
                    found = true;
                } else if dist[w] == INF {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        if !found {
            break;
        }

        // Vertex-disjoint augmenting paths along the layers (iterative DFS).
        cursor.iter_mut().for_each(|c| *c = 0);
        for root in 0..n {
            if pair_left[root] != NONE {
                continue;
            }
            stack.clear();
            stack.push(root);
            while let Some(&u) = stack.last() {
                let adj = g.neighbors(u);
                if cursor[u] == adj.len() {
                    dist[u] = INF;
                    stack.pop();
                    continue;
                }
                let v = adj[cursor[u]];
                cursor[u] += 1;
                let w = pair_right[v];
                if w == NONE {
                    // Flip the path root -> ... -> u -> v.
                    via[u] = v;
                    for &x in stack.iter() {
                        let y = via[x];
                        pair_left[x] = y;
                        pair_right[y] = x;
                    }
                    break;
                } else if dist[w] != INF && dist[w] == dist[u] + 1 {
                    via[u] = v;
                    stack.push(w);
                }
            }
        }
    }
    Matching::from_raw(pair_left, pair_right)
}

/// Sample PV estimate with its matching witness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PvEstimate {
    pub value: f64,
    /// Unmatched points of the first sample.
    pub s_w: usize,
    /// Unmatched points of the second sample.
    pub s_v: usize,
    pub unmatched_left: Vec<usize>,
    pub unmatched_right: Vec<usize>,
    /// Matched `(i, j)` pairs, ascending in `i`.
    pub pairs: Vec<(usize, usize)>,
    pub epsilon: f64,
    pub metric: Metric,
    pub n: usize,
    pub m: usize,
}

impl PvEstimate {
    fn from_pairs(
        pairs: Vec<(usize, usize)>,
        n: usize,
        m: usize,
        epsilon: f64,
        metric: Metric,
    ) -> Self {
        let mut left = vec![false; n];
        let mut right = vec![false; m];
        for &(i, j) in &pairs {
            left[i] = true;
            right[j] = true;
        }
        let unmatched = |flags: Vec<bool>| -> Vec<usize> {
            flags
                .into_iter()
                .enumerate()
                .filter_map(|(i, f)| (!f).then_some(i))
                .collect()
        };
        let unmatched_left = unmatched(left);
        let unmatched_right = unmatched(right);
        Self {
            value: pv_from_cardinality(n, m, pairs.len()),
            s_w: unmatched_left.len(),
            s_v: unmatched_right.len(),
            unmatched_left,
            unmatched_right,
            pairs,
            epsilon,
            metric,
            n,
            m,
        }
    }

    /// Fraction of the first sample left unmatched, `S_w / n`.
    pub fn unmatched_fraction_left(&self) -> f64 {
        self.s_w as f64 / self.n as f64
    }

    /// Fraction of the second sample left unmatched, `S_v / m`.
    pub fn unmatched_fraction_right(&self) -> f64 {
        self.s_v as f64 / self.m as f64
    }
}

/// `½((n-k)/n + (m-k)/m)` for a matching of cardinality `k`.
pub fn pv_from_cardinality(n: usize, m: usize, k: usize) -> f64 {
    0.5 * ((n - k) as f64 / n as f64 + (m - k) as f64 / m as f64)
}

/// Algorithm used to find the maximum matching inside [`pv_hat_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatchingStrategy {
    /// Sorted sweep for one-dimensional data, Hopcroft–Karp otherwise.
    #[default]
    Auto,
    /// Explicit neighbor graph + Hopcroft–Karp.
    HopcroftKarp,
    /// Greedy two-pointer sweep over sorted values; one-dimensional data only.
    Sweep,
}

/// Sample PV between two point sets at scale `epsilon`.
pub fn pv_hat(s1: &PointSet, s2: &PointSet, epsilon: f64, metric: Metric) -> Result<PvEstimate> {
    pv_hat_with(s1, s2, epsilon, metric, MatchingStrategy::Auto)
}

pub fn pv_hat_with(
    s1: &PointSet,
    s2: &PointSet,
    epsilon: f64,
    metric: Metric,
    strategy: MatchingStrategy,
) -> Result<PvEstimate> {
    if s1.dim() != s2.dim() {
        return Err(PvError::DimensionMismatch {
            expected: s1.dim(),
            found: s2.dim(),
        });
    }
    check_epsilon(epsilon)?;
    let sweep = match strategy {
        MatchingStrategy::Auto => s1.dim() == 1,
        MatchingStrategy::HopcroftKarp => false,
        MatchingStrategy::Sweep => {
            if s1.dim() != 1 {
                return Err(PvError::param("strategy", "sweep matching requires 1-D data"));
            }
            true
        }
    };
    let pairs = if sweep {
        let xs = sorted_order(s1.as_flat());
        let ys = sorted_order(s2.as_flat());
        let mut pairs = sweep_pairs(s1.as_flat(), s2.as_flat(), &xs, &ys, epsilon, metric);
        pairs.sort_unstable();
        pairs
    } else {
        let g = build_neighbor_graph(s1, s2, epsilon, metric)?;
        maximum_matching(&g).pairs()
    };
    Ok(PvEstimate::from_pairs(pairs, s1.len(), s2.len(), epsilon, metric))
}

/// Indices of `values` sorted ascending (ties by index).
fn sorted_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    idx
}

/// Maximum matching of 1-D points under `|x - y| <= ε`.
///
/// Each point's neighbors form an interval of the other sorted sample and the
/// interval endpoints are monotone, so matching the leftmost compatible pair
/// first is optimal.
fn sweep_pairs(
    x: &[f64],
    y: &[f64],
    xs: &[usize],
    ys: &[usize],
    epsilon: f64,
    metric: Metric,
) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(xs.len().min(ys.len()));
    let (mut a, mut b) = (0, 0);
    while a < xs.len() && b < ys.len() {
        let (i, j) = (xs[a], ys[b]);
        if metric.eval(&x[i..=i], &y[j..=j]) <= epsilon {
            pairs.push((i, j));
            a += 1;
            b += 1;
        } else if y[j] < x[i] {
            b += 1;
        } else {
            a += 1;
        }
    }
    pairs
}

/// Leave-one-out PV values: entry `i` of the first vector is the estimate with
/// point `i` of `s1` removed, likewise for `s2`. Both samples need at least
/// two points.
///
/// One maximum matching suffices: a vertex can be dropped without losing
/// cardinality iff some maximum matching leaves it free, i.e. iff it is
/// reachable from a free vertex of its own side by an even alternating path.
pub fn leave_one_out(
    s1: &PointSet,
    s2: &PointSet,
    epsilon: f64,
    metric: Metric,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if s1.dim() != s2.dim() {
        return Err(PvError::DimensionMismatch {
            expected: s1.dim(),
            found: s2.dim(),
        });
    }
    check_epsilon(epsilon)?;
    let (n, m) = (s1.len(), s2.len());
    if n < 2 || m < 2 {
        return Err(PvError::param(
            "samples",
            "leave-one-out needs at least two points per sample",
        ));
    }

    let (k, left_free, right_free) = if s1.dim() == 1 {
        let (x, y) = (s1.as_flat(), s2.as_flat());
        let pairs = sweep_pairs(x, y, &sorted_order(x), &sorted_order(y), epsilon, metric);
        let (mut pl, mut pr) = (vec![None; n], vec![None; m]);
        for &(i, j) in &pairs {
            pl[i] = Some(j);
            pr[j] = Some(i);
        }
        (
            pairs.len(),
            avoidable_1d(x, y, &pl, &pr, epsilon, metric),
            avoidable_1d(y, x, &pr, &pl, epsilon, metric),
        )
    } else {
        let g = build_neighbor_graph(s1, s2, epsilon, metric)?;
        let mm = maximum_matching(&g);
        let left_free = avoidable(&g, mm.pair_of_left(), mm.pair_of_right());
        let right_free = avoidable(&g.transpose(), mm.pair_of_right(), mm.pair_of_left());
        (mm.cardinality(), left_free, right_free)
    };
    let left = left_free
        .iter()
        .map(|&ok| pv_from_cardinality(n - 1, m, if ok { k } else { k - 1 }))
        .collect();
    let right = right_free
        .iter()
        .map(|&ok| pv_from_cardinality(n, m - 1, if ok { k } else { k - 1 }))
        .collect();
    Ok((left, right))
}

/// Left vertices left free by at least one maximum matching, given maximum
/// matching `(pl, pr)`.
fn avoidable(g: &NeighborGraph, pl: &[Option<usize>], pr: &[Option<usize>]) -> Vec<bool> {
    let mut seen = vec![false; g.n_left()];
    let mut queue: VecDeque<usize> = (0..g.n_left()).filter(|&u| pl[u].is_none()).collect();
    for &u in &queue {
        seen[u] = true;
    }
    while let Some(u) = queue.pop_front() {
        for &v in g.neighbors(u) {
            if let Some(w) = pr[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    seen
}

/// [`avoidable`] for 1-D data without materializing the graph. Neighbors of
/// `x[u]` form a contiguous run of the sorted `y`; a skip-list over sorted
/// positions visits each right vertex once.
fn avoidable_1d(
    x: &[f64],
    y: &[f64],
    pl: &[Option<usize>],
    pr: &[Option<usize>],
    epsilon: f64,
    metric: Metric,
) -> Vec<bool> {
    let ys = sorted_order(y);
    let yv: Vec<f64> = ys.iter().map(|&j| y[j]).collect();
    // next[p]: smallest unvisited sorted position >= p (path-compressed)
    let mut next: Vec<usize> = (0..=yv.len()).collect();
    fn find(next: &mut [usize], mut p: usize) -> usize {
        let mut root = p;
        while next[root] != root {
            root = next[root];
        }
        while next[p] != root {
            let up = next[p];
            next[p] = root;
            p = up;
        }
        root
    }

    let mut seen = vec![false; x.len()];
    let mut queue: VecDeque<usize> = (0..x.len()).filter(|&u| pl[u].is_none()).collect();
    for &u in &queue {
        seen[u] = true;
    }
    while let Some(u) = queue.pop_front() {
        let xu = &x[u..=u];
        let close = |v: &f64| metric.eval(xu, std::slice::from_ref(v)) <= epsilon;
        let lo = yv.partition_point(|v| *v < xu[0] && !close(v));
        let hi = yv.partition_point(|v| *v < xu[0] || close(v));
        let mut p = find(&mut next, lo);
        while p < hi {
            next[p] = p + 1;
            if let Some(w) = pr[ys[p]] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
            p = find(&mut next, p + 1);
        }
    }
    seen
}
