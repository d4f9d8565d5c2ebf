//! Exact PV between weighted discrete distributions.
//!
//! Minimizing `½Σw + ½Σv` subject to the row/column balances is the same as
//! pushing as much mass as possible through neighbor pairs, with atom masses
//! as node capacities: the optimum is `1 - F*` for the maximum flow `F*`.
//! [`pv_discrete`] solves that flow with Dinic's algorithm;
//! [`pv_discrete_bruteforce`] evaluates the min-cut side by enumeration and is
//! kept as an independent oracle.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{PvError, Result};
use crate::geometry::{check_epsilon, Metric, PointSet};

const MASS_TOL: f64 = 1e-9;
const FLOW_TOL: f64 = 1e-15;

/// Largest side the brute-force oracle will enumerate subsets of.
pub const BRUTEFORCE_SIDE_LIMIT: usize = 16;
/// Largest combined support the brute-force oracle accepts.
pub const BRUTEFORCE_TOTAL_LIMIT: usize = 64;

/// A finitely supported probability distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDist {
    support: PointSet,
    mass: Vec<f64>,
}

impl DiscreteDist {
    pub fn new(support: PointSet, mass: Vec<f64>) -> Result<Self> {
        if support.len() != mass.len() {
            return Err(PvError::param(
                "mass",
                format!("{} masses for {} atoms", mass.len(), support.len()),
            ));
        }
        let sum: f64 = mass.iter().sum();
        if mass.iter().any(|&w| !w.is_finite() || w < 0.0) || (sum - 1.0).abs() > MASS_TOL {
            return Err(PvError::MassNotNormalized { sum });
        }
        Ok(Self { support, mass })
    }

    /// One-dimensional distribution from `(location, mass)` pairs.
    pub fn from_atoms(atoms: &[(f64, f64)]) -> Result<Self> {
        let locs: Vec<f64> = atoms.iter().map(|a| a.0).collect();
        let mass = atoms.iter().map(|a| a.1).collect();
        Self::new(PointSet::from_scalars(&locs)?, mass)
    }

    /// Empirical distribution: mass `1/n` on every point (duplicates kept apart).
    pub fn uniform(points: &PointSet) -> Self {
        let w = 1.0 / points.len() as f64;
        Self {
            support: points.clone(),
            mass: vec![w; points.len()],
        }
    }

    pub fn support(&self) -> &PointSet {
        &self.support
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }
}

/// Mass moved from left atom `left` to right atom `right`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowEntry {
    pub left: usize,
    pub right: usize,
    pub mass: f64,
}

/// Witness for the discrete optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    /// Nonzero transported masses, sorted by `(left, right)`.
    pub flow: Vec<FlowEntry>,
    /// Untransported mass per atom of the first distribution (`w`).
    pub leftover_left: Vec<f64>,
    /// Untransported mass per atom of the second distribution (`v`).
    pub leftover_right: Vec<f64>,
    pub objective: f64,
}

impl TransportPlan {
    pub fn flow_between(&self, left: usize, right: usize) -> f64 {
        self.flow
            .iter()
            .find(|e| e.left == left && e.right == right)
            .map_or(0.0, |e| e.mass)
    }
}

fn neighbor_lists(
    mu1: &DiscreteDist,
    mu2: &DiscreteDist,
    epsilon: f64,
    metric: Metric,
) -> Result<Vec<Vec<usize>>> {
    if mu1.support.dim() != mu2.support.dim() {
        return Err(PvError::DimensionMismatch {
            expected: mu1.support.dim(),
            found: mu2.support.dim(),
        });
    }
    check_epsilon(epsilon)?;
    Ok(mu1
        .support
        .rows()
        .map(|a| {
            mu2.support
                .rows()
                .enumerate()
                .filter(|(_, b)| metric.eval(a, b) <= epsilon)
                .map(|(j, _)| j)
                .collect()
        })
        .collect())
}

/// Exact discrete PV and an optimal transport plan.
pub fn pv_discrete(
    mu1: &DiscreteDist,
    mu2: &DiscreteDist,
    epsilon: f64,
    metric: Metric,
) -> Result<(f64, TransportPlan)> {
    let adj = neighbor_lists(mu1, mu2, epsilon, metric)?;
    let (l, r) = (mu1.len(), mu2.len());
    let source = l + r;
    let sink = source + 1;
    let mut net = FlowNetwork::new(l + r + 2);
    for (i, &w) in mu1.mass.iter().enumerate() {
        net.add_edge(source, i, w);
    }
    for (j, &w) in mu2.mass.iter().enumerate() {
        net.add_edge(l + j, sink, w);
    }
    let mut middle = Vec::new();
    for (i, list) in adj.iter().enumerate() {
        for &j in list {
            middle.push((i, j, net.add_edge(i, l + j, 2.0)));
        }
    }
    net.max_flow(source, sink);

    let mut flow = Vec::new();
    let mut leftover_left = mu1.mass.clone();
    let mut leftover_right = mu2.mass.clone();
    for (i, j, e) in middle {
        let f = net.flow_on(e);
        if f > FLOW_TOL {
            flow.push(FlowEntry {
                left: i,
                right: j,
                mass: f,
            });
            leftover_left[i] -= f;
            leftover_right[j] -= f;
        }
    }
    for w in leftover_left.iter_mut().chain(leftover_right.iter_mut()) {
        if *w < 0.0 {
            *w = 0.0;
        }
    }
    let objective =
        (0.5 * leftover_left.iter().sum::<f64>() + 0.5 * leftover_right.iter().sum::<f64>())
            .clamp(0.0, 1.0);
    Ok((
        objective,
        TransportPlan {
            flow,
            leftover_left,
            leftover_right,
            objective,
        },
    ))
}

/// Discrete PV by exhaustive enumeration of cuts.
///
/// By max-flow/min-cut, the largest transportable mass is
/// `min over subsets A of the smaller side of μ(side \ A) + μ'(N(A))`.
/// Enumerates all `2^k` subsets of the smaller support.
pub fn pv_discrete_bruteforce(
    mu1: &DiscreteDist,
    mu2: &DiscreteDist,
    epsilon: f64,
    metric: Metric,
) -> Result<f64> {
    let total = mu1.len() + mu2.len();
    if total > BRUTEFORCE_TOTAL_LIMIT {
        return Err(PvError::SupportTooLarge {
            size: total,
            limit: BRUTEFORCE_TOTAL_LIMIT,
        });
    }
    let adj = neighbor_lists(mu1, mu2, epsilon, metric)?;
    // Enumerate over the smaller side, with masks over the other side.
    let (small_mass, other_mass, masks): (&[f64], &[f64], Vec<u64>) = if mu1.len() <= mu2.len() {
        let masks = adj.iter().map(|l| l.iter().fold(0u64, |m, &j| m | 1 << j)).collect();
        (&mu1.mass, &mu2.mass, masks)
    } else {
        let mut masks = vec![0u64; mu2.len()];
        for (i, list) in adj.iter().enumerate() {
            for &j in list {
                masks[j] |= 1 << i;
            }
        }
        (&mu2.mass, &mu1.mass, masks)
    };
    let k = small_mass.len();
    if k > BRUTEFORCE_SIDE_LIMIT {
        return Err(PvError::SupportTooLarge {
            size: k,
            limit: BRUTEFORCE_SIDE_LIMIT,
        });
    }
    let mut best = f64::INFINITY;
    for subset in 0u32..(1u32 << k) {
        let mut outside = 0.0;
        let mut reach = 0u64;
        for (i, &w) in small_mass.iter().enumerate() {
            if subset >> i & 1 == 1 {
                reach |= masks[i];
            } else {
                outside += w;
            }
        }
        let reached: f64 = other_mass
            .iter()
            .enumerate()
            .filter(|(j, _)| reach >> j & 1 == 1)
            .map(|(_, w)| w)
            .sum();
        best = best.min(outside + reached);
    }
    Ok((1.0 - best).clamp(0.0, 1.0))
}

/// Histogram of `s` on the regular grid of boxes with side `nu` covering
/// `[0,1]^d`. Boxes are half-open `[kν, (k+1)ν)` except the last one per
/// axis, which is closed. Atoms sit at box centers, ordered by box index;
/// empty boxes are dropped.
pub fn discretize(s: &PointSet, nu: f64) -> Result<DiscreteDist> {
    if !(nu.is_finite() && nu > 0.0) {
        return Err(PvError::param("nu", format!("must be positive, got {nu}")));
    }
    let boxes = ((1.0 / nu - 1e-9).ceil() as usize).max(1);
    let mut counts: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    for (row, p) in s.rows().enumerate() {
        if p.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(PvError::OutsideUnitBox { row });
        }
        let key = p
            .iter()
            .map(|&v| ((v / nu).floor() as usize).min(boxes - 1))
            .collect();
        *counts.entry(key).or_default() += 1;
    }
    let n = s.len() as f64;
    let mut data = Vec::with_capacity(counts.len() * s.dim());
    let mut mass = Vec::with_capacity(counts.len());
    for (key, c) in counts {
        data.extend(key.iter().map(|&k| (k as f64 + 0.5) * nu));
        mass.push(c as f64 / n);
    }
    Ok(DiscreteDist {
        support: PointSet::from_flat(data, s.dim())?,
        mass,
    })
}

/// Dinic max-flow on real capacities.
struct FlowNetwork {
    head: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<f64>,
    level: Vec<i32>,
    iter: Vec<usize>,
}

impl FlowNetwork {
    fn new(nodes: usize) -> Self {
        Self {
            head: vec![Vec::new(); nodes],
            to: Vec::new(),
            cap: Vec::new(),
            level: vec![0; nodes],
            iter: vec![0; nodes],
        }
    }

    /// Adds `u -> v` and its reverse; returns the forward edge id.
    fn add_edge(&mut self, u: usize, v: usize, cap: f64) -> usize {
        let id = self.to.len();
        self.to.push(v);
        self.cap.push(cap);
        self.head[u].push(id);
        self.to.push(u);
        self.cap.push(0.0);
        self.head[v].push(id + 1);
        id
    }

    fn flow_on(&self, edge: usize) -> f64 {
        self.cap[edge ^ 1]
    }

    fn bfs(&mut self, s: usize, t: usize) -> bool {
        self.level.iter_mut().for_each(|l| *l = -1);
        self.level[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &e in &self.head[u] {
                let v = self.to[e];
                if self.cap[e] > FLOW_TOL && self.level[v] < 0 {
                    self.level[v] = self.level[u] + 1;
                    q.push_back(v);
                }
            }
        }
        self.level[t] >= 0
    }

    fn dfs(&mut self, u: usize, t: usize, limit: f64) -> f64 {
        if u == t {
            return limit;
        }
        while self.iter[u] < self.head[u].len() {
            let e = self.head[u][self.iter[u]];
            let v = self.to[e];
            if self.cap[e] > FLOW_TOL && self.level[v] == self.level[u] + 1 {
                let pushed = self.dfs(v, t, limit.min(self.cap[e]));
                if pushed > FLOW_TOL {
                    self.cap[e] -= pushed;
                    self.cap[e ^ 1] += pushed;
                    return pushed;
                }
            }
            self.iter[u] += 1;
        }
        0.0
    }

    fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let mut total = 0.0;
        while self.bfs(s, t) {
            self.iter.iter_mut().for_each(|i| *i = 0);
            loop {
                let f = self.dfs(s, t, f64::INFINITY);
                if f <= FLOW_TOL {
                    break;
                }
                total += f;
            }
        }
        total
    }
}
