//! Point sets, ground metrics and the ε-neighbor bipartite graph.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{PvError, Result};

/// A finite sample: `n` points of dimension `d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    data: Vec<f64>,
    dim: usize,
}

impl PointSet {
    /// Build from rows; all rows must share one dimension and be finite.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map(Vec::len).ok_or(PvError::Empty)?;
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in &rows {
            if row.len() != dim {
                return Err(PvError::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(data, dim)
    }

    /// Build from a row-major buffer of `n * dim` coordinates.
    pub fn from_flat(data: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || data.is_empty() {
            return Err(PvError::Empty);
        }
        if !data.len().is_multiple_of(dim) {
            return Err(PvError::DimensionMismatch {
                expected: dim,
                found: data.len() % dim,
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(PvError::NonFinite {
                row: pos / dim,
                col: pos % dim,
            });
        }
        Ok(Self { data, dim })
    }

    /// One-dimensional sample from scalars.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::from_flat(values.to_vec(), 1)
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    /// The points at `indices`, in that order (repeats allowed).
    pub fn select(&self, indices: &[usize]) -> PointSet {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        PointSet {
            data,
            dim: self.dim,
        }
    }

    /// Copy with point `i` removed. Panics if this would leave the set empty.
    pub fn without(&self, i: usize) -> PointSet {
        assert!(self.len() > 1, "cannot remove the only point");
        let mut data = Vec::with_capacity(self.data.len() - self.dim);
        data.extend_from_slice(&self.data[..i * self.dim]);
        data.extend_from_slice(&self.data[(i + 1) * self.dim..]);
        PointSet {
            data,
            dim: self.dim,
        }
    }

    /// Copy with point `i` replaced by `point`.
    pub fn with_replaced(&self, i: usize, point: &[f64]) -> Result<PointSet> {
        check_dims(self.dim, point.len())?;
        let mut out = self.clone();
        out.data[i * self.dim..(i + 1) * self.dim].copy_from_slice(point);
        PointSet::from_flat(out.data, out.dim)
    }
}

/// Ground distance between points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// L∞, max absolute coordinate difference.
    Chebyshev,
    /// L2.
    Euclidean,
    /// L1.
    Manhattan,
}

impl Metric {
    /// Unchecked evaluation; callers guarantee equal lengths.
    #[inline]
    pub fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        let diffs = a.iter().zip(b).map(|(x, y)| (x - y).abs());
        match self {
            Metric::Chebyshev => diffs.fold(0.0, f64::max),
            Metric::Manhattan => diffs.sum(),
            Metric::Euclidean => diffs.map(|v| v * v).sum::<f64>().sqrt(),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Chebyshev => "chebyshev",
            Metric::Euclidean => "euclidean",
            Metric::Manhattan => "manhattan",
        })
    }
}

impl FromStr for Metric {
    type Err = PvError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "chebyshev" | "linf" | "l-inf" | "max" => Ok(Metric::Chebyshev),
            "euclidean" | "l2" => Ok(Metric::Euclidean),
            "manhattan" | "l1" | "cityblock" => Ok(Metric::Manhattan),
            other => Err(PvError::param("metric", format!("unknown metric `{other}`"))),
        }
    }
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(PvError::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Distance between two vectors under `metric`.
pub fn distance(a: &[f64], b: &[f64], metric: Metric) -> Result<f64> {
    check_dims(a.len(), b.len())?;
    for (col, v) in a.iter().chain(b).enumerate() {
        if v.is_nan() {
            return Err(PvError::NonFinite {
                row: 0,
                col: col % a.len().max(1),
            });
        }
    }
    Ok(metric.eval(a, b))
}

/// Pooled per-coordinate min-max scaling of both samples into `[0,1]^d`.
///
/// The same affine map is applied to both sets. A coordinate that is constant
/// over the pooled points maps to 0.5.
pub fn normalize_unit_box(s1: &PointSet, s2: &PointSet) -> Result<(PointSet, PointSet)> {
    check_dims(s1.dim(), s2.dim())?;
    let d = s1.dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for row in s1.rows().chain(s2.rows()) {
        for k in 0..d {
            lo[k] = lo[k].min(row[k]);
            hi[k] = hi[k].max(row[k]);
        }
    }
    let map = |s: &PointSet| {
        let mut data = s.as_flat().to_vec();
        for row in data.chunks_exact_mut(d) {
            for k in 0..d {
                let span = hi[k] - lo[k];
                row[k] = if span > 0.0 {
                    ((row[k] - lo[k]) / span).clamp(0.0, 1.0)
                } else {
                    0.5
                };
            }
        }
        PointSet { data, dim: d }
    };
    Ok((map(s1), map(s2)))
}

/// How candidate pairs are enumerated when building a [`NeighborGraph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NeighborSearch {
    /// Full O(nm) scan.
    BruteForce,
    /// Uniform grid with cell side ε; candidates from the 3^d surrounding cells.
    Grid,
    /// Grid for low dimension and large inputs, brute force otherwise.
    #[default]
    Auto,
}

/// Bipartite ε-neighbor graph between a left and a right sample.
///
/// Left vertex `i` is adjacent to right vertex `j` iff `d(x_i, y_j) <= ε`.
/// Adjacency lists are sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph {
    n_left: usize,
    n_right: usize,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    epsilon: f64,
    metric: Metric,
}

impl NeighborGraph {
    /// Build from explicit adjacency lists (each list sorted and deduplicated here).
    pub fn from_adjacency(
        n_right: usize,
        adjacency: Vec<Vec<usize>>,
        epsilon: f64,
        metric: Metric,
    ) -> Result<Self> {
        let mut offsets = Vec::with_capacity(adjacency.len() + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for mut list in adjacency {
            list.sort_unstable();
            list.dedup();
            if let Some(&j) = list.last() {
                if j >= n_right {
                    return Err(PvError::param(
                        "adjacency",
                        format!("right index {j} out of range {n_right}"),
                    ));
                }
            }
            targets.extend(list);
            offsets.push(targets.len());
        }
        Ok(Self {
            n_left: offsets.len() - 1,
            n_right,
            offsets,
            targets,
            epsilon,
            metric,
        })
    }

    pub fn n_left(&self) -> usize {
        self.n_left
    }

    pub fn n_right(&self) -> usize {
        self.n_right
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    /// Sorted right neighbors of left vertex `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors(i).binary_search(&j).is_ok()
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        (0..self.n_left).map(|i| self.neighbors(i).to_vec()).collect()
    }

    /// The graph with left and right roles exchanged.
    pub fn transpose(&self) -> NeighborGraph {
        let mut adjacency = vec![Vec::new(); self.n_right];
        for i in 0..self.n_left {
            for &j in self.neighbors(i) {
                adjacency[j].push(i);
            }
        }
        NeighborGraph::from_adjacency(self.n_left, adjacency, self.epsilon, self.metric)
            .expect("transpose of a valid graph is valid")
    }
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(PvError::param("epsilon", format!("must be positive and finite, got {epsilon}")));
    }
    Ok(())
}

/// ε-neighbor graph under `metric`, choosing the search strategy automatically.
pub fn build_neighbor_graph(
    s1: &PointSet,
    s2: &PointSet,
    epsilon: f64,
    metric: Metric,
) -> Result<NeighborGraph> {
    build_neighbor_graph_with(s1, s2, epsilon, metric, NeighborSearch::Auto)
}

/// ε-neighbor graph with an explicit search strategy. Every strategy yields
/// the identical graph.
pub fn build_neighbor_graph_with(
    s1: &PointSet,
    s2: &PointSet,
    epsilon: f64,
    metric: Metric,
    search: NeighborSearch,
) -> Result<NeighborGraph> {
    check_dims(s1.dim(), s2.dim())?;
    check_epsilon(epsilon)?;
    let use_grid = match search {
        NeighborSearch::BruteForce => false,
        NeighborSearch::Grid => true,
        NeighborSearch::Auto => s1.dim() <= 3 && s1.len() * s2.len() >= 4096,
    };
    let grid = if use_grid { CellIndex::new(s2, epsilon) } else { None };

    let mut offsets = Vec::with_capacity(s1.len() + 1);
    let mut targets = Vec::new();
    offsets.push(0);
    let mut scratch = Vec::new();
    for x in s1.rows() {
        match &grid {
            Some(index) => {
                scratch.clear();
                index.candidates(x, &mut scratch);
                scratch.retain(|&j| metric.eval(x, s2.row(j)) <= epsilon);
                scratch.sort_unstable();
                targets.extend_from_slice(&scratch);
            }
            None => {
                targets.extend(
                    s2.rows()
                        .enumerate()
                        .filter(|(_, y)| metric.eval(x, y) <= epsilon)
                        .map(|(j, _)| j),
                );
            }
        }
        offsets.push(targets.len());
    }
    Ok(NeighborGraph {
        n_left: s1.len(),
        n_right: s2.len(),
        offsets,
        targets,
        epsilon,
        metric,
    })
}

/// Hash grid over the right sample. The cell side is a hair wider than ε so
/// that any point within ε (under L∞, hence also L1/L2) of a query lies in one
/// of the 3^d cells around the query's cell despite rounding in the division.
struct CellIndex {
    side: f64,
    dim: usize,
    cells: HashMap<Vec<i64>, Vec<usize>>,
}

impl CellIndex {
    const MAX_CELL: f64 = 1e15;

    fn new(points: &PointSet, epsilon: f64) -> Option<Self> {
        let side = epsilon * (1.0 + 1e-9);
        let mut cells: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        for (j, y) in points.rows().enumerate() {
            let key = Self::key(y, side)?;
            cells.entry(key).or_default().push(j);
        }
        Some(Self {
            side,
            dim: points.dim(),
            cells,
        })
    }

    fn key(p: &[f64], side: f64) -> Option<Vec<i64>> {
        p.iter()
            .map(|v| {
                let c = (v / side).floor();
                (c.abs() < Self::MAX_CELL).then_some(c as i64)
            })
            .collect()
    }

    fn candidates(&self, x: &[f64], out: &mut Vec<usize>) {
        let Some(center) = Self::key(x, self.side) else {
            // Out-of-range query: fall back to every indexed point.
            out.extend(self.cells.values().flatten().copied());
            return;
        };
        let mut offset = vec![-1i64; self.dim];
        let mut key = center.clone();
        loop {
            for k in 0..self.dim {
                key[k] = center[k] + offset[k];
            }
            if let Some(list) = self.cells.get(&key) {
                out.extend_from_slice(list);
            }
            // odometer over {-1,0,1}^d
            let mut k = 0;
            while k < self.dim {
                if offset[k] < 1 {
                    offset[k] += 1;
                    break;
                }
                offset[k] = -1;
                k += 1;
            }
            if k == self.dim {
                break;
            }
        }
    }
}
