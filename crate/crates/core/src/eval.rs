//! Ranking metrics, scale selection by cross-validation and the synthetic
//! power study.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{ci_similarity_test, BootstrapConfig};
use crate::error::{PvError, Result};
use crate::geometry::{Metric, PointSet};
use crate::inference::{similarity_test, TestMethod};
use crate::matching::pv_hat;
use crate::rng::{derive_seed, substream};
use crate::synthetic::uniform_interval;

/// `AP = (1/r) Σ i / r_i` where `r_i` is the 1-based rank of the `i`-th
/// relevant item.
pub fn average_precision(ranks: &[usize], r: usize) -> Result<f64> {
    if r == 0 || ranks.len() != r {
        return Err(PvError::InvalidRanking(format!(
            "expected {r} relevant ranks, got {}",
            ranks.len()
        )));
    }
    let mut sum = 0.0;
    for (i, &rank) in ranks.iter().enumerate() {
        if rank < i + 1 {
            return Err(PvError::InvalidRanking(format!(
                "relevant item {} cannot sit at rank {rank}",
                i + 1
            )));
        }
        if i > 0 && rank <= ranks[i - 1] {
            return Err(PvError::InvalidRanking("ranks must be strictly increasing".into()));
        }
        sum += (i + 1) as f64 / rank as f64;
    }
    Ok(sum / r as f64)
}

/// Scores of every query against every candidate; lower means more similar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingTask {
    pub query_ids: Vec<String>,
    pub candidate_ids: Vec<String>,
    /// `relevance[q][c]`.
    pub relevance: Vec<Vec<bool>>,
    /// `scores[q][c]`.
    pub scores: Vec<Vec<f64>>,
}

impl RankingTask {
    fn validate(&self) -> Result<()> {
        let (nq, nc) = (self.query_ids.len(), self.candidate_ids.len());
        if nq == 0 || nc == 0 {
            return Err(PvError::Empty);
        }
        if self.relevance.len() != nq || self.scores.len() != nq {
            return Err(PvError::InvalidRanking("one relevance and score row per query".into()));
        }
        for q in 0..nq {
            if self.relevance[q].len() != nc || self.scores[q].len() != nc {
                return Err(PvError::InvalidRanking(format!(
                    "query {} needs {nc} relevance flags and scores",
                    self.query_ids[q]
                )));
            }
            if self.scores[q].iter().any(|s| !s.is_finite()) {
                return Err(PvError::InvalidRanking(format!(
                    "query {} has a non-finite score",
                    self.query_ids[q]
                )));
            }
        }
        Ok(())
    }

    /// Candidate indices for query `q` from most to least similar. A
    /// candidate whose id equals the query id is left out; ties go to the
    /// smaller candidate id.
    pub fn ranking(&self, q: usize) -> Vec<usize> {
        let scores = &self.scores[q];
        let mut order: Vec<usize> = (0..self.candidate_ids.len())
            .filter(|&c| self.candidate_ids[c] != self.query_ids[q])
            .collect();
        order.sort_by(|&a, &b| {
            scores[a]
                .total_cmp(&scores[b])
                .then_with(|| self.candidate_ids[a].cmp(&self.candidate_ids[b]))
                .then(a.cmp(&b))
        });
        order
    }

    fn relevant_ranks(&self, q: usize) -> Vec<usize> {
        self.ranking(q)
            .iter()
            .enumerate()
            .filter(|(_, &c)| self.relevance[q][c])
            .map(|(pos, _)| pos + 1)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub per_query_ap: Vec<f64>,
    pub map: f64,
    /// Precision and recall pooled over queries at every cutoff `k`.
    pub pr_curve: Vec<PrPoint>,
}

/// Per-query AP, their mean and the pooled precision/recall curve.
pub fn mean_average_precision(task: &RankingTask) -> Result<RankingReport> {
    task.validate()?;
    let nq = task.query_ids.len();
    let mut per_query_ap = Vec::with_capacity(nq);
    let mut hits_at: Vec<Vec<usize>> = Vec::with_capacity(nq);
    let mut total_relevant = 0usize;
    for q in 0..nq {
        let ranks = task.relevant_ranks(q);
        if ranks.is_empty() {
            return Err(PvError::InvalidRanking(format!(
                "query {} has no relevant candidate",
                task.query_ids[q]
            )));
        }
        per_query_ap.push(average_precision(&ranks, ranks.len())?);
        total_relevant += ranks.len();
        hits_at.push(ranks);
    }
    let map = per_query_ap.iter().sum::<f64>() / nq as f64;

    let lengths: Vec<usize> = (0..nq).map(|q| task.ranking(q).len()).collect();
    let depth = lengths.iter().copied().max().unwrap_or(0);
    let mut pr_curve = Vec::with_capacity(depth);
    for k in 1..=depth {
        let hits: usize = hits_at.iter().map(|r| r.iter().filter(|&&rank| rank <= k).count()).sum();
        let retrieved: usize = lengths.iter().map(|&len| len.min(k)).sum();
        pr_curve.push(PrPoint {
            recall: hits as f64 / total_relevant as f64,
            precision: hits as f64 / retrieved as f64,
        });
    }
    Ok(RankingReport {
        per_query_ap,
        map,
        pr_curve,
    })
}

/// Named point sets for queries and candidates plus the relevant pairs.
#[derive(Debug, Clone)]
pub struct RankingCorpus {
    pub queries: Vec<(String, PointSet)>,
    pub candidates: Vec<(String, PointSet)>,
    /// `(query id, candidate id)` pairs that are relevant.
    pub relevant: HashSet<(String, String)>,
}

/// Scores every query against every candidate with PV̂ at `epsilon`.
pub fn score_corpus(corpus: &RankingCorpus, epsilon: f64, metric: Metric) -> Result<RankingTask> {
    let scores = corpus
        .queries
        .par_iter()
        .map(|(_, q)| {
            corpus
                .candidates
                .iter()
                .map(|(_, c)| pv_hat(q, c, epsilon, metric).map(|e| e.value))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let relevance = corpus
        .queries
        .iter()
        .map(|(qid, _)| {
            corpus
                .candidates
                .iter()
                .map(|(cid, _)| corpus.relevant.contains(&(qid.clone(), cid.clone())))
                .collect()
        })
        .collect();
    Ok(RankingTask {
        query_ids: corpus.queries.iter().map(|(id, _)| id.clone()).collect(),
        candidate_ids: corpus.candidates.iter().map(|(id, _)| id.clone()).collect(),
        relevance,
        scores,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub epsilon: f64,
    /// `(ε, held-out MAP)` for every grid value.
    pub scores: Vec<(f64, f64)>,
}

/// Picks ε from `grid` by leave-one-query-out MAP; `tasks[i]` holds the
/// scores computed at `grid[i]`. Nothing is fitted on the training queries,
/// so each held-out AP is the query's own AP and the held-out MAP equals the
/// plain MAP. Ties go to the smallest ε.
pub fn cross_validate_epsilon(grid: &[f64], tasks: &[RankingTask]) -> Result<CvReport> {
    if grid.is_empty() {
        return Err(PvError::param("epsilon_grid", "empty"));
    }
    if grid.len() != tasks.len() {
        return Err(PvError::param("epsilon_grid", "one ranking task per grid value"));
    }
    let mut scores = Vec::with_capacity(grid.len());
    for (&eps, task) in grid.iter().zip(tasks) {
        scores.push((eps, mean_average_precision(task)?.map));
    }
    let best = scores
        .iter()
        .copied()
        .max_by(|a, b| a.1.total_cmp(&b.1).then_with(|| b.0.total_cmp(&a.0)))
        .expect("non-empty grid");
    Ok(CvReport { epsilon: best.0, scores })
}

/// [`cross_validate_epsilon`] scoring `corpus` at each grid value.
pub fn cross_validate_corpus(corpus: &RankingCorpus, grid: &[f64], metric: Metric) -> Result<CvReport> {
    let tasks = grid
        .iter()
        .map(|&eps| score_corpus(corpus, eps, metric))
        .collect::<Result<Vec<_>>>()?;
    cross_validate_epsilon(grid, &tasks)
}

fn default_grid_size() -> usize {
    10
}
fn default_alpha() -> f64 {
    0.05
}
fn default_sample_sizes() -> Vec<usize> {
    vec![250, 500, 1000, 2000, 5000]
}
fn default_epsilons() -> Vec<f64> {
    vec![0.1, 0.2, 0.3, 0.4, 0.5]
}
fn default_bootstrap_reps() -> usize {
    1000
}

/// Simulation of `P = U[0,1]` against `Q = U[Δ, 1+Δ]`, testing PV = 0.
///
/// ε is in normalized units: both samples are rescaled jointly into `[0,1]`
/// before matching, so a shift Δ becomes `Δ / (1+Δ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerStudyConfig {
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    /// Number of equally spaced shifts in `[0, 2ε]`, both ends included.
    #[serde(default = "default_grid_size")]
    pub delta_grid_size: usize,
    /// Explicit shifts replacing the per-ε grid.
    #[serde(default)]
    pub deltas: Option<Vec<f64>>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub reps: usize,
    #[serde(default = "default_sample_sizes")]
    pub sample_sizes: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
    pub method: TestMethod,
    /// Replicates per interval when `method` is `bca`.
    #[serde(default = "default_bootstrap_reps")]
    pub bootstrap_reps: usize,
}

impl PowerStudyConfig {
    pub fn new(method: TestMethod, reps: usize) -> Self {
        Self {
            epsilons: default_epsilons(),
            delta_grid_size: default_grid_size(),
            deltas: None,
            alpha: default_alpha(),
            reps,
            sample_sizes: default_sample_sizes(),
            seed: 0,
            method,
            bootstrap_reps: default_bootstrap_reps(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(PvError::param("reps", "must be at least 1"));
        }
        if self.epsilons.is_empty() || self.epsilons.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return Err(PvError::param("epsilons", "need at least one value in (0,1)"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(PvError::param("alpha", "must lie in (0,1)"));
        }
        if self.sample_sizes.is_empty() || self.sample_sizes.contains(&0) {
            return Err(PvError::param("sample_sizes", "need at least one positive size"));
        }
        match &self.deltas {
            Some(d) if d.is_empty() || d.iter().any(|&x| !(x >= 0.0 && x.is_finite())) => {
                return Err(PvError::param("deltas", "need at least one finite non-negative shift"));
            }
            None if self.delta_grid_size == 0 => {
                return Err(PvError::param("delta_grid_size", "must be at least 1"));
            }
            _ => {}
        }
        if self.method == TestMethod::Bca && self.bootstrap_reps == 0 {
            return Err(PvError::param("bootstrap_reps", "must be at least 1"));
        }
        Ok(())
    }

    /// Shifts simulated for `epsilon`.
    pub fn deltas_for(&self, epsilon: f64) -> Vec<f64> {
        if let Some(d) = &self.deltas {
            return d.clone();
        }
        let k = self.delta_grid_size;
        if k == 1 {
            return vec![0.0];
        }
        (0..k).map(|i| 2.0 * epsilon * i as f64 / (k - 1) as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCell {
    pub epsilon: f64,
    pub delta: f64,
    pub n: usize,
    pub reps: usize,
    pub rejections: usize,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerTable {
    pub method: TestMethod,
    pub alpha: f64,
    pub cells: Vec<PowerCell>,
}

impl PowerTable {
    pub fn cell(&self, epsilon: f64, delta: f64, n: usize) -> Option<&PowerCell> {
        self.cells
            .iter()
            .find(|c| c.epsilon == epsilon && c.delta == delta && c.n == n)
    }
}

/// One replication of one study cell. Public so callers can run single cells
/// with the same seeding as [`run_power_study`].
pub fn power_replicate(
    cfg: &PowerStudyConfig,
    epsilon: f64,
    delta: f64,
    n: usize,
    cell_seed: u64,
    rep: usize,
) -> Result<bool> {
    let mut rng = substream(cell_seed, rep as u64);
    let p = uniform_interval(n, 0.0, 1.0, &mut rng);
    let q = uniform_interval(n, delta, 1.0 + delta, &mut rng);
    let report = match cfg.method {
        TestMethod::Bound => similarity_test(&p, &q, epsilon, 0.0, cfg.alpha, Metric::Chebyshev)?,
        TestMethod::Bca => {
            let boot = BootstrapConfig {
                reps: cfg.bootstrap_reps,
                seed: derive_seed(cell_seed, rep as u64),
                keep_replicates: false,
            };
            ci_similarity_test(&p, &q, epsilon, 0.0, cfg.alpha, boot, Metric::Chebyshev)?
        }
    };
    Ok(report.reject)
}

/// Seed of the cell at `(ε index, Δ index, N index)`.
pub fn cell_seed(seed: u64, epsilon_index: usize, delta_index: usize, n_index: usize) -> u64 {
    derive_seed(
        derive_seed(derive_seed(seed, epsilon_index as u64), delta_index as u64),
        n_index as u64,
    )
}

/// Rejection frequency of the configured test for every `(ε, Δ, N)` cell.
/// Rows with Δ = 0 estimate the type-1 error, the rest the power.
pub fn run_power_study(cfg: &PowerStudyConfig) -> Result<PowerTable> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for (ei, &eps) in cfg.epsilons.iter().enumerate() {
        for (di, delta) in cfg.deltas_for(eps).into_iter().enumerate() {
            for (ni, &n) in cfg.sample_sizes.iter().enumerate() {
                cells.push((eps, delta, n, cell_seed(cfg.seed, ei, di, ni)));
            }
        }
    }
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..cfg.reps).map(move |r| (c, r)))
        .collect();
    let outcomes = jobs
        .par_iter()
        .map(|&(c, r)| {
            let (eps, delta, n, seed) = cells[c];
            power_replicate(cfg, eps, delta, n, seed, r)
        })
        .collect::<Result<Vec<_>>>()?;

    let cells = cells
        .iter()
        .enumerate()
        .map(|(c, &(epsilon, delta, n, _))| {
            let rejections = outcomes[c * cfg.reps..(c + 1) * cfg.reps].iter().filter(|&&r| r).count();
            PowerCell {
                epsilon,
                delta,
                n,
                reps: cfg.reps,
                rejections,
                frequency: rejections as f64 / cfg.reps as f64,
            }
        })
        .collect();
    Ok(PowerTable {
        method: cfg.method,
        alpha: cfg.alpha,
        cells,
    })
}
