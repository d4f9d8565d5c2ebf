//! BCa bootstrap intervals for PV̂ and the interval-inclusion tests.
//!
//! Replicates resample each sample independently with replacement at its
//! original size. The acceleration constant comes from a pooled jackknife:
//! every point of either sample is left out once.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{PvError, Result};
use crate::geometry::{check_epsilon, normalize_unit_box, Metric, PointSet};
use crate::inference::{BoundParams, TestKind, TestMethod, TestReport};
use crate::matching::{leave_one_out, pv_hat};
use crate::rng::substream;

pub const DEFAULT_BOOTSTRAP_REPS: usize = 1000;
/// Below this many replicates the tail quantiles are poorly resolved.
pub const MIN_RECOMMENDED_REPS: usize = 100;

const Z0_CLAMP: f64 = 4.0;

/// A bootstrap confidence interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiResult {
    pub lower: f64,
    pub upper: f64,
    /// Confidence level `1 - α`.
    pub level: f64,
    /// Number of replicates.
    pub b: usize,
    /// Bias-correction constant.
    pub z0: f64,
    /// Acceleration constant.
    pub a: f64,
    /// All replicates were equal; the interval collapses to that value.
    pub degenerate: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicates: Option<Vec<f64>>,
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(PvError::param("level", format!("must lie in (0,1), got {level}")));
    }
    Ok(())
}

/// `B` bootstrap replicates of PV̂. Replicate `b` draws from substream
/// `(seed, b)`, so the output does not depend on the thread count.
pub fn bootstrap_pv(
    s1: &PointSet,
    s2: &PointSet,
    epsilon: f64,
    metric: Metric,
    b: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if b == 0 {
        return Err(PvError::param("B", "need at least one replicate"));
    }
    if s1.dim() != s2.dim() {
        return Err(PvError::DimensionMismatch {
            expected: s1.dim(),
            found: s2.dim(),
        });
    }
    check_epsilon(epsilon)?;
    let (n, m) = (s1.len(), s2.len());
    (0..b)
        .into_par_iter()
        .map(|rep| {
            let mut rng = substream(seed, rep as u64);
            let i1: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let i2: Vec<usize> = (0..m).map(|_| rng.random_range(0..m)).collect();
            pv_hat(&s1.select(&i1), &s2.select(&i2), epsilon, metric).map(|e| e.value)
        })
        .collect()
}

/// Acceleration `a = Σ(θ̄-θᵢ)³ / (6 [Σ(θ̄-θᵢ)²]^{3/2})`; zero when the
/// jackknife values do not vary.
pub fn acceleration_from_jackknife(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let (mut s2, mut s3) = (0.0, 0.0);
    for &v in values {
        let d = mean - v;
        s2 += d * d;
        s3 += d * d * d;
    }
    if s2 <= 0.0 {
        return 0.0;
    }
    let a = s3 / (6.0 * s2.powf(1.5));
    if a.is_finite() {
        a
    } else {
        0.0
    }
}

/// Jackknife acceleration of PV̂ over the pooled leave-one-out sequence.
pub fn jackknife_acceleration(s1: &PointSet, s2: &PointSet, epsilon: f64, metric: Metric) -> Result<f64> {
    if s1.len() < 2 || s2.len() < 2 {
        return Ok(0.0);
    }
    let (mut left, right) = leave_one_out(s1, s2, epsilon, metric)?;
    left.extend(right);
    Ok(acceleration_from_jackknife(&left))
}

/// Bias correction `z0 = Φ⁻¹(p)` where `p` is the fraction of replicates
/// below `observed`, ties counting one half. Clamped to ±4.
pub fn bias_correction(replicates: &[f64], observed: f64) -> f64 {
    let below = replicates.iter().filter(|&&r| r < observed).count() as f64;
    let ties = replicates.iter().filter(|&&r| r == observed).count() as f64;
    let p = (below + 0.5 * ties) / replicates.len() as f64;
    std_normal().inverse_cdf(p).clamp(-Z0_CLAMP, Z0_CLAMP)
}

/// Order statistic of `sorted` at probability `q`: the `⌈qB⌉`-th smallest,
/// clamped to the sample. A small slack absorbs `Φ(Φ⁻¹(p)) ≠ p` rounding.
fn order_statistic(sorted: &[f64], q: f64) -> f64 {
    let b = sorted.len();
    let k = ((q * b as f64 - 1e-9).ceil() as isize).clamp(1, b as isize) as usize;
    sorted[k - 1]
}

fn sorted_copy(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Plain percentile interval with the same order-statistic convention as the
/// BCa interval.
pub fn percentile_interval(replicates: &[f64], level: f64) -> Result<(f64, f64)> {
    check_level(level)?;
    if replicates.is_empty() {
        return Err(PvError::param("replicates", "empty"));
    }
    let sorted = sorted_copy(replicates);
    let tail = (1.0 - level) / 2.0;
    Ok((order_statistic(&sorted, tail), order_statistic(&sorted, 1.0 - tail)))
}

/// BCa interval from replicates, the observed statistic and a given
/// acceleration constant.
pub fn bca_from_parts(replicates: &[f64], observed: f64, level: f64, acceleration: f64) -> Result<CiResult> {
    check_level(level)?;
    if replicates.is_empty() {
        return Err(PvError::param("replicates", "empty"));
    }
    let sorted = sorted_copy(replicates);
    let b = sorted.len();
    if sorted[0] == sorted[b - 1] {
        let v = sorted[0].clamp(0.0, 1.0);
        return Ok(CiResult {
            lower: v,
            upper: v,
            level,
            b,
            z0: 0.0,
            a: acceleration,
            degenerate: true,
            replicates: None,
        });
    }

    let normal = std_normal();
    let z0 = bias_correction(replicates, observed);
    let tail = (1.0 - level) / 2.0;
    let adjust = |z: f64| {
        let denom = 1.0 - acceleration * (z0 + z);
        if denom <= 0.0 {
            return if z > 0.0 { 1.0 } else { 0.0 };
        }
        normal.cdf(z0 + (z0 + z) / denom)
    };
    let q_lo = adjust(normal.inverse_cdf(tail));
    let q_hi = adjust(normal.inverse_cdf(1.0 - tail));
    let lo = order_statistic(&sorted, q_lo);
    let hi = order_statistic(&sorted, q_hi);
    Ok(CiResult {
        lower: lo.min(hi).clamp(0.0, 1.0),
        upper: lo.max(hi).clamp(0.0, 1.0),
        level,
        b,
        z0,
        a: acceleration,
        degenerate: false,
        replicates: None,
    })
}

/// BCa interval with the acceleration estimated by the pooled jackknife.
pub fn bca_interval(
    replicates: &[f64],
    observed: f64,
    level: f64,
    s1: &PointSet,
    s2: &PointSet,
    epsilon: f64,
    metric: Metric,
) -> Result<CiResult> {
    let a = jackknife_acceleration(s1, s2, epsilon, metric)?;
    bca_from_parts(replicates, observed, level, a)
}

/// Bootstrap settings for the interval-based tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub reps: usize,
    pub seed: u64,
    /// Keep the replicate vector in the returned [`CiResult`].
    pub keep_replicates: bool,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            reps: DEFAULT_BOOTSTRAP_REPS,
            seed: 0,
            keep_replicates: false,
        }
    }
}

/// Reject "PV ≤ θ" iff `[0, θ]` is not inside `[lower, upper]`.
pub fn ci_similarity_decision(lower: f64, upper: f64, theta: f64) -> bool {
    !(lower <= 0.0 && theta <= upper)
}

/// Reject "PV ≥ θ" iff the interval lies below θ (`upper < θ`).
pub fn ci_equivalence_decision(upper: f64, theta: f64) -> bool {
    upper < theta
}

struct CiRun {
    statistic: f64,
    ci: CiResult,
    params: BoundParams,
}

fn run_ci(
    s1: &PointSet,
    s2: &PointSet,
    epsilon: f64,
    alpha: f64,
    boot: BootstrapConfig,
    metric: Metric,
) -> Result<CiRun> {
    let params = BoundParams::new(epsilon, s1.dim(), s1.len().min(s2.len()), alpha)?;
    let (a, b) = normalize_unit_box(s1, s2)?;
    let statistic = pv_hat(&a, &b, epsilon, metric)?.value;
    let replicates = bootstrap_pv(&a, &b, epsilon, metric, boot.reps, boot.seed)?;
    let mut ci = bca_interval(&replicates, statistic, 1.0 - alpha, &a, &b, epsilon, metric)?;
    if boot.keep_replicates {
        ci.replicates = Some(replicates);
    }
    Ok(CiRun {
        statistic,
        ci,
        params,
    })
}

fn check_theta(theta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(PvError::param("theta", format!("must lie in [0,1], got {theta}")));
    }
    Ok(())
}

/// Interval-based test of H0: PV ≤ θ at level α, using the `1-α` BCa
/// interval of PV̂ on unit-box-normalized data.
pub fn ci_similarity_test(
    s1: &PointSet,
    s2: &PointSet,
    epsilon: f64,
    theta: f64,
    alpha: f64,
    boot: BootstrapConfig,
    metric: Metric,
) -> Result<TestReport> {
    check_theta(theta)?;
    let run = run_ci(s1, s2, epsilon, alpha, boot, metric)?;
    Ok(TestReport {
        kind: TestKind::Similarity,
        method: TestMethod::Bca,
        statistic: run.statistic,
        threshold: theta,
        theta,
        alpha,
        reject: ci_similarity_decision(run.ci.lower, run.ci.upper, theta),
        vacuous: false,
        metric,
        n: s1.len(),
        m: s2.len(),
        params: run.params,
        ci: Some(run.ci),
        per_projection: None,
    })
}

/// Interval-inclusion test of H0: PV ≥ θ; rejecting deduces similarity.
pub fn ci_equivalence_test(
    s1: &PointSet,
    s2: &PointSet,
    epsilon: f64,
    theta: f64,
    alpha: f64,
    boot: BootstrapConfig,
    metric: Metric,
) -> Result<TestReport> {
    check_theta(theta)?;
    let run = run_ci(s1, s2, epsilon, alpha, boot, metric)?;
    Ok(TestReport {
        kind: TestKind::Equivalence,
        method: TestMethod::Bca,
        statistic: run.statistic,
        threshold: theta,
        theta,
        alpha,
        reject: ci_equivalence_decision(run.ci.upper, theta),
        vacuous: false,
        metric,
        n: s1.len(),
        m: s2.len(),
        params: run.params,
        ci: Some(run.ci),
        per_projection: None,
    })
}
