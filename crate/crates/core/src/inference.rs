//! Finite-sample bounds and the bound-based similarity / equivalence tests.
//!
//! All thresholds contain the term `log(2(2^M - 2))` with `M` the size of a
//! disjoint ε-cover of the unit box, `M = ⌈1/ε⌉^d`. `M` overflows any float
//! long before the bound becomes uninteresting, so the term is evaluated as
//! `(M+1)·ln 2 + ln1p(-2^(1-M))`.

use serde::{Deserialize, Serialize};

use crate::bootstrap::CiResult;
use crate::error::{PvError, Result};
use crate::geometry::{normalize_unit_box, Metric, PointSet};
use crate::matching::pv_hat;

/// Parameters shared by the bound formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub epsilon: f64,
    pub dim: usize,
    /// `N = min(n, m)`.
    pub n_min: usize,
    /// Confidence parameter δ (or significance α for the tests).
    pub delta_or_alpha: f64,
    /// `⌈1/ε⌉^d`; may exceed the integer range, hence a float.
    pub cover_cardinality: f64,
}

impl BoundParams {
    pub fn new(epsilon: f64, dim: usize, n_min: usize, delta_or_alpha: f64) -> Result<Self> {
        check_open_unit("epsilon", epsilon)?;
        check_open_unit("delta", delta_or_alpha)?;
        if n_min == 0 {
            return Err(PvError::param("n_min", "must be at least 1"));
        }
        Ok(Self {
            epsilon,
            dim,
            n_min,
            delta_or_alpha,
            cover_cardinality: cover_cardinality(epsilon, dim)?,
        })
    }
}

fn check_open_unit(name: &'static str, v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return Err(PvError::param(name, format!("must lie in (0,1), got {v}")));
    }
    Ok(())
}

/// `⌈1/ε⌉^d`. A small tolerance keeps `1/ε` that is integral up to rounding
/// (e.g. `ε = 0.1`) from rounding up.
pub fn cover_cardinality(epsilon: f64, dim: usize) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(PvError::param("epsilon", format!("must be positive, got {epsilon}")));
    }
    if dim == 0 {
        return Err(PvError::param("dim", "must be at least 1"));
    }
    let side = (1.0 / epsilon - 1e-9).ceil().max(1.0);
    // exact integer power while it fits, so covers like 100^10 stay exact
    let exact = (side as u128).checked_pow(dim as u32).filter(|_| side < 1e18);
    Ok(match exact {
        Some(v) => v as f64,
        None => side.powi(dim as i32),
    })
}

/// `ln(2(2^M - 2))`, finite for any `M >= 2`.
pub fn log_cover_term(m: f64) -> Result<f64> {
    if m.is_nan() || m < 2.0 {
        return Err(PvError::param(
            "cover_cardinality",
            format!("must be at least 2 for the bound to be defined, got {m}"),
        ));
    }
    let ln2 = std::f64::consts::LN_2;
    // ln(2(2^M - 2)) = ln 2 + M ln 2 + ln(1 - 2^(1-M))
    Ok(ln2 + m * ln2 + (-(1.0 - m).exp2()).ln_1p())
}

/// Deviation `η` such that `|PV̂ - PV| <= η` with probability at least `1-δ`.
pub fn deviation_eta(p: &BoundParams) -> Result<f64> {
    let l = log_cover_term(p.cover_cardinality)?;
    Ok((2.0 * (l + (1.0 / p.delta_or_alpha).ln()) / p.n_min as f64).sqrt())
}

/// Rejection threshold `t` of the bound-based similarity test.
pub fn similarity_threshold(epsilon: f64, dim: usize, alpha: f64, n_min: usize) -> Result<f64> {
    let p = BoundParams::new(epsilon, dim, n_min, alpha)?;
    let l = log_cover_term(p.cover_cardinality)?;
    Ok(((2.0 * l + 2.0 * (1.0 / alpha).ln()) / n_min as f64).sqrt())
}

/// Real-valued sample-size bound for effect size `theta0` at levels α, β.
pub fn sample_size_bound(theta0: f64, epsilon: f64, dim: usize, alpha: f64, beta: f64) -> Result<f64> {
    if !(theta0 > 0.0 && theta0 <= 1.0) {
        return Err(PvError::param("theta0", format!("must lie in (0,1], got {theta0}")));
    }
    check_open_unit("epsilon", epsilon)?;
    check_open_unit("alpha", alpha)?;
    check_open_unit("beta", beta)?;
    let l = log_cover_term(cover_cardinality(epsilon, dim)?)?;
    Ok((4.0 * l + 2.0 * (1.0 / alpha).ln() + 2.0 * (1.0 / beta).ln()) / (theta0 * theta0))
}

const MAX_EXACT_SIZE: f64 = 9_007_199_254_740_992.0;

/// Smallest per-sample size `N` guaranteeing type-1 error ≤ α and type-2
/// error ≤ β against effects of at least `theta0`.
pub fn required_sample_size(theta0: f64, epsilon: f64, dim: usize, alpha: f64, beta: f64) -> Result<u64> {
    let bound = sample_size_bound(theta0, epsilon, dim, alpha, beta)?;
    // past 2^53 the float bound no longer pins down an integer
    if bound >= MAX_EXACT_SIZE {
        return Err(PvError::param(
            "sample_size",
            format!("required size {bound:e} is too large to represent exactly"),
        ));
    }
    Ok(bound.ceil() as u64)
}

/// Sample sizes for which PV̂ between two uniform samples on the unit sphere
/// `S^(d-1)` exceeds `η` with probability at least `1-δ`, although the
/// underlying PV is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeRegime {
    pub lower_bound: f64,
    pub upper_bound: f64,
    /// `⌈lower_bound⌉`.
    pub n_low: u64,
    /// `⌊upper_bound⌋`.
    pub n_high: u64,
    /// True when no integer lies in `[n_low, n_high]`.
    pub empty: bool,
}

impl SizeRegime {
    pub fn contains(&self, n: u64) -> bool {
        !self.empty && self.n_low <= n && n <= self.n_high
    }
}

pub fn high_dim_regime(delta: f64, eta: f64, epsilon: f64, dim: usize) -> Result<SizeRegime> {
    check_open_unit("delta", delta)?;
    check_open_unit("epsilon", epsilon)?;
    if !(0.0..2.0 / 3.0).contains(&eta) {
        return Err(PvError::param("eta", format!("must lie in [0, 2/3), got {eta}")));
    }
    let gap = 1.0 - 1.5 * eta;
    let lower_bound = (1.0 / delta).ln() / (2.0 * gap * gap);
    let upper_bound = eta / 2.0 * (dim as f64 * (1.0 - epsilon * epsilon / 2.0) / 2.0).exp();
    let n_low = lower_bound.ceil().max(0.0) as u64;
    let n_high = upper_bound.floor().min(u64::MAX as f64) as u64;
    Ok(SizeRegime {
        lower_bound,
        upper_bound,
        n_low,
        n_high,
        empty: n_low > n_high,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    /// H0: PV ≤ θ; rejecting signals dissimilarity.
    Similarity,
    /// H0: PV ≥ θ; rejecting signals similarity.
    Equivalence,
    /// H0: PV = 0 via random projections.
    Ppv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestMethod {
    /// Closed-form finite-sample threshold.
    Bound,
    /// BCa bootstrap confidence interval.
    Bca,
}

/// Outcome of any of the hypothesis tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub kind: TestKind,
    pub method: TestMethod,
    pub statistic: f64,
    /// Value the statistic is compared against (bound tests), or θ for the
    /// interval-inclusion tests.
    pub threshold: f64,
    pub theta: f64,
    pub alpha: f64,
    pub reject: bool,
    /// Set when the rejection region is empty (equivalence test with θ ≤ t).
    pub vacuous: bool,
    pub metric: Metric,
    pub n: usize,
    pub m: usize,
    pub params: BoundParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci: Option<CiResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_projection: Option<Vec<f64>>,
}

fn check_theta(theta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(PvError::param("theta", format!("must lie in [0,1], got {theta}")));
    }
    Ok(())
}

struct Normalized {
    statistic: f64,
    params: BoundParams,
    n: usize,
    m: usize,
}

fn normalized_statistic(
    s1: &PointSet,
    s2: &PointSet,
    epsilon: f64,
    alpha: f64,
    metric: Metric,
) -> Result<Normalized> {
    let params = BoundParams::new(epsilon, s1.dim(), s1.len().min(s2.len()), alpha)?;
    let (a, b) = normalize_unit_box(s1, s2)?;
    let statistic = pv_hat(&a, &b, epsilon, metric)?.value;
    Ok(Normalized {
        statistic,
        params,
        n: s1.len(),
        m: s2.len(),
    })
}

/// Tests H0: PV(P,Q,ε) ≤ θ. Both samples are normalized into the unit box
/// first, so `epsilon` is in normalized units. Rejects iff `PV̂ > t + θ`.
pub fn similarity_test(
    s1: &PointSet,
    s2: &PointSet,
    epsilon: f64,
    theta: f64,
    alpha: f64,
    metric: Metric,
) -> Result<TestReport> {
    if !(0.0..1.0).contains(&theta) {
        return Err(PvError::param("theta", format!("must lie in [0,1), got {theta}")));
    }
    let z = normalized_statistic(s1, s2, epsilon, alpha, metric)?;
    let t = similarity_threshold(epsilon, s1.dim(), alpha, z.params.n_min)?;
    Ok(TestReport {
        kind: TestKind::Similarity,
        method: TestMethod::Bound,
        statistic: z.statistic,
        threshold: t + theta,
        theta,
        alpha,
        reject: z.statistic > t + theta,
        vacuous: false,
        metric,
        n: z.n,
        m: z.m,
        params: z.params,
        ci: None,
        per_projection: None,
    })
}

/// Tests H0: PV(P,Q,ε) ≥ θ. Rejects (deduces similarity) iff `PV̂ < θ - t`;
/// when `θ ≤ t` the region is empty and the report is flagged vacuous.
pub fn equivalence_test(
    s1: &PointSet,
    s2: &PointSet,
    epsilon: f64,
    theta: f64,
    alpha: f64,
    metric: Metric,
) -> Result<TestReport> {
    check_theta(theta)?;
    let z = normalized_statistic(s1, s2, epsilon, alpha, metric)?;
    let t = similarity_threshold(epsilon, s1.dim(), alpha, z.params.n_min)?;
    let (reject, vacuous) = equivalence_decision(z.statistic, theta, t);
    Ok(TestReport {
        kind: TestKind::Equivalence,
        method: TestMethod::Bound,
        statistic: z.statistic,
        threshold: theta - t,
        theta,
        alpha,
        reject,
        vacuous,
        metric,
        n: z.n,
        m: z.m,
        params: z.params,
        ci: None,
        per_projection: None,
    })
}

/// `(reject, vacuous)` for the equivalence rule `statistic < θ - t`.
pub fn equivalence_decision(statistic: f64, theta: f64, t: f64) -> (bool, bool) {
    if theta <= t {
        (false, true)
    } else {
        (statistic < theta - t, false)
    }
}
