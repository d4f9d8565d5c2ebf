//! Perturbed variation: a two-sample discrepancy that ignores differences
//! smaller than a scale ε.
//!
//! The sample score matches points of the two samples lying within ε of each
//! other and reports the unmatched fraction. Around it sit an exact solver for
//! discrete distributions, finite-sample tests, bootstrap intervals, a
//! random-projection variant and ranking utilities.

pub mod bootstrap;
pub mod error;
pub mod eval;
pub mod exact;
pub mod geometry;
pub mod inference;
pub mod matching;
pub mod projection;
pub mod rng;
pub mod synthetic;

pub use bootstrap::{bootstrap_pv, bca_interval, ci_equivalence_test, ci_similarity_test, BootstrapConfig, CiResult};
pub use error::{PvError, Result};
pub use eval::{average_precision, mean_average_precision, run_power_study, PowerStudyConfig, RankingTask};
pub use exact::{discretize, pv_discrete, pv_discrete_bruteforce, DiscreteDist, TransportPlan};
pub use geometry::{build_neighbor_graph, normalize_unit_box, Metric, NeighborGraph, PointSet};
pub use inference::{equivalence_test, required_sample_size, similarity_test, TestKind, TestMethod, TestReport};
pub use matching::{maximum_matching, pv_hat, Matching, PvEstimate};
pub use projection::{ppv_hat, ppv_similarity_test, sample_directions, PairSource, ProjectionSet};
