//! Approximation algorithms for nested-norm clustering: pick at most `k`
//! centers; each cluster is scored by an inner norm of its distance vector
//! and the cluster scores are combined by an outer norm.
//!
//! The two workhorses are [`ball_kmedian`] (truncated-connection-plus-radii
//! objective, covering the top-ℓ/sum family) and `msrdc` (min-sum of
//! radius-dependent costs, covering the max/ordered family); `reductions`
//! maps the named norm combinations onto them. Exact baselines for testing
//! live in [`oracle`].

pub mod ball_kmedian;
mod engine;
pub mod metric;
pub mod msrdc;
pub mod norms;
pub mod oracle;
pub mod reductions;
pub mod synth;

pub use ball_kmedian::{BallKMInstance, BallSolution};
pub use metric::{FacilityId, MetricInstance, PointId};
pub use norms::Objective;
