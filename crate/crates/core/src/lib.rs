//! Learned joint travel-cost distributions for road-network paths.
//!
//! Off-line, [`learner::build_store`] turns map-matched trajectories into a
//! [`VariableStore`] of histograms over sub-paths and time intervals. On-line,
//! [`estimator::estimate`] selects the candidate set of learned variables with
//! the least entropy for a query path and departure time, composes their joint
//! distribution and returns the distribution of the total cost.

// Negated comparisons also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod estimator;
pub mod eval;
pub mod histogram;
pub mod learner;
pub mod model;
pub mod roadnet;
pub mod synthgen;
pub mod time;
pub mod trajstore;

pub use estimator::{estimate, Candidate, Crv, EstimateError, EstimationResult, Method};
pub use histogram::{Bucket, HistError, HistParams, Histogram1D, HistogramND};
pub use learner::{build_store, LearnParams, LearnedVariable, Source, VariableStore};
pub use roadnet::{is_subpath, Edge, EdgeId, Path, RoadNetError, RoadNetwork};
pub use time::{partition_day, TimeInterval, Window};
pub use trajstore::{CostVector, EdgeTraversal, Trajectory, TrajectoryStore};
