//! Shapley-value feature attributions computed as distributions over
//! reference inputs.
//!
//! A prediction `f(x)` is explained against a reference distribution by
//! attributing `f(x) - f(r)` to the features for each reference `r` and
//! summarizing the resulting sample of attribution vectors.

pub mod data;
pub mod error;
pub mod explain;
pub mod games;
pub mod models;
pub mod references;
pub mod report;
pub mod shapley;
pub mod stats;
pub mod toy;
pub mod types;

pub use error::{Error, ErrorCategory, Result};
pub use explain::{
    attribute_distribution, attribute_enumerated, cluster_summary, insensitivity_audit, mean_with_ci,
    AttributionSample, ClusterReport, FiniteDomain, SummaryReport,
};
pub use games::{conditional_payoff, single_reference_payoff, unified_payoff, GamePayoff, ReferenceMode};
pub use models::{load_external, load_model, Model, ModelHandle};
pub use references::{Dataset, ReferenceSource};
pub use shapley::{check_axioms, exact_shapley, EstimatorKind, EstimatorSpec};
pub use types::{composite_input, AttributionVector, Coalition, FeatureKind, FeatureSchema, FeatureVector};
