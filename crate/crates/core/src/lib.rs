//! Measurement and decomposition of discrimination risk in language
//! models.
//!
//! A model's per-context attribute predictions for a demographic group are
//! compared with an unbiased reference. The expected criterion over
//! contexts (discrimination risk) splits into the criterion of the mean
//! stereotype (prejudice risk) and the remaining Jensen gap (volatility
//! risk).
//!
//! The pipeline is: [`miner`] extracts context templates from a corpus,
//! [`probe`] collects candidate-word probabilities from a model backend,
//! and [`audit`] turns them into a [`RiskReport`]. [`reference`] provides
//! analytic baselines and [`analysis`] the post-hoc statistics.

pub mod analysis;
pub mod audit;
mod error;
pub mod hash;
pub mod metrics;
pub mod miner;
pub mod probe;
pub mod reference;
pub mod schema;

pub use audit::{audit, RiskReport};
pub use error::{Error, Result};
pub use metrics::{
    CategoryDistribution, CriterionConfig, GroupAggregation, NormOrder, OverallRisk, RiskDecomposition,
    StereotypeVector, UnbiasedReference, WeightedContexts,
};
pub use miner::{ContextSet, ContextTemplate, SlotOrder};
pub use probe::{Backend, ProbabilityTensor, SlotConvention};
pub use reference::{BaselineKind, BaselineSpec};
pub use schema::{WordSchema, XDistribution};
