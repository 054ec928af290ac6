//! Bootstrap assessment of empirical rankings.
//!
//! Given samples for `p` items, the crate estimates each item's parameter,
//! ranks the items, and uses the bootstrap (n-out-of-n or m-out-of-n, with
//! independent, synchronous or independent-component resampling) to estimate
//! the distribution of every item's rank and the corresponding rank
//! prediction intervals. It also chooses the resample size `m`, evaluates the
//! limiting rank distributions used to validate the bootstrap, and runs the
//! simulation scenarios that exercise all of the above.

pub mod data;
pub mod engine;
pub mod error;
pub mod estimators;
pub mod mselect;
pub mod numeric;
pub mod oracle;
pub mod par;
pub mod ranking;
pub mod resampling;
pub mod sim;
pub mod stream;

pub use data::{
    load_long_csv, load_matrix_csv, summarize_sizes, Layout, PopulationData, SampleSizeSummary,
};
pub use engine::{
    bootstrap_rank_distribution, conditional_rank_distribution, interval_width_summary,
    prediction_intervals, ConditionalLoops, ConditionalSummary, IntervalSet, RankDistribution,
    RankInterval,
};
pub use error::{Error, Result};
pub use estimators::{
    estimate, estimate_all, sigma_hat, EstimatorKind, EstimatorSpec, SigmaMethod,
};
pub use ranking::{rank_estimates, RankVector};
pub use resampling::{resolve_sizes, ResamplePlan, Rounding, Scheme, SizeRule};
pub use stream::StreamSeed;
